#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "encrust/bits.hpp"

namespace encrust {

// Synthetic stand-in for the 802.15.4 MHR: sequence number, payload byte
// count, pad bit count, CRC-16 over the three fields. Header integrity is
// the retransmission trigger; payload errors pass through to the codec.
struct Frame {
  std::uint16_t seq = 0;
  std::uint8_t length = 0;  // payload bytes, at most kMaxPayloadBytes
  std::uint8_t pad_bits = 0;
  std::vector<std::uint8_t> payload;
};

inline constexpr int kMaxPayloadBytes = 102;
inline constexpr int kFrameHeaderBytes = 6;
inline constexpr int kFrameHeaderBits = 8 * kFrameHeaderBytes;

struct ChannelConfig {
  double snr_db = 0.0;
  int spreading_factor = 2;
  std::uint64_t rng_seed = 0;
  int max_retransmissions = 10;
  // Despread processing gain of the abstracted 2 Mchip/s DSSS correlator
  // (8 chips per data bit). The chip-level simulation below runs at the
  // post-correlator operating point snr_db + processing_gain_db.
  double processing_gain_db = 9.2;
};

struct TransmissionReport {
  BitVec delivered_bits;
  int frames_sent = 0;
  int retransmissions = 0;
  int header_failures = 0;
  int payload_bit_errors = 0;
  bool failed = false;  // some frame exhausted its retransmission budget
};

// Splits a bit stream into frames of at most 102 payload bytes; the final
// frame records its zero padding.
std::vector<Frame> packetize(const BitVec& bits);
BitVec depacketize(const std::vector<Frame>& frames);

BitVec serialize_header(const Frame& frame);
// Returns false when the checksum does not match.
bool parse_header(const BitVec& bits, Frame& frame);

// Repetition spreading to `spreading_factor` chips per bit, chips mapped
// pairwise onto OQPSK symbols (even chips on I, odd on Q, half-chip
// offset), unit average symbol energy.
std::vector<std::complex<double>> modulate(const BitVec& bits,
                                           int spreading_factor);

// Complex AWGN with per-dimension variance Es / (2 * 10^(snr_db/10)).
std::vector<std::complex<double>> add_awgn(
    const std::vector<std::complex<double>>& symbols, double snr_db,
    std::uint64_t rng_seed);
std::vector<std::complex<double>> add_awgn(
    const std::vector<std::complex<double>>& symbols, double snr_db,
    std::mt19937_64& rng);

// Coherent hard chip decisions, majority vote per bit; ties go to the
// first chip of the group.
BitVec demodulate(const std::vector<std::complex<double>>& symbols,
                  int spreading_factor, std::size_t nbits);

// Frame pipeline: packetize, modulate, AWGN at the post-correlator SNR,
// demodulate, reassemble. A frame whose header checksum fails is
// retransmitted with fresh noise, up to max_retransmissions; payload bit
// errors are delivered as-is.
TransmissionReport transmit(const BitVec& bits, const ChannelConfig& config);

}  // namespace encrust
