#include "encrust/phy.hpp"

#include <cmath>
#include <stdexcept>

namespace encrust {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

std::uint16_t header_crc(const Frame& frame) {
  const std::uint8_t fields[4] = {
      static_cast<std::uint8_t>(frame.seq >> 8),
      static_cast<std::uint8_t>(frame.seq & 0xff), frame.length,
      frame.pad_bits};
  return crc16_ccitt(fields, sizeof(fields));
}

}  // namespace

std::size_t hamming_distance(const BitVec& a, const BitVec& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("hamming_distance: size mismatch");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    count += a.get(i) != b.get(i);
  }
  return count;
}

std::uint16_t crc16_ccitt(const std::uint8_t* data, std::size_t len) {
  std::uint16_t crc = 0xffff;
  for (std::size_t i = 0; i < len; ++i) {
    crc ^= static_cast<std::uint16_t>(data[i]) << 8;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
    }
  }
  return crc;
}

std::vector<Frame> packetize(const BitVec& bits) {
  std::vector<Frame> frames;
  const std::size_t payload_bits = 8u * kMaxPayloadBytes;
  std::uint16_t seq = 0;
  for (std::size_t pos = 0; pos < bits.size(); pos += payload_bits) {
    const std::size_t chunk = std::min(payload_bits, bits.size() - pos);
    Frame frame;
    frame.seq = seq++;
    frame.length = static_cast<std::uint8_t>((chunk + 7) / 8);
    frame.pad_bits = static_cast<std::uint8_t>(frame.length * 8u - chunk);
    frame.payload.assign(frame.length, 0);
    for (std::size_t i = 0; i < chunk; ++i) {
      if (bits.get(pos + i)) {
        frame.payload[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

BitVec depacketize(const std::vector<Frame>& frames) {
  BitVec bits;
  for (const Frame& frame : frames) {
    const std::size_t nbits = frame.payload.size() * 8 - frame.pad_bits;
    for (std::size_t i = 0; i < nbits; ++i) {
      bits.push_back((frame.payload[i / 8] >> (7 - i % 8)) & 1u);
    }
  }
  return bits;
}

BitVec serialize_header(const Frame& frame) {
  const std::uint16_t crc = header_crc(frame);
  std::vector<std::uint8_t> bytes = {
      static_cast<std::uint8_t>(frame.seq >> 8),
      static_cast<std::uint8_t>(frame.seq & 0xff),
      frame.length,
      frame.pad_bits,
      static_cast<std::uint8_t>(crc >> 8),
      static_cast<std::uint8_t>(crc & 0xff)};
  return BitVec::from_bytes(std::move(bytes));
}

bool parse_header(const BitVec& bits, Frame& frame) {
  if (bits.size() != kFrameHeaderBits) {
    return false;
  }
  const std::vector<std::uint8_t>& b = bits.bytes();
  frame.seq = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
  frame.length = b[2];
  frame.pad_bits = b[3];
  const auto crc = static_cast<std::uint16_t>((b[4] << 8) | b[5]);
  if (frame.length > kMaxPayloadBytes || frame.pad_bits > 7) {
    return false;
  }
  return crc == header_crc(frame);
}

std::vector<std::complex<double>> modulate(const BitVec& bits,
                                           int spreading_factor) {
  if (spreading_factor < 1) {
    throw std::invalid_argument("modulate: spreading factor must be >= 1");
  }
  std::vector<double> chips;
  chips.reserve(bits.size() * static_cast<std::size_t>(spreading_factor) + 1);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const double chip = bits.get(i) ? 1.0 : -1.0;
    for (int k = 0; k < spreading_factor; ++k) {
      chips.push_back(chip);
    }
  }
  if (chips.size() % 2 != 0) {
    chips.push_back(-1.0);  // flush chip so the final symbol is complete
  }
  std::vector<std::complex<double>> symbols(chips.size() / 2);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    // Even chips ride I, odd chips ride the half-chip-offset Q rail.
    symbols[s] = {chips[2 * s] * kInvSqrt2, chips[2 * s + 1] * kInvSqrt2};
  }
  return symbols;
}

std::vector<std::complex<double>> add_awgn(
    const std::vector<std::complex<double>>& symbols, double snr_db,
    std::mt19937_64& rng) {
  const double snr = std::pow(10.0, snr_db / 10.0);
  const double sigma = std::sqrt(1.0 / (2.0 * snr));  // Es = 1
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<std::complex<double>> out(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const double re = noise(rng);
    const double im = noise(rng);
    out[i] = symbols[i] + std::complex<double>(re, im);
  }
  return out;
}

std::vector<std::complex<double>> add_awgn(
    const std::vector<std::complex<double>>& symbols, double snr_db,
    std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  return add_awgn(symbols, snr_db, rng);
}

BitVec demodulate(const std::vector<std::complex<double>>& symbols,
                  int spreading_factor, std::size_t nbits) {
  if (spreading_factor < 1) {
    throw std::invalid_argument("demodulate: spreading factor must be >= 1");
  }
  std::vector<bool> chips;
  chips.reserve(symbols.size() * 2);
  for (const std::complex<double>& s : symbols) {
    chips.push_back(s.real() >= 0.0);
    chips.push_back(s.imag() >= 0.0);
  }
  BitVec bits(nbits);
  for (std::size_t i = 0; i < nbits; ++i) {
    int votes = 0;
    const std::size_t base = i * static_cast<std::size_t>(spreading_factor);
    for (int k = 0; k < spreading_factor; ++k) {
      votes += chips[base + static_cast<std::size_t>(k)] ? 1 : -1;
    }
    const bool bit = votes != 0
                         ? votes > 0
                         : chips[base];  // tie goes to the first chip
    bits.set(i, bit);
  }
  return bits;
}

TransmissionReport transmit(const BitVec& bits, const ChannelConfig& config) {
  const std::vector<Frame> frames = packetize(bits);
  const double snr_eff = config.snr_db + config.processing_gain_db;
  std::mt19937_64 rng(config.rng_seed);

  TransmissionReport report;
  for (const Frame& frame : frames) {
    const BitVec header_bits = serialize_header(frame);
    BitVec frame_bits = header_bits;
    const BitVec payload_bits =
        BitVec::from_bytes(frame.payload).slice(0, frame.payload.size() * 8);
    frame_bits.append(payload_bits);

    bool delivered = false;
    for (int attempt = 0; attempt <= config.max_retransmissions; ++attempt) {
      ++report.frames_sent;
      if (attempt > 0) {
        ++report.retransmissions;
      }
      const auto symbols = modulate(frame_bits, config.spreading_factor);
      const auto noisy = add_awgn(symbols, snr_eff, rng);
      const BitVec received =
          demodulate(noisy, config.spreading_factor, frame_bits.size());

      Frame rx;
      if (!parse_header(received.slice(0, kFrameHeaderBits), rx)) {
        ++report.header_failures;
        continue;  // retransmit with fresh noise
      }
      const std::size_t rx_payload_bits = rx.length * 8u - rx.pad_bits;
      const std::size_t tx_payload_bits =
          frame.payload.size() * 8u - frame.pad_bits;
      if (rx_payload_bits != tx_payload_bits) {
        // Checksum collision on corrupted length fields; the frame cannot
        // be reassembled, so treat it like a header failure.
        ++report.header_failures;
        continue;
      }
      const BitVec rx_payload =
          received.slice(kFrameHeaderBits, rx_payload_bits);
      const BitVec tx_payload = payload_bits.slice(0, rx_payload_bits);
      report.payload_bit_errors +=
          static_cast<int>(hamming_distance(rx_payload, tx_payload));
      report.delivered_bits.append(rx_payload);
      delivered = true;
      break;
    }
    if (!delivered) {
      report.failed = true;
    }
  }
  return report;
}

}  // namespace encrust
