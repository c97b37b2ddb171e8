#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "encrust/baseline.hpp"
#include "encrust/codec.hpp"
#include "encrust/phy.hpp"

namespace encrust {

struct EcgRecord {
  std::string record_id;
  std::vector<int> samples;  // ADC values, non-negative
  int sample_rate_hz = 360;
  int resolution_bits = 11;
};

// Text format: "# record_id rate bits" header line, one integer per line.
EcgRecord load_ecg(const std::string& path);
void save_ecg(const EcgRecord& record, const std::string& path);

// Deterministic ECG-like waveform (P-QRS-T beats over a 1024 baseline),
// quantized to the 11-bit ADC range. Stand-in for MIT-BIH exports; any
// record in the text format above can be used instead.
EcgRecord synthesize_ecg(const std::string& record_id, int num_samples);

// Percentage root mean square difference; throws when |x| = 0.
double prd(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat);

// Seeded Box-Muller normal matrix, the Gaussian reference for coherence.
Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed);

enum class Experiment {
  coherence_sweep,
  quantization_sweep,
  prd_vs_snr,
  tx_efficiency,
  attack_kpa,
  attack_known_matrices,
};

enum class SchemeTag { soa, encrust, l_encrust };

std::string to_string(Experiment e);
std::string to_string(SchemeTag s);

struct ExperimentSpec {
  Experiment experiment = Experiment::tx_efficiency;
  CodecParams params;
  KeySchedule keys;
  std::vector<double> snr_grid;
  int trials = 100;
  std::uint64_t seed = 1;
  std::vector<SchemeTag> scheme_set{SchemeTag::soa, SchemeTag::l_encrust};
  std::vector<std::string> record_ids{"100", "104", "111", "210", "230"};
  std::vector<std::string> record_paths;  // empty -> synthesize record_ids
  ChannelConfig channel;
  int samples_per_record = 8192;
  int threads = 0;  // 0 picks hardware concurrency
};

// One emitted observation. Sweeps write one row per (configuration, trial)
// plus per-configuration summary rows carrying the efficiency percentage.
struct ResultRow {
  std::string experiment;
  std::string scheme;
  int m = 0;
  int l = 0;
  int d = 0;
  double snr_db = 0.0;
  long trial = 0;
  double prd = 0.0;
  double tx_efficiency_pct = -1.0;  // negative means not applicable
  std::map<std::string, std::string> extra;
};

// key=value per line, '#' comments. Unknown keys are rejected.
ExperimentSpec parse_experiment_spec(std::istream& in);
ExperimentSpec load_experiment_spec(const std::string& path);
std::vector<EcgRecord> resolve_records(const ExperimentSpec& spec);

std::vector<ResultRow> run_coherence_sweep(const ExperimentSpec& spec);
std::vector<ResultRow> run_quantization_sweep(
    const ExperimentSpec& spec, const std::vector<EcgRecord>& records);
std::vector<ResultRow> run_prd_vs_snr(const ExperimentSpec& spec,
                                      const std::vector<EcgRecord>& records);
std::vector<ResultRow> run_tx_efficiency(const ExperimentSpec& spec,
                                         const std::vector<EcgRecord>& records);
std::vector<ResultRow> run_attack_kpa(const ExperimentSpec& spec);
std::vector<ResultRow> run_attack_known_matrices(
    const ExperimentSpec& spec, const std::vector<EcgRecord>& records);

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

// First-row recovery attempt from plaintext/ciphertext pairs: builds the
// signal matrix from the plaintexts, takes the first ciphertext entries,
// and solves for the row. mask_gain scales the secret masks (0 reproduces
// the degenerate unmasked control).
struct AttackKpaResult {
  Eigen::VectorXd row_estimate;
  Eigen::VectorXd row_truth;
  double relative_error = 0.0;
};
AttackKpaResult attack_known_plaintext(
    const Codec& codec, const std::vector<Eigen::VectorXd>& plaintexts,
    double mask_gain);

// Adversary granted the true matrices substitutes a random mask on the
// legitimate decode path; the control arm decodes with the true mask.
struct AttackKnownMatricesResult {
  std::vector<double> adversary_prd;
  std::vector<double> control_prd;
};
AttackKnownMatricesResult attack_known_matrices(
    const Codec& codec, const std::vector<Eigen::VectorXd>& blocks,
    std::uint64_t rng_seed);

// RFC-4180 style, stable column order, rows sorted for determinism.
void emit_csv(const std::vector<ResultRow>& rows, std::ostream& out);
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> parse_csv(std::istream& in);  // round-trip checks

}  // namespace encrust
