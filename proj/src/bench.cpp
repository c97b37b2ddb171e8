#include "encrust/bench.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace encrust {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  return splitmix64(splitmix64(splitmix64(base ^ a) ^ b) ^ c);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : s) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (n <= 0) {
    return;
  }
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
  }
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
        }
      }
    });
  }
  for (std::thread& th : pool) {
    th.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

Eigen::VectorXd record_block(const EcgRecord& record, int block, int n) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    x(i) = record.samples[static_cast<std::size_t>(block * n + i)];
  }
  return x;
}

struct BlockRef {
  int record = 0;
  int block = 0;
};

std::vector<BlockRef> pooled_blocks(const std::vector<EcgRecord>& records,
                                    int n) {
  std::vector<BlockRef> refs;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const int count = static_cast<int>(records[r].samples.size()) / n;
    for (int b = 0; b < count; ++b) {
      refs.push_back({static_cast<int>(r), b});
    }
  }
  if (refs.empty()) {
    throw std::runtime_error("bench: records shorter than one block");
  }
  return refs;
}

std::array<std::uint8_t, 16> soa_key_from(const KeySchedule& keys) {
  std::array<std::uint8_t, 16> key{};
  std::copy_n(keys.lfg_key.begin(), 16, key.begin());
  return key;
}

ResultRow base_row(const ExperimentSpec& spec, SchemeTag scheme) {
  ResultRow row;
  row.experiment = to_string(spec.experiment);
  row.scheme = to_string(scheme);
  row.m = spec.params.m;
  row.l = spec.params.l;
  row.d = spec.params.d;
  return row;
}

struct PipelineOutcome {
  double prd_value = 100.0;
  bool success = false;
  bool tx_failed = false;
  int payload_bit_errors = 0;
  int retransmissions = 0;
};

// One compressive-scheme block through encode, channel, decode. The block
// id doubles as the per-block freshness counter.
PipelineOutcome run_cs_trial(const Codec& codec, const Eigen::VectorXd& x,
                             std::uint64_t block_id,
                             const ChannelConfig& channel) {
  const Eigen::VectorXd y = codec.measure(x, block_id);
  auto [q, scale] = quantize16(y);
  MeasurementBlock block;
  block.q = std::move(q);
  block.scale = scale;
  block.block_id = block_id;

  const TransmissionReport report =
      transmit(block_payload_bits(block), channel);
  PipelineOutcome out;
  out.tx_failed = report.failed;
  out.payload_bit_errors = report.payload_bit_errors;
  out.retransmissions = report.retransmissions;
  if (report.failed) {
    return out;  // lost frame: scored as a flat failure, PRD 100
  }
  MeasurementBlock received = block;
  received.q = payload_bits_to_samples(report.delivered_bits);
  const DecodedBlock decoded = codec.decode(received);
  out.prd_value = prd(x, decoded.x_hat);
  out.success = out.prd_value < 1.0;
  return out;
}

// The conventional pipeline across the same channel. The standard MAC
// retransmits on any frame error, so for efficiency accounting a block
// only counts as transmitted when its payload arrived clean first try.
PipelineOutcome run_soa_trial(const HaarPlan& plan,
                              const std::array<std::uint8_t, 16>& key,
                              const Eigen::VectorXd& x, std::uint64_t nonce,
                              const ChannelConfig& channel) {
  SoaCodec soa(plan, key);
  const CodedBitstream coded = soa.encode(x, nonce);
  const TransmissionReport report = transmit(coded.bits, channel);
  PipelineOutcome out;
  out.tx_failed = report.failed;
  out.payload_bit_errors = report.payload_bit_errors;
  out.retransmissions = report.retransmissions;
  if (report.failed) {
    return out;
  }
  const Eigen::VectorXd x_hat =
      soa.decode(report.delivered_bits, coded.side, nonce);
  out.prd_value = prd(x, x_hat);
  out.success = out.prd_value < 1.0 && report.payload_bit_errors == 0;
  return out;
}

}  // namespace

EcgRecord load_ecg(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_ecg: cannot open " + path);
  }
  std::string header;
  if (!std::getline(in, header) || header.empty() || header[0] != '#') {
    throw std::runtime_error("load_ecg: missing '# record_id rate bits' header");
  }
  EcgRecord record;
  {
    std::istringstream hs(header.substr(1));
    if (!(hs >> record.record_id >> record.sample_rate_hz >>
          record.resolution_bits)) {
      throw std::runtime_error("load_ecg: malformed header");
    }
  }
  const long max_value = (1L << record.resolution_bits) - 1;
  std::string line;
  long line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) {
      continue;
    }
    std::size_t used = 0;
    long value = 0;
    try {
      value = std::stol(line, &used);
    } catch (const std::exception&) {
      throw std::runtime_error("load_ecg: malformed line " +
                               std::to_string(line_number));
    }
    while (used < line.size() && std::isspace(static_cast<unsigned char>(line[used]))) {
      ++used;
    }
    if (used != line.size()) {
      throw std::runtime_error("load_ecg: malformed line " +
                               std::to_string(line_number));
    }
    if (value < 0 || value > max_value) {
      throw std::runtime_error("load_ecg: sample outside " +
                               std::to_string(record.resolution_bits) +
                               "-bit range at line " +
                               std::to_string(line_number));
    }
    record.samples.push_back(static_cast<int>(value));
  }
  return record;
}

void save_ecg(const EcgRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_ecg: cannot open " + path);
  }
  out << "# " << record.record_id << ' ' << record.sample_rate_hz << ' '
      << record.resolution_bits << '\n';
  for (const int v : record.samples) {
    out << v << '\n';
  }
}

EcgRecord synthesize_ecg(const std::string& record_id, int num_samples) {
  if (num_samples < 1) {
    throw std::invalid_argument("synthesize_ecg: num_samples must be positive");
  }
  EcgRecord record;
  record.record_id = record_id;
  record.samples.resize(static_cast<std::size_t>(num_samples));

  std::mt19937_64 rng(splitmix64(fnv1a(record_id)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double fs = 360.0;
  // One beat per 256 samples (about 84 bpm at 360 Hz), so codec blocks hold
  // a whole P-QRS-T complex; slow drift would sooner or later slice an R
  // upstroke at a block edge, and those windows defeat any M < N codec.
  const double beat_samples = 256.0;
  const double r_offset = 104.0 + 48.0 * unit(rng);  // beat phase per record
  const double morph = 0.85 + 0.3 * unit(rng);  // per-record amplitude factor
  const double wander_phase = 2.0 * std::numbers::pi * unit(rng);

  struct Wave {
    double offset_s;  // from the R peak
    double sigma_s;
    double amplitude;
  };
  const Wave waves[] = {
      {-0.185, 0.034, 68.0 * morph},    // P
      {-0.050, 0.020, -80.0 * morph},   // Q
      {0.0, 0.023, 540.0 * morph},      // R
      {0.050, 0.021, -120.0 * morph},   // S
      {0.215, 0.060, 175.0 * morph},    // T
  };

  std::vector<double> signal(static_cast<std::size_t>(num_samples), 0.0);
  double r_center = r_offset;
  while (r_center < num_samples + beat_samples) {
    const double beat_gain = 0.985 + 0.03 * unit(rng);
    const double wobble = 1.5 * (unit(rng) - 0.5);  // beat-to-beat phase
    for (const Wave& w : waves) {
      const double center = r_center + wobble + w.offset_s * fs;
      const double sigma = w.sigma_s * fs;
      const int lo = std::max(0, static_cast<int>(center - 5 * sigma));
      const int hi = std::min(num_samples - 1,
                              static_cast<int>(center + 5 * sigma) + 1);
      for (int i = lo; i <= hi; ++i) {
        const double t = (i - center) / sigma;
        signal[static_cast<std::size_t>(i)] +=
            w.amplitude * beat_gain * std::exp(-0.5 * t * t);
      }
    }
    r_center += beat_samples;
  }

  for (int i = 0; i < num_samples; ++i) {
    const double t = i / fs;
    const double wander = 9.0 * std::sin(2.0 * std::numbers::pi * 0.21 * t + wander_phase) +
                          4.0 * std::sin(2.0 * std::numbers::pi * 0.047 * t);
    const double v = 1024.0 + wander + signal[static_cast<std::size_t>(i)];
    record.samples[static_cast<std::size_t>(i)] = static_cast<int>(
        std::clamp(std::round(v), 0.0, 2047.0));
  }
  return record;
}

double prd(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat) {
  if (x.size() != x_hat.size()) {
    throw std::invalid_argument("prd: length mismatch");
  }
  const double denom = x.squaredNorm();
  if (denom == 0.0) {
    throw std::invalid_argument("prd: reference signal has zero norm");
  }
  return 100.0 * std::sqrt((x - x_hat).squaredNorm() / denom);
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Box-Muller keeps the sample stream identical across library versions.
  double spare = 0.0;
  bool has_spare = false;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (has_spare) {
        m(i, j) = spare;
        has_spare = false;
        continue;
      }
      const double u1 = std::max(unit(rng), 1e-300);
      const double u2 = unit(rng);
      const double radius = std::sqrt(-2.0 * std::log(u1));
      m(i, j) = radius * std::cos(2.0 * std::numbers::pi * u2);
      spare = radius * std::sin(2.0 * std::numbers::pi * u2);
      has_spare = true;
    }
  }
  return m;
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::coherence_sweep: return "coherence_sweep";
    case Experiment::quantization_sweep: return "quantization_sweep";
    case Experiment::prd_vs_snr: return "prd_vs_snr";
    case Experiment::tx_efficiency: return "tx_efficiency";
    case Experiment::attack_kpa: return "attack_kpa";
    case Experiment::attack_known_matrices: return "attack_known_matrices";
  }
  return "unknown";
}

std::string to_string(SchemeTag s) {
  switch (s) {
    case SchemeTag::soa: return "soa";
    case SchemeTag::encrust: return "encrust";
    case SchemeTag::l_encrust: return "l_encrust";
  }
  return "unknown";
}

namespace {

Experiment experiment_from_string(const std::string& s) {
  for (const Experiment e :
       {Experiment::coherence_sweep, Experiment::quantization_sweep,
        Experiment::prd_vs_snr, Experiment::tx_efficiency,
        Experiment::attack_kpa, Experiment::attack_known_matrices}) {
    if (to_string(e) == s) {
      return e;
    }
  }
  throw std::runtime_error("unknown experiment: " + s);
}

SchemeTag scheme_from_string(const std::string& s) {
  for (const SchemeTag t :
       {SchemeTag::soa, SchemeTag::encrust, SchemeTag::l_encrust}) {
    if (to_string(t) == s) {
      return t;
    }
  }
  throw std::runtime_error("unknown scheme: " + s);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      items.push_back(item);
    }
  }
  return items;
}

}  // namespace

ExperimentSpec parse_experiment_spec(std::istream& in) {
  ExperimentSpec spec;
  spec.keys = default_key_schedule();
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    // trim
    const auto is_space = [](unsigned char c) { return std::isspace(c); };
    while (!line.empty() && is_space(line.back())) line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && is_space(line[start])) ++start;
    line = line.substr(start);
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "experiment") {
      spec.experiment = experiment_from_string(value);
    } else if (key == "schemes") {
      spec.scheme_set.clear();
      for (const std::string& s : split_list(value)) {
        spec.scheme_set.push_back(scheme_from_string(s));
      }
    } else if (key == "records") {
      spec.record_ids = split_list(value);
    } else if (key == "record_paths") {
      spec.record_paths = split_list(value);
    } else if (key == "snr_grid") {
      spec.snr_grid.clear();
      for (const std::string& s : split_list(value)) {
        spec.snr_grid.push_back(std::stod(s));
      }
    } else if (key == "trials") {
      spec.trials = std::stoi(value);
    } else if (key == "seed") {
      spec.seed = std::stoull(value);
    } else if (key == "n") {
      spec.params.n = std::stoi(value);
    } else if (key == "m") {
      spec.params.m = std::stoi(value);
    } else if (key == "l") {
      spec.params.l = std::stoi(value);
    } else if (key == "d") {
      spec.params.d = std::stoi(value);
    } else if (key == "alpha2") {
      spec.params.alpha2 = std::stod(value);
    } else if (key == "c") {
      spec.params.c = std::stod(value);
    } else if (key == "mask_scale") {
      spec.params.mask_scale = std::stod(value);
    } else if (key == "stage2_eps_factor") {
      spec.params.stage2_eps_factor = std::stod(value);
    } else if (key == "solver_max_iters") {
      spec.params.solver.max_iters = std::stoi(value);
    } else if (key == "solver_tol") {
      spec.params.solver.tol_primal = std::stod(value);
      spec.params.solver.tol_dual = std::stod(value);
    } else if (key == "key") {
      spec.keys = key_schedule_from_hex(value);
    } else if (key == "b_iv") {
      spec.keys.b_iv = static_cast<std::uint16_t>(std::stoul(value, nullptr, 16));
    } else if (key == "a_iv") {
      spec.keys.a_iv = static_cast<std::uint16_t>(std::stoul(value, nullptr, 16));
    } else if (key == "spreading_factor") {
      spec.channel.spreading_factor = std::stoi(value);
    } else if (key == "max_retransmissions") {
      spec.channel.max_retransmissions = std::stoi(value);
    } else if (key == "processing_gain_db") {
      spec.channel.processing_gain_db = std::stod(value);
    } else if (key == "samples_per_record") {
      spec.samples_per_record = std::stoi(value);
    } else if (key == "threads") {
      spec.threads = std::stoi(value);
    } else {
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": unknown key '" + key + "'");
    }
  }
  return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config " + path);
  }
  return parse_experiment_spec(in);
}

std::vector<EcgRecord> resolve_records(const ExperimentSpec& spec) {
  std::vector<EcgRecord> records;
  if (!spec.record_paths.empty()) {
    for (const std::string& path : spec.record_paths) {
      records.push_back(load_ecg(path));
    }
    return records;
  }
  for (const std::string& id : spec.record_ids) {
    records.push_back(synthesize_ecg(id, spec.samples_per_record));
  }
  return records;
}

std::vector<ResultRow> run_coherence_sweep(const ExperimentSpec& spec) {
  const int n = spec.params.n;
  const int m = spec.params.m;
  const Eigen::MatrixXd psi = dct_basis(n);
  std::vector<ResultRow> rows;

  for (int d = 2; d <= 20; ++d) {
    const SensingMatrix phi = build_sparse_matrix(
        spec.keys.b_iv, kDefaultFeedbackMask, spec.params.shift_bits,
        spec.params.lsb_mask, d, m, n);
    const CoherenceReport report = mutual_coherence(phi, psi);
    ResultRow row = base_row(spec, SchemeTag::l_encrust);
    row.scheme = "sparse";
    row.d = d;
    row.trial = 0;
    row.extra["mu"] = format_double(report.mu);
    rows.push_back(std::move(row));
  }

  {
    LfgGenerator gen(spec.keys.lfg_key);
    std::vector<std::uint16_t> seeds(static_cast<std::size_t>(m));
    for (auto& s : seeds) {
      s = gen.next_nonzero();
    }
    const SensingMatrix phi = build_binary_matrix(seeds, kDefaultFeedbackMask, n);
    const CoherenceReport report = mutual_coherence(phi, psi);
    ResultRow row = base_row(spec, SchemeTag::l_encrust);
    row.scheme = "binary";
    row.d = 0;
    row.extra["mu"] = format_double(report.mu);
    rows.push_back(std::move(row));
  }

  {
    SensingMatrix phi;
    phi.m = gaussian_matrix(m, n, spec.seed);
    phi.kind = MatrixKind::product;
    const CoherenceReport report = mutual_coherence(phi, psi);
    ResultRow row = base_row(spec, SchemeTag::l_encrust);
    row.scheme = "gaussian";
    row.d = 0;
    row.extra["mu"] = format_double(report.mu);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> run_quantization_sweep(
    const ExperimentSpec& spec, const std::vector<EcgRecord>& records) {
  std::vector<SchemeTag> schemes;
  for (const SchemeTag t : spec.scheme_set) {
    if (t != SchemeTag::soa) {
      schemes.push_back(t);
    }
  }
  if (schemes.empty()) {
    schemes = {SchemeTag::encrust, SchemeTag::l_encrust};
  }
  const std::vector<BlockRef> refs = pooled_blocks(records, spec.params.n);
  const int blocks = std::min<int>(spec.trials, static_cast<int>(refs.size()));

  std::vector<int> m_grid;
  for (int m = 96; m <= 146; m += 10) {
    m_grid.push_back(m);
  }

  struct Job {
    SchemeTag scheme;
    int m;
    bool quantized;
    int trial;
  };
  std::vector<Job> jobs;
  for (const SchemeTag scheme : schemes) {
    for (const int m : m_grid) {
      for (const bool quantized : {false, true}) {
        for (int trial = 0; trial < blocks; ++trial) {
          jobs.push_back({scheme, m, quantized, trial});
        }
      }
    }
  }

  // One codec per (scheme, m); decode is const so sharing across the
  // worker threads is fine.
  std::map<std::pair<int, int>, std::unique_ptr<Codec>> codecs;
  for (const SchemeTag scheme : schemes) {
    for (const int m : m_grid) {
      CodecParams params = spec.params;
      params.m = m;
      params.scheme =
          scheme == SchemeTag::encrust ? Scheme::encrust : Scheme::l_encrust;
      codecs[{static_cast<int>(scheme), m}] =
          std::make_unique<Codec>(params, spec.keys);
    }
  }

  std::vector<ResultRow> rows(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), spec.threads, [&](int idx) {
    const Job& job = jobs[static_cast<std::size_t>(idx)];
    const Codec& codec = *codecs.at({static_cast<int>(job.scheme), job.m});
    const BlockRef ref = refs[static_cast<std::size_t>(job.trial)];
    const Eigen::VectorXd x =
        record_block(records[static_cast<std::size_t>(ref.record)], ref.block,
                     spec.params.n);
    const auto block_id = static_cast<std::uint64_t>(job.trial);
    double p = 0.0;
    if (job.quantized) {
      const Eigen::VectorXd y = codec.measure(x, block_id);
      auto [q, scale] = quantize16(y);
      MeasurementBlock block{std::move(q), scale, block_id};
      p = prd(x, codec.decode(block).x_hat);
    } else {
      const Eigen::VectorXd y = codec.measure(x, block_id);
      p = prd(x, codec.decode_real(y, block_id).x_hat);
    }
    ResultRow row = base_row(spec, job.scheme);
    row.m = job.m;
    row.trial = job.trial;
    row.prd = p;
    row.extra["quantized"] = job.quantized ? "1" : "0";
    row.extra["record"] =
        records[static_cast<std::size_t>(ref.record)].record_id;
    rows[static_cast<std::size_t>(idx)] = std::move(row);
  });
  return rows;
}

namespace {

std::vector<ResultRow> run_channel_experiment(
    const ExperimentSpec& spec, const std::vector<EcgRecord>& records,
    bool efficiency_summary) {
  const std::vector<BlockRef> refs = pooled_blocks(records, spec.params.n);
  if (spec.snr_grid.empty()) {
    throw std::runtime_error("channel experiment needs an snr_grid");
  }

  struct Job {
    SchemeTag scheme;
    int snr_index;
    int trial;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < spec.scheme_set.size(); ++s) {
    for (std::size_t g = 0; g < spec.snr_grid.size(); ++g) {
      for (int trial = 0; trial < spec.trials; ++trial) {
        jobs.push_back({spec.scheme_set[s], static_cast<int>(g), trial});
      }
    }
  }

  std::map<int, std::unique_ptr<Codec>> codecs;
  for (const SchemeTag tag : spec.scheme_set) {
    if (tag == SchemeTag::soa) {
      continue;
    }
    CodecParams params = spec.params;
    params.scheme =
        tag == SchemeTag::encrust ? Scheme::encrust : Scheme::l_encrust;
    codecs[static_cast<int>(tag)] = std::make_unique<Codec>(params, spec.keys);
  }
  const HaarPlan plan;
  const std::array<std::uint8_t, 16> soa_key = soa_key_from(spec.keys);

  std::vector<ResultRow> rows(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), spec.threads, [&](int idx) {
    const Job& job = jobs[static_cast<std::size_t>(idx)];
    const double snr = spec.snr_grid[static_cast<std::size_t>(job.snr_index)];
    const BlockRef ref =
        refs[static_cast<std::size_t>(job.trial) % refs.size()];
    const Eigen::VectorXd x = record_block(
        records[static_cast<std::size_t>(ref.record)], ref.block,
        spec.params.n);

    ChannelConfig channel = spec.channel;
    channel.snr_db = snr;
    channel.rng_seed =
        mix_seed(spec.seed, static_cast<std::uint64_t>(job.scheme),
                 static_cast<std::uint64_t>(job.snr_index),
                 static_cast<std::uint64_t>(job.trial));

    PipelineOutcome outcome;
    if (job.scheme == SchemeTag::soa) {
      outcome = run_soa_trial(plan, soa_key, x,
                              static_cast<std::uint64_t>(job.trial), channel);
    } else {
      outcome = run_cs_trial(*codecs.at(static_cast<int>(job.scheme)), x,
                             static_cast<std::uint64_t>(job.trial), channel);
    }

    ResultRow row = base_row(spec, job.scheme);
    row.snr_db = snr;
    row.trial = job.trial;
    row.prd = outcome.prd_value;
    row.extra["success"] = outcome.success ? "1" : "0";
    row.extra["payload_bit_errors"] = std::to_string(outcome.payload_bit_errors);
    row.extra["retransmissions"] = std::to_string(outcome.retransmissions);
    row.extra["tx_failed"] = outcome.tx_failed ? "1" : "0";
    row.extra["record"] =
        records[static_cast<std::size_t>(ref.record)].record_id;
    rows[static_cast<std::size_t>(idx)] = std::move(row);
  });

  if (efficiency_summary) {
    for (const SchemeTag tag : spec.scheme_set) {
      for (const double snr : spec.snr_grid) {
        int successes = 0;
        int count = 0;
        double prd_sum = 0.0;
        for (const ResultRow& row : rows) {
          if (row.scheme == to_string(tag) && row.snr_db == snr) {
            ++count;
            prd_sum += row.prd;
            successes += row.extra.at("success") == "1";
          }
        }
        ResultRow row = base_row(spec, tag);
        row.snr_db = snr;
        row.trial = count;
        row.prd = count ? prd_sum / count : 0.0;
        row.tx_efficiency_pct = count ? 100.0 * successes / count : 0.0;
        row.extra["summary"] = "1";
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_prd_vs_snr(const ExperimentSpec& spec,
                                      const std::vector<EcgRecord>& records) {
  return run_channel_experiment(spec, records, false);
}

std::vector<ResultRow> run_tx_efficiency(const ExperimentSpec& spec,
                                         const std::vector<EcgRecord>& records) {
  return run_channel_experiment(spec, records, true);
}

AttackKpaResult attack_known_plaintext(
    const Codec& codec, const std::vector<Eigen::VectorXd>& plaintexts,
    double mask_gain) {
  const int n = codec.params().n;
  if (plaintexts.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("attack_known_plaintext: need n plaintexts");
  }
  const Eigen::MatrixXd h = codec.effective_matrix();
  Eigen::MatrixXd x(n, n);
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) {
    x.row(i) = plaintexts[static_cast<std::size_t>(i)].transpose();
    const double clean = h.row(0) * plaintexts[static_cast<std::size_t>(i)];
    const double mask =
        mask_gain != 0.0
            ? mask_gain * codec.params().c *
                  codec.mask_vector(static_cast<std::uint64_t>(i))(0)
            : 0.0;
    d(i) = clean + mask;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(x);
  if (!lu.isInvertible()) {
    throw std::runtime_error("attack_known_plaintext: singular plaintext matrix");
  }
  AttackKpaResult result;
  result.row_estimate = lu.solve(d);
  result.row_truth = h.row(0).transpose();
  result.relative_error =
      (result.row_estimate - result.row_truth).norm() / result.row_truth.norm();
  return result;
}

AttackKnownMatricesResult attack_known_matrices(
    const Codec& codec, const std::vector<Eigen::VectorXd>& blocks,
    std::uint64_t rng_seed) {
  AttackKnownMatricesResult result;
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<int> word(0, 65535);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Eigen::VectorXd& x = blocks[i];
    const auto block_id = static_cast<std::uint64_t>(i);
    const Eigen::VectorXd y = codec.measure(x, block_id);
    auto [q, scale] = quantize16(y);
    MeasurementBlock block{std::move(q), scale, block_id};

    // Adversary guess: a fresh mask drawn from the same uniform family.
    Eigen::VectorXd guess(codec.params().l);
    for (int k = 0; k < codec.params().l; ++k) {
      guess(k) = (word(rng) - 32768.0) * codec.params().mask_scale;
    }
    result.adversary_prd.push_back(
        prd(x, codec.decode_with_mask(block, guess).x_hat));
    result.control_prd.push_back(prd(x, codec.decode(block).x_hat));
  }
  return result;
}

std::vector<ResultRow> run_attack_kpa(const ExperimentSpec& spec) {
  CodecParams params = spec.params;
  params.scheme = Scheme::l_encrust;
  const Codec codec(params, spec.keys);

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> sample(0, 2047);
  std::vector<Eigen::VectorXd> plaintexts;
  plaintexts.reserve(static_cast<std::size_t>(params.n));
  for (int i = 0; i < params.n; ++i) {
    Eigen::VectorXd x(params.n);
    for (int j = 0; j < params.n; ++j) {
      x(j) = sample(rng);
    }
    plaintexts.push_back(std::move(x));
  }

  std::vector<ResultRow> rows;
  for (const double gain : {0.0, 0.25, 0.5, 1.0}) {
    const AttackKpaResult result =
        attack_known_plaintext(codec, plaintexts, gain);
    ResultRow row = base_row(spec, SchemeTag::l_encrust);
    row.experiment = to_string(Experiment::attack_kpa);
    row.trial = static_cast<long>(gain * 100);
    row.prd = 100.0 * result.relative_error;
    row.extra["mask_gain"] = format_double(gain);
    row.extra["relative_error"] = format_double(result.relative_error);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ResultRow> run_attack_known_matrices(
    const ExperimentSpec& spec, const std::vector<EcgRecord>& records) {
  CodecParams params = spec.params;
  params.scheme = Scheme::l_encrust;
  const Codec codec(params, spec.keys);

  const std::vector<BlockRef> refs = pooled_blocks(records, params.n);
  const int count = std::min<int>(spec.trials, static_cast<int>(refs.size()));
  std::vector<Eigen::VectorXd> blocks;
  blocks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const BlockRef ref = refs[static_cast<std::size_t>(i)];
    blocks.push_back(record_block(records[static_cast<std::size_t>(ref.record)],
                                  ref.block, params.n));
  }

  const AttackKnownMatricesResult result =
      attack_known_matrices(codec, blocks, spec.seed);
  std::vector<ResultRow> rows;
  for (int i = 0; i < count; ++i) {
    ResultRow adversary = base_row(spec, SchemeTag::l_encrust);
    adversary.trial = i;
    adversary.prd = result.adversary_prd[static_cast<std::size_t>(i)];
    adversary.extra["arm"] = "adversary";
    rows.push_back(std::move(adversary));

    ResultRow control = base_row(spec, SchemeTag::l_encrust);
    control.trial = i;
    control.prd = result.control_prd[static_cast<std::size_t>(i)];
    control.extra["arm"] = "control";
    rows.push_back(std::move(control));
  }
  return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  switch (spec.experiment) {
    case Experiment::coherence_sweep:
      return run_coherence_sweep(spec);
    case Experiment::quantization_sweep:
      return run_quantization_sweep(spec, resolve_records(spec));
    case Experiment::prd_vs_snr:
      return run_prd_vs_snr(spec, resolve_records(spec));
    case Experiment::tx_efficiency:
      return run_tx_efficiency(spec, resolve_records(spec));
    case Experiment::attack_kpa:
      return run_attack_kpa(spec);
    case Experiment::attack_known_matrices:
      return run_attack_known_matrices(spec, resolve_records(spec));
  }
  throw std::runtime_error("unknown experiment");
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string quoted = "\"";
  for (const char c : field) {
    if (c == '"') {
      quoted += '"';
    }
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string serialize_extra(const std::map<std::string, std::string>& extra) {
  std::string out;
  for (const auto& [key, value] : extra) {
    if (!out.empty()) {
      out += ';';
    }
    out += key + "=" + value;
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

void emit_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  std::vector<const ResultRow*> sorted;
  sorted.reserve(rows.size());
  for (const ResultRow& row : rows) {
    sorted.push_back(&row);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const ResultRow* a, const ResultRow* b) {
              const auto key = [](const ResultRow& r) {
                return std::tie(r.experiment, r.scheme, r.m, r.l, r.d, r.snr_db,
                                r.trial);
              };
              if (key(*a) != key(*b)) {
                return key(*a) < key(*b);
              }
              return serialize_extra(a->extra) < serialize_extra(b->extra);
            });
  out << "experiment,scheme,M,L,d,snr_db,trial,prd,tx_efficiency_pct,extra\n";
  for (const ResultRow* row : sorted) {
    out << csv_escape(row->experiment) << ',' << csv_escape(row->scheme) << ','
        << row->m << ',' << row->l << ',' << row->d << ','
        << format_double(row->snr_db) << ',' << row->trial << ','
        << format_double(row->prd) << ',';
    if (row->tx_efficiency_pct >= 0.0) {
      out << format_double(row->tx_efficiency_pct);
    }
    out << ',' << csv_escape(serialize_extra(row->extra)) << '\n';
  }
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("emit_csv: cannot open " + path);
  }
  emit_csv(rows, out);
}

std::vector<ResultRow> parse_csv(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(in, line)) {
    return rows;
  }
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != 10) {
      throw std::runtime_error("parse_csv: wrong field count");
    }
    ResultRow row;
    row.experiment = fields[0];
    row.scheme = fields[1];
    row.m = std::stoi(fields[2]);
    row.l = std::stoi(fields[3]);
    row.d = std::stoi(fields[4]);
    row.snr_db = std::stod(fields[5]);
    row.trial = std::stol(fields[6]);
    row.prd = std::stod(fields[7]);
    row.tx_efficiency_pct = fields[8].empty() ? -1.0 : std::stod(fields[8]);
    if (!fields[9].empty()) {
      std::istringstream extras(fields[9]);
      std::string kv;
      while (std::getline(extras, kv, ';')) {
        const std::size_t eq = kv.find('=');
        if (eq != std::string::npos) {
          row.extra[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace encrust
