// Command line surface for the codec library: block encode/decode against
// the binary wire format, channel simulation, experiment sweeps, attack
// reproductions, and matrix dumps.
//
// Exit codes: 0 success, 2 usage, 3 I/O failure, 4 domain failure.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "encrust/bench.hpp"
#include "encrust/codec.hpp"
#include "encrust/matgen.hpp"
#include "encrust/phy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDomain = 4;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<long> read_sample_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  std::vector<long> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    try {
      samples.push_back(std::stol(line));
    } catch (const std::exception&) {
      throw IoError("malformed sample line in " + path);
    }
  }
  if (samples.empty()) {
    throw IoError("no samples in " + path);
  }
  return samples;
}

encrust::KeySchedule keys_from_options(const std::string& key_hex,
                                       const std::string& key_file,
                                       const std::string& b_iv_hex,
                                       const std::string& a_iv_hex) {
  std::string hex = key_hex;
  if (!key_file.empty()) {
    std::ifstream in(key_file);
    if (!in) {
      throw IoError("cannot open key file " + key_file);
    }
    in >> hex;
  }
  encrust::KeySchedule keys = hex.empty()
                                  ? encrust::default_key_schedule()
                                  : encrust::key_schedule_from_hex(hex);
  if (!b_iv_hex.empty()) {
    keys.b_iv = static_cast<std::uint16_t>(std::stoul(b_iv_hex, nullptr, 16));
  }
  if (!a_iv_hex.empty()) {
    keys.a_iv = static_cast<std::uint16_t>(std::stoul(a_iv_hex, nullptr, 16));
  }
  return keys;
}

encrust::Scheme scheme_from_name(const std::string& name) {
  if (name == "encrust") {
    return encrust::Scheme::encrust;
  }
  if (name == "l-encrust" || name == "l_encrust") {
    return encrust::Scheme::l_encrust;
  }
  throw CLI::ValidationError("--scheme", "unknown scheme " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ENCRUST / L-ENCRUST codec and benchmark tool"};
  app.require_subcommand(1);

  // --- encode ---
  auto* encode = app.add_subcommand("encode", "encode sample blocks");
  std::string enc_scheme = "l-encrust";
  std::string enc_in, enc_out, enc_key, enc_key_file, enc_biv, enc_aiv;
  encrust::CodecParams enc_params;
  encode->add_option("--scheme", enc_scheme, "encrust or l-encrust");
  encode->add_option("--in", enc_in, "input samples, one integer per line")
      ->required();
  encode->add_option("--out", enc_out, "output wire file")->required();
  encode->add_option("--key", enc_key, "48 hex chars of generator key");
  encode->add_option("--key-file", enc_key_file, "file holding the hex key");
  encode->add_option("--b-iv", enc_biv, "compression matrix iv (hex)");
  encode->add_option("--a-iv", enc_aiv, "error matrix iv (hex)");
  encode->add_option("--N", enc_params.n, "block length");
  encode->add_option("--M", enc_params.m, "compressed length");
  encode->add_option("--L", enc_params.l, "measurement length");
  encode->add_option("--d", enc_params.d, "sparse row weight");

  // --- decode ---
  auto* decode_cmd = app.add_subcommand("decode", "decode a wire file");
  std::string dec_scheme = "l-encrust";
  std::string dec_in, dec_out, dec_key, dec_key_file, dec_biv, dec_aiv,
      dec_reference;
  encrust::CodecParams dec_params;
  decode_cmd->add_option("--scheme", dec_scheme, "encrust or l-encrust");
  decode_cmd->add_option("--in", dec_in, "input wire file")->required();
  decode_cmd->add_option("--out", dec_out, "output samples file")->required();
  decode_cmd->add_option("--key", dec_key, "48 hex chars of generator key");
  decode_cmd->add_option("--key-file", dec_key_file, "file holding the hex key");
  decode_cmd->add_option("--b-iv", dec_biv, "compression matrix iv (hex)");
  decode_cmd->add_option("--a-iv", dec_aiv, "error matrix iv (hex)");
  decode_cmd->add_option("--N", dec_params.n, "block length");
  decode_cmd->add_option("--M", dec_params.m, "compressed length");
  decode_cmd->add_option("--L", dec_params.l, "measurement length");
  decode_cmd->add_option("--d", dec_params.d, "sparse row weight");
  decode_cmd->add_option("--reference", dec_reference,
                         "reference samples; prints PRD when given");

  // --- simulate ---
  auto* simulate = app.add_subcommand("simulate",
                                      "pass a wire file through the channel");
  std::string sim_in, sim_out;
  double sim_snr = 0.0;
  std::uint64_t sim_seed = 1;
  encrust::ChannelConfig sim_channel;
  simulate->add_option("--in", sim_in, "input wire file")->required();
  simulate->add_option("--out", sim_out, "output wire file")->required();
  simulate->add_option("--snr", sim_snr, "channel SNR in dB")->required();
  simulate->add_option("--seed", sim_seed, "channel noise seed");
  simulate->add_option("--sf", sim_channel.spreading_factor, "spreading factor");
  simulate->add_option("--max-retx", sim_channel.max_retransmissions,
                       "retransmission cap");
  simulate->add_option("--gain-db", sim_channel.processing_gain_db,
                       "despread processing gain in dB");

  // --- bench ---
  auto* bench = app.add_subcommand("bench", "run an experiment sweep");
  std::string bench_experiment, bench_config, bench_csv;
  std::optional<int> bench_trials;
  std::optional<std::uint64_t> bench_seed;
  bench->add_option("--experiment", bench_experiment,
                    "overrides the experiment tag from the config");
  bench->add_option("--config", bench_config, "key=value experiment config");
  bench->add_option("--out-csv", bench_csv, "CSV output path")->required();
  bench->add_option("--trials", bench_trials, "override trial count");
  bench->add_option("--seed", bench_seed, "override sweep seed");

  // --- attack ---
  auto* attack = app.add_subcommand("attack", "run a security experiment");
  std::string attack_which = "kpa";
  std::string attack_config, attack_csv;
  attack->add_option("--which", attack_which, "kpa or known-matrices");
  attack->add_option("--config", attack_config, "key=value experiment config");
  attack->add_option("--out-csv", attack_csv, "CSV output path")->required();

  // --- matrix-dump ---
  auto* dump = app.add_subcommand("matrix-dump", "dump a generated matrix");
  std::string dump_kind = "sparse", dump_out;
  std::string dump_iv = "ffff", dump_fp = "6801";
  int dump_rows = 96, dump_cols = 256, dump_d = 15, dump_shift = 8;
  std::string dump_lsb = "00ff";
  dump->add_option("--kind", dump_kind, "sparse or binary");
  dump->add_option("--iv", dump_iv, "initialization vector (hex)");
  dump->add_option("--fp", dump_fp, "feedback polynomial mask (hex)");
  dump->add_option("--rows", dump_rows, "row count");
  dump->add_option("--cols", dump_cols, "column count");
  dump->add_option("--d", dump_d, "row weight (sparse kind)");
  dump->add_option("--shift-bits", dump_shift, "index shift");
  dump->add_option("--lsb-mask", dump_lsb, "index mask (hex)");
  dump->add_option("--out", dump_out, "output path; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*encode) {
      enc_params.scheme = scheme_from_name(enc_scheme);
      const encrust::KeySchedule keys =
          keys_from_options(enc_key, enc_key_file, enc_biv, enc_aiv);
      const std::vector<long> samples = read_sample_file(enc_in);
      if (samples.size() % static_cast<std::size_t>(enc_params.n) != 0) {
        throw IoError("sample count is not a multiple of N");
      }
      encrust::Codec codec(enc_params, keys);
      std::ofstream out(enc_out, std::ios::binary);
      if (!out) {
        throw IoError("cannot open " + enc_out);
      }
      const std::size_t blocks =
          samples.size() / static_cast<std::size_t>(enc_params.n);
      for (std::size_t b = 0; b < blocks; ++b) {
        Eigen::VectorXd x(enc_params.n);
        for (int i = 0; i < enc_params.n; ++i) {
          x(i) = static_cast<double>(
              samples[b * static_cast<std::size_t>(enc_params.n) +
                      static_cast<std::size_t>(i)]);
        }
        encrust::write_block(out, codec.encode(x));
      }
      std::cout << "encoded " << blocks << " block(s) to " << enc_out << "\n";
      return kExitOk;
    }

    if (*decode_cmd) {
      dec_params.scheme = scheme_from_name(dec_scheme);
      const encrust::KeySchedule keys =
          keys_from_options(dec_key, dec_key_file, dec_biv, dec_aiv);
      std::ifstream in(dec_in, std::ios::binary);
      if (!in) {
        throw IoError("cannot open " + dec_in);
      }
      std::vector<encrust::MeasurementBlock> blocks;
      try {
        blocks = encrust::read_blocks(in);
      } catch (const std::exception& e) {
        throw IoError(e.what());
      }
      if (blocks.empty()) {
        throw IoError("no blocks in " + dec_in);
      }
      encrust::Codec codec(dec_params, keys);
      std::ofstream out(dec_out);
      if (!out) {
        throw IoError("cannot open " + dec_out);
      }
      Eigen::VectorXd all(static_cast<Eigen::Index>(blocks.size()) *
                          dec_params.n);
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        const encrust::DecodedBlock decoded = codec.decode(blocks[b]);
        all.segment(static_cast<Eigen::Index>(b) * dec_params.n, dec_params.n) =
            decoded.x_hat;
        for (int i = 0; i < dec_params.n; ++i) {
          out << static_cast<long>(std::llround(decoded.x_hat(i))) << '\n';
        }
      }
      if (!dec_reference.empty()) {
        const std::vector<long> ref = read_sample_file(dec_reference);
        if (ref.size() != static_cast<std::size_t>(all.size())) {
          throw IoError("reference length differs from decoded length");
        }
        Eigen::VectorXd x(all.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
          x(static_cast<Eigen::Index>(i)) = static_cast<double>(ref[i]);
        }
        std::printf("PRD %.6f\n", encrust::prd(x, all));
      }
      std::cout << "decoded " << blocks.size() << " block(s) to " << dec_out
                << "\n";
      return kExitOk;
    }

    if (*simulate) {
      std::ifstream in(sim_in, std::ios::binary);
      if (!in) {
        throw IoError("cannot open " + sim_in);
      }
      std::vector<encrust::MeasurementBlock> blocks;
      try {
        blocks = encrust::read_blocks(in);
      } catch (const std::exception& e) {
        throw IoError(e.what());
      }
      sim_channel.snr_db = sim_snr;
      std::ofstream out(sim_out, std::ios::binary);
      if (!out) {
        throw IoError("cannot open " + sim_out);
      }
      int failed = 0;
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        encrust::ChannelConfig cfg = sim_channel;
        cfg.rng_seed = sim_seed + b;
        const encrust::TransmissionReport report =
            encrust::transmit(encrust::block_payload_bits(blocks[b]), cfg);
        std::printf(
            "block %llu: frames=%d retransmissions=%d header_failures=%d "
            "payload_bit_errors=%d%s\n",
            static_cast<unsigned long long>(blocks[b].block_id),
            report.frames_sent, report.retransmissions, report.header_failures,
            report.payload_bit_errors, report.failed ? " FAILED" : "");
        if (report.failed) {
          ++failed;
          continue;
        }
        encrust::MeasurementBlock received = blocks[b];
        received.q = encrust::payload_bits_to_samples(report.delivered_bits);
        encrust::write_block(out, received);
      }
      if (failed) {
        std::cout << failed << " block(s) failed transmission\n";
      }
      return kExitOk;
    }

    if (*bench || *attack) {
      encrust::ExperimentSpec spec;
      const std::string config_path = *bench ? bench_config : attack_config;
      if (!config_path.empty()) {
        spec = encrust::load_experiment_spec(config_path);
      } else {
        spec.keys = encrust::default_key_schedule();
      }
      if (*bench) {
        if (!bench_experiment.empty()) {
          std::istringstream patch("experiment=" + bench_experiment);
          encrust::ExperimentSpec override_spec =
              encrust::parse_experiment_spec(patch);
          spec.experiment = override_spec.experiment;
        }
        if (bench_trials) {
          spec.trials = *bench_trials;
        }
        if (bench_seed) {
          spec.seed = *bench_seed;
        }
      } else {
        if (attack_which == "kpa") {
          spec.experiment = encrust::Experiment::attack_kpa;
        } else if (attack_which == "known-matrices") {
          spec.experiment = encrust::Experiment::attack_known_matrices;
        } else {
          throw CLI::ValidationError("--which", "unknown attack " + attack_which);
        }
      }
      const std::vector<encrust::ResultRow> rows = run_experiment(spec);
      encrust::emit_csv(rows, *bench ? bench_csv : attack_csv);
      std::cout << rows.size() << " row(s) written\n";
      return kExitOk;
    }

    if (*dump) {
      const auto iv =
          static_cast<std::uint16_t>(std::stoul(dump_iv, nullptr, 16));
      const auto fp =
          static_cast<std::uint16_t>(std::stoul(dump_fp, nullptr, 16));
      encrust::SensingMatrix matrix;
      if (dump_kind == "sparse") {
        const auto lsb =
            static_cast<std::uint16_t>(std::stoul(dump_lsb, nullptr, 16));
        matrix = encrust::build_sparse_matrix(iv, fp, dump_shift, lsb, dump_d,
                                              dump_rows, dump_cols);
      } else if (dump_kind == "binary") {
        matrix = encrust::build_binary_matrix(iv, fp, dump_rows, dump_cols);
      } else {
        throw CLI::ValidationError("--kind", "unknown kind " + dump_kind);
      }
      if (dump_out.empty()) {
        encrust::dump_matrix(matrix, std::cout);
      } else {
        std::ofstream out(dump_out);
        if (!out) {
          throw IoError("cannot open " + dump_out);
        }
        encrust::dump_matrix(matrix, out);
      }
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
