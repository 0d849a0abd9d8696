#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hire/approx.hpp"
#include "hire/distributed.hpp"
#include "hire/ffn.hpp"
#include "hire/gather_bench.hpp"
#include "hire/hire.hpp"
#include "hire/instance.hpp"
#include "hire/io.hpp"
#include "hire/linalg.hpp"
#include "hire/metrics.hpp"
#include "hire/rng.hpp"

namespace hire {

inline constexpr const char kVersion[] = "0.1.0";

// Exit codes of the experiment runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitIoError = 2;
inline constexpr int kExitNumericError = 3;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error("config error: field '" + field + "': " + what),
        field_name(field) {}
  std::string field_name;
};

// Flat config; JSON fields carry exactly these names. Flags override the
// file. Modes:
//   softmax-topk          renormalized top-k softmax distribution
//   hire-topk             plain approximate-then-exact top-k
//   ffn                   dense / top-k / group-sparse / common-path outputs
//   distributed           DA-TOP-k over s shards
//   bench-gather          grouped-gather memory microbenchmark, g sweep
//   kprime-sweep          recall vs k' over random instances
//   projection-ablation   SVD-fit vs random projection recall
//   overlap               dynamic-overlap union statistics
//   cost                  parameter-bytes cost model
//   gen-instance          write HIRM/HIRV instance files
struct ExperimentConfig {
  std::string mode;
  std::size_t d = 64;
  std::size_t l = 1024;
  std::size_t m = 512;
  std::size_t g = 8;
  std::size_t m1 = 0;
  std::size_t m2 = 0;
  std::size_t k = 32;
  std::vector<std::size_t> k_prime = {64};
  std::size_t rank = 8;
  std::string scorer = "quantized";
  std::size_t shards = 2;
  std::size_t n_samples = 8;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::string instance = "random-gaussian";
  std::string matrix_file;
  std::string vector_file;
  std::string ffn_file;
  std::string out;
  std::string phi;  // empty = per-mode default: relu for ffn/overlap, identity otherwise
  double rho = 0.9;
  std::size_t n_groups = 2048;
  double fraction_selected = 0.25;
  std::size_t repeats = 9;
  std::vector<std::size_t> g_sweep = {1, 2, 4, 8, 16, 32, 64};
};

namespace detail {

inline std::size_t as_count(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw ConfigError(key, "expected a non-negative integer");
  const std::int64_t x = v.get<std::int64_t>();
  if (x < 0) throw ConfigError(key, "expected a non-negative integer");
  return static_cast<std::size_t>(x);
}

inline std::vector<std::size_t> as_count_list(const nlohmann::json& v,
                                              const std::string& key) {
  std::vector<std::size_t> out;
  if (v.is_array()) {
    if (v.empty()) throw ConfigError(key, "sweep list must be non-empty");
    for (const auto& e : v) out.push_back(as_count(e, key));
  } else {
    out.push_back(as_count(v, key));
  }
  return out;
}

inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string fmt_count(std::uint64_t v) { return std::to_string(v); }

}  // namespace detail

namespace detail {

inline void parse_fields(const nlohmann::json& j, ExperimentConfig& cfg,
                         std::string& current_key) {
  for (const auto& [key, value] : j.items()) {
    current_key = key;
    if (key == "mode") cfg.mode = value.get<std::string>();
    else if (key == "d") cfg.d = as_count(value, key);
    else if (key == "l") cfg.l = as_count(value, key);
    else if (key == "m") cfg.m = as_count(value, key);
    else if (key == "g") cfg.g = as_count(value, key);
    else if (key == "m1") cfg.m1 = as_count(value, key);
    else if (key == "m2") cfg.m2 = as_count(value, key);
    else if (key == "k") cfg.k = as_count(value, key);
    else if (key == "k_prime") cfg.k_prime = as_count_list(value, key);
    else if (key == "rank") cfg.rank = as_count(value, key);
    else if (key == "scorer") cfg.scorer = value.get<std::string>();
    else if (key == "shards") cfg.shards = as_count(value, key);
    else if (key == "n_samples") cfg.n_samples = as_count(value, key);
    else if (key == "trials") cfg.trials = as_count(value, key);
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "instance") cfg.instance = value.get<std::string>();
    else if (key == "matrix_file") cfg.matrix_file = value.get<std::string>();
    else if (key == "vector_file") cfg.vector_file = value.get<std::string>();
    else if (key == "ffn_file") cfg.ffn_file = value.get<std::string>();
    else if (key == "out") cfg.out = value.get<std::string>();
    else if (key == "phi") cfg.phi = value.get<std::string>();
    else if (key == "rho") cfg.rho = value.get<double>();
    else if (key == "n_groups") cfg.n_groups = as_count(value, key);
    else if (key == "fraction_selected")
      cfg.fraction_selected = value.get<double>();
    else if (key == "repeats") cfg.repeats = as_count(value, key);
    else if (key == "g_sweep") cfg.g_sweep = as_count_list(value, key);
    else throw ConfigError(key, "unknown field");
  }
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  std::string current_key = "config";
  try {
    detail::parse_fields(j, cfg, current_key);
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(current_key, e.what());
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("io: cannot open config: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

inline Activation parse_phi(const std::string& name, Activation mode_default) {
  if (name.empty()) return mode_default;
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "squared-relu") return Activation::kSquaredRelu;
  throw ConfigError("phi", "expected identity | relu | squared-relu, got '" +
                               name + "'");
}

inline ApproxScorer build_scorer(const std::string& name,
                                 const ScoreMatrix& z, std::size_t rank,
                                 std::uint64_t seed) {
  if (name == "exact") return ApproxScorer::exact_copy(z);
  if (name == "quantized") return ApproxScorer::quantized(z);
  if (name == "low-rank")
    return ApproxScorer::low_rank(fit_low_rank_svd(z, rank));
  if (name == "low-rank-quantized")
    return ApproxScorer::low_rank_quantized(fit_low_rank_svd(z, rank));
  if (name == "random-low-rank")
    return ApproxScorer::low_rank(random_low_rank(z, rank, seed));
  throw ConfigError("scorer",
                    "expected exact | quantized | low-rank | "
                    "low-rank-quantized | random-low-rank, got '" +
                        name + "'");
}

namespace detail {

// Buffers the whole CSV and writes it on close, so a config error thrown
// mid-run leaves no partial artifact behind.
class CsvWriter {
 public:
  explicit CsvWriter(std::string path) : path_(std::move(path)) {}

  void manifest(const ExperimentConfig& cfg) {
    buf_ << "# mode=" << cfg.mode << " seed=" << cfg.seed << " d=" << cfg.d
         << " l=" << cfg.l << " m=" << cfg.m << " g=" << cfg.g
         << " k=" << cfg.k << " scorer=" << cfg.scorer
         << " version=" << kVersion << "\n";
  }

  void comment(const std::string& line) { buf_ << "# " << line << "\n"; }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) buf_ << ",";
      buf_ << fields[i];
    }
    buf_ << "\n";
  }

  void close() {
    std::ofstream os(path_, std::ios::binary);
    if (!os) throw IoError("io: cannot open for write: " + path_);
    os << buf_.str();
    os.flush();
    if (!os) throw IoError("io: write failed: " + path_);
  }

 private:
  std::string path_;
  std::ostringstream buf_;
};

struct InstancePair {
  ScoreMatrix z;
  std::vector<float> x;
};

inline InstancePair load_or_generate(const ExperimentConfig& cfg) {
  if (cfg.instance == "file") {
    if (cfg.matrix_file.empty())
      throw ConfigError("matrix_file", "required when instance=file");
    if (cfg.vector_file.empty())
      throw ConfigError("vector_file", "required when instance=file");
    InstancePair p{read_matrix_file(cfg.matrix_file),
                   read_vector_file(cfg.vector_file)};
    if (p.x.size() != p.z.rows())
      throw ConfigError("vector_file",
                        "vector dim " + std::to_string(p.x.size()) +
                            " does not match matrix rows " +
                            std::to_string(p.z.rows()));
    return p;
  }
  Spectrum spectrum;
  if (cfg.instance == "random-gaussian") spectrum = Spectrum::kFlat;
  else if (cfg.instance == "random-decaying") spectrum = Spectrum::kDecaying;
  else
    throw ConfigError("instance",
                      "expected random-gaussian | random-decaying | file, "
                      "got '" +
                          cfg.instance + "'");
  return {gen_instance(cfg.d, cfg.l, derive_seed(cfg.seed, 1), spectrum),
          gen_vector(cfg.d, derive_seed(cfg.seed, 2))};
}

inline void require(bool ok, const std::string& field,
                    const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace detail

// --- modes ---------------------------------------------------------------

namespace detail {

inline void run_hire_topk_mode(const ExperimentConfig& cfg, CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  const InstancePair inst = load_or_generate(cfg);
  const ApproxScorer a = build_scorer(cfg.scorer, inst.z, cfg.rank,
                                      derive_seed(cfg.seed, 3));
  const HireConfig hc{cfg.k, cfg.k_prime.front(),
                      parse_phi(cfg.phi, Activation::kIdentity)};
  const HireResult r = hire_topk(inst.x, inst.z, a, hc);
  csv.row({"pos", "index", "value"});
  for (std::size_t i = 0; i < r.topk.entries.size(); ++i)
    csv.row({fmt_count(i), fmt_count(r.topk.entries[i].index),
             fmt_real(r.topk.entries[i].value)});
}

inline void run_softmax_topk_mode(const ExperimentConfig& cfg,
                                  CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  require(cfg.phi.empty() || cfg.phi == "identity", "phi",
          "softmax-topk requires identity");
  const InstancePair inst = load_or_generate(cfg);
  const ApproxScorer a = build_scorer(cfg.scorer, inst.z, cfg.rank,
                                      derive_seed(cfg.seed, 3));
  const HireConfig hc{cfg.k, cfg.k_prime.front(), Activation::kIdentity};
  const SparseDistribution dist = softmax_topk(inst.z, inst.x, a, hc);
  csv.row({"pos", "index", "probability"});
  for (std::size_t i = 0; i < dist.entries.size(); ++i)
    csv.row({fmt_count(i), fmt_count(dist.entries[i].index),
             fmt_real(dist.entries[i].value)});
}

inline void run_distributed_mode(const ExperimentConfig& cfg,
                                 CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  require(cfg.shards >= 1, "shards", "must be >= 1");
  require(cfg.k % cfg.shards == 0, "k",
          "shards must divide k for DA-TOP-k");
  require(cfg.k_prime.front() % cfg.shards == 0, "k_prime",
          "shards must divide k_prime for DA-TOP-k");
  const InstancePair inst = load_or_generate(cfg);
  const ApproxScorer a = build_scorer(cfg.scorer, inst.z, cfg.rank,
                                      derive_seed(cfg.seed, 3));
  const ShardedScorer sh = shard(inst.z, a, cfg.shards);
  const HireConfig hc{cfg.k, cfg.k_prime.front(),
                      parse_phi(cfg.phi, Activation::kIdentity)};
  const DaTopkResult r = da_topk(sh, inst.x, hc);

  std::ostringstream comm;
  comm << "shards=" << cfg.shards << " bytes_gathered="
       << r.comm.bytes_gathered << " candidates_per_shard=";
  for (std::size_t i = 0; i < r.comm.candidates_per_shard.size(); ++i)
    comm << (i ? "|" : "") << r.comm.candidates_per_shard[i];
  csv.comment(comm.str());

  csv.row({"pos", "index", "value"});
  for (std::size_t i = 0; i < r.topk.entries.size(); ++i)
    csv.row({fmt_count(i), fmt_count(r.topk.entries[i].index),
             fmt_real(r.topk.entries[i].value)});
}

inline double rel_l2_err(const std::vector<float>& got,
                         const std::vector<float>& want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double dlt = static_cast<double>(got[i]) - want[i];
    num += dlt * dlt;
    den += static_cast<double>(want[i]) * want[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double l2_norm(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

inline void run_ffn_mode(const ExperimentConfig& cfg, CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  const Activation phi = parse_phi(cfg.phi, Activation::kRelu);
  GroupedFFN f;
  std::vector<float> x;
  if (cfg.instance == "file") {
    require(!cfg.ffn_file.empty(), "ffn_file", "required when instance=file");
    require(!cfg.vector_file.empty(), "vector_file",
            "required when instance=file");
    auto is = open_in(cfg.ffn_file);
    f = read_ffn(is, phi);
    x = read_vector_file(cfg.vector_file);
  } else {
    f.u = gen_instance(cfg.d, cfg.m, derive_seed(cfg.seed, 1),
                       Spectrum::kFlat);
    f.v = gen_instance(cfg.d, cfg.m, derive_seed(cfg.seed, 2),
                       Spectrum::kFlat);
    f.group_size = cfg.g;
    f.phi = phi;
    x = gen_vector(cfg.d, derive_seed(cfg.seed, 3));
  }
  validate(f);
  const std::size_t k_prime = cfg.k_prime.front();
  require(cfg.k >= 1 && cfg.k <= f.hidden(), "k", "must be in [1, m]");
  require(cfg.k % f.group_size == 0, "k", "g must divide k");
  require(k_prime % f.group_size == 0, "k_prime", "g must divide k_prime");
  require(cfg.k <= k_prime && k_prime <= f.hidden(), "k_prime",
          "need k <= k_prime <= m");

  const ApproxScorer a = build_scorer(cfg.scorer, f.u, cfg.rank,
                                      derive_seed(cfg.seed, 4));

  const std::vector<float> dense = ffn_dense(f, x);
  const std::vector<float> topk = ffn_topk(f, x, cfg.k);
  const GroupSparseResult gs = ffn_group_sparse(f, x, a, cfg.k, k_prime);

  csv.row({"variant", "output_l2", "rel_err_vs_dense"});
  csv.row({"dense", fmt_real(l2_norm(dense)), fmt_real(0.0)});
  csv.row({"topk", fmt_real(l2_norm(topk)),
           fmt_real(rel_l2_err(topk, dense))});
  csv.row({"group-sparse", fmt_real(l2_norm(gs.output)),
           fmt_real(rel_l2_err(gs.output, dense))});

  if (cfg.m1 > 0) {
    const std::size_t m2 = f.hidden() - cfg.m1;
    require(cfg.m2 == 0 || cfg.m2 == m2, "m2",
            "common path splits m, so m2 must equal m - m1");
    require(cfg.m1 < f.hidden(), "m1", "must be < m");
    require(m2 % f.group_size == 0 && m2 >= f.group_size, "m1",
            "m - m1 must be a positive multiple of g");
    require(cfg.k <= m2 && k_prime <= m2, "m1",
            "k and k_prime must fit the sparse part");
    CommonPathFFN cp;
    cp.dense_part = GroupedFFN{f.u.slice_cols(0, cfg.m1),
                               f.v.slice_cols(0, cfg.m1), 1, phi};
    cp.sparse_part = GroupedFFN{f.u.slice_cols(cfg.m1, m2),
                                f.v.slice_cols(cfg.m1, m2), f.group_size,
                                phi};
    const ApproxScorer a_sparse = a.slice_cols(cfg.m1, m2);
    const std::vector<float> cp_out =
        ffn_common_path(cp, x, a_sparse, cfg.k, k_prime);
    csv.row({"common-path", fmt_real(l2_norm(cp_out)),
             fmt_real(rel_l2_err(cp_out, dense))});
  }
}

inline void run_kprime_sweep_mode(const ExperimentConfig& cfg,
                                  CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  require(cfg.n_samples >= 1, "n_samples", "must be >= 1");
  const Activation phi = parse_phi(cfg.phi, Activation::kIdentity);

  csv.row({"k_prime", "recall", "intersection_k", "top1_agree"});
  std::vector<double> mean_recall(cfg.k_prime.size(), 0.0);
  std::vector<double> mean_inter(cfg.k_prime.size(), 0.0);
  std::vector<double> mean_top1(cfg.k_prime.size(), 0.0);

  for (std::size_t t = 0; t < cfg.n_samples; ++t) {
    const ScoreMatrix z = gen_instance(cfg.d, cfg.l,
                                       derive_seed(cfg.seed, 100 + t),
                                       Spectrum::kFlat);
    const std::vector<float> x =
        gen_vector(cfg.d, derive_seed(cfg.seed, 10000 + t));
    const ApproxScorer a = build_scorer(cfg.scorer, z, cfg.rank,
                                        derive_seed(cfg.seed, 20000 + t));
    const TopKSet exact = exact_topk(z, x, cfg.k, phi);
    for (std::size_t s = 0; s < cfg.k_prime.size(); ++s) {
      const HireConfig hc{cfg.k, cfg.k_prime[s], phi};
      const HireResult r = hire_topk(x, z, a, hc);
      const RecallReport rep = recall(r.candidates, exact);
      mean_recall[s] += rep.recall;
      mean_inter[s] += static_cast<double>(rep.intersection_k);
      mean_top1[s] += rep.top1_agree ? 1.0 : 0.0;
    }
  }
  const double n = static_cast<double>(cfg.n_samples);
  for (std::size_t s = 0; s < cfg.k_prime.size(); ++s)
    csv.row({fmt_count(cfg.k_prime[s]), fmt_real(mean_recall[s] / n),
             fmt_real(mean_inter[s] / n), fmt_real(mean_top1[s] / n)});
}

inline void run_projection_ablation_mode(const ExperimentConfig& cfg,
                                         CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  require(cfg.n_samples >= 1, "n_samples", "must be >= 1");
  require(cfg.rank >= 1 && cfg.rank <= std::min(cfg.d, cfg.l), "rank",
          "must be in [1, min(d,l)]");
  const Activation phi = parse_phi(cfg.phi, Activation::kIdentity);
  const std::size_t k_prime = cfg.k_prime.front();

  csv.row({"instance", "recall_svd", "recall_random"});
  for (std::size_t t = 0; t < cfg.n_samples; ++t) {
    const ScoreMatrix z = gen_instance(cfg.d, cfg.l,
                                       derive_seed(cfg.seed, 100 + t),
                                       Spectrum::kDecaying);
    const std::vector<float> x =
        gen_vector(cfg.d, derive_seed(cfg.seed, 10000 + t));
    const TopKSet exact = exact_topk(z, x, cfg.k, phi);
    const HireConfig hc{cfg.k, k_prime, phi};

    const ApproxScorer svd =
        ApproxScorer::low_rank(fit_low_rank_svd(z, cfg.rank));
    const ApproxScorer rnd = ApproxScorer::low_rank(
        random_low_rank(z, cfg.rank, derive_seed(cfg.seed, 20000 + t)));
    const RecallReport rep_svd = recall(hire_topk(x, z, svd, hc).candidates,
                                        exact);
    const RecallReport rep_rnd = recall(hire_topk(x, z, rnd, hc).candidates,
                                        exact);
    csv.row({fmt_count(t), fmt_real(rep_svd.recall),
             fmt_real(rep_rnd.recall)});
  }
}

inline void run_overlap_mode(const ExperimentConfig& cfg, CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  require(cfg.n_samples >= 1, "n_samples", "must be >= 1");
  require(cfg.trials >= 1, "trials", "must be >= 1");
  require(cfg.rho >= 0.0 && cfg.rho <= 1.0, "rho", "must be in [0, 1]");
  const Activation phi = parse_phi(cfg.phi, Activation::kRelu);

  GroupedFFN f;
  f.u = gen_instance(cfg.d, cfg.m, derive_seed(cfg.seed, 1), Spectrum::kFlat);
  f.v = gen_instance(cfg.d, cfg.m, derive_seed(cfg.seed, 2), Spectrum::kFlat);
  f.group_size = cfg.g;
  f.phi = phi;
  validate(f);
  const std::size_t k_prime = cfg.k_prime.front();
  require(cfg.k % cfg.g == 0, "k", "g must divide k");
  require(k_prime % cfg.g == 0, "k_prime", "g must divide k_prime");
  require(cfg.k <= k_prime && k_prime <= cfg.m, "k_prime",
          "need k <= k_prime <= m");
  const ApproxScorer a = build_scorer(cfg.scorer, f.u, cfg.rank,
                                      derive_seed(cfg.seed, 4));

  const double noise = std::sqrt(std::max(0.0, 1.0 - cfg.rho * cfg.rho));
  csv.row({"trial", "union_groups", "overlap_ratio"});
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const std::vector<float> base =
        gen_vector(cfg.d, derive_seed(cfg.seed, 100 + t));
    std::vector<GroupIndexSet> sets;
    for (std::size_t u = 0; u < cfg.n_samples; ++u) {
      std::vector<float> x =
          gen_vector(cfg.d, derive_seed(cfg.seed, 10000 + t * 1024 + u));
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = static_cast<float>(cfg.rho * base[i] + noise * x[i]);
      sets.push_back(select_groups(f, x, a, cfg.k, k_prime));
    }
    const double ratio = overlap_ratio(sets, cfg.k / cfg.g);
    std::size_t union_size = 0;
    {
      GroupIndexSet merged;
      for (const auto& s : sets) {
        std::vector<std::uint32_t> next;
        std::set_union(merged.ids.begin(), merged.ids.end(), s.ids.begin(),
                       s.ids.end(), std::back_inserter(next));
        merged.ids = std::move(next);
      }
      union_size = merged.ids.size();
    }
    csv.row({fmt_count(t), fmt_count(union_size), fmt_real(ratio)});
  }
}

inline void run_bench_gather_mode(const ExperimentConfig& cfg,
                                  CsvWriter& csv) {
  require(!cfg.g_sweep.empty(), "g_sweep", "must be non-empty");
  const std::size_t total_groups_units = cfg.n_groups * cfg.g;
  csv.row({"g", "bytes", "sparse_ns", "dense_ns", "efficiency_paper",
           "efficiency_ratio"});
  for (std::size_t g : cfg.g_sweep) {
    require(g >= 1 && total_groups_units % g == 0, "g_sweep",
            "every g must divide n_groups*g = " +
                std::to_string(total_groups_units));
    GatherBenchConfig bc;
    bc.n_groups = total_groups_units / g;
    bc.g = g;
    bc.d = cfg.d;
    bc.fraction_selected = cfg.fraction_selected;
    bc.repeats = cfg.repeats;
    bc.seed = cfg.seed;
    const GatherBenchResult r = run_gather_bench(bc);
    if (!r.checksum_ok)
      throw NumericError("bench-gather: checksum mismatch at g = " +
                         std::to_string(g));
    csv.row({fmt_count(g), fmt_count(r.bytes_moved), fmt_real(r.sparse_ns),
             fmt_real(r.dense_ns), fmt_real(r.efficiency_paper),
             fmt_real(r.efficiency_ratio)});
  }
}

inline void run_cost_mode(const ExperimentConfig& cfg, CsvWriter& csv) {
  require(!cfg.k_prime.empty(), "k_prime", "required");
  const CostReport c =
      param_bytes(cfg.d, cfg.l, cfg.rank, cfg.k_prime.front());
  csv.row({"method", "bytes"});
  csv.row({"baseline", fmt_count(c.bytes_baseline)});
  csv.row({"lr", fmt_count(c.bytes_lr)});
  csv.row({"q", fmt_count(c.bytes_q)});
  csv.row({"lrq", fmt_count(c.bytes_lrq)});
}

inline void run_gen_instance_mode(const ExperimentConfig& cfg,
                                  CsvWriter& csv) {
  require(!cfg.matrix_file.empty(), "matrix_file", "required");
  require(!cfg.vector_file.empty(), "vector_file", "required");
  Spectrum spectrum;
  if (cfg.instance == "random-gaussian") spectrum = Spectrum::kFlat;
  else if (cfg.instance == "random-decaying") spectrum = Spectrum::kDecaying;
  else
    throw ConfigError("instance",
                      "gen-instance needs random-gaussian | random-decaying");
  const ScoreMatrix z =
      gen_instance(cfg.d, cfg.l, derive_seed(cfg.seed, 1), spectrum);
  const std::vector<float> x = gen_vector(cfg.d, derive_seed(cfg.seed, 2));
  write_matrix_file(cfg.matrix_file, z);
  write_vector_file(cfg.vector_file, x);
  csv.row({"artifact", "path"});
  csv.row({"matrix", cfg.matrix_file});
  csv.row({"vector", cfg.vector_file});
}

}  // namespace detail

inline void run_experiment(const ExperimentConfig& cfg) {
  if (cfg.mode.empty()) throw ConfigError("mode", "required");
  if (cfg.out.empty()) throw ConfigError("out", "required");

  detail::CsvWriter csv(cfg.out);
  csv.manifest(cfg);

  if (cfg.mode == "hire-topk") detail::run_hire_topk_mode(cfg, csv);
  else if (cfg.mode == "softmax-topk") detail::run_softmax_topk_mode(cfg, csv);
  else if (cfg.mode == "distributed") detail::run_distributed_mode(cfg, csv);
  else if (cfg.mode == "ffn") detail::run_ffn_mode(cfg, csv);
  else if (cfg.mode == "kprime-sweep") detail::run_kprime_sweep_mode(cfg, csv);
  else if (cfg.mode == "projection-ablation")
    detail::run_projection_ablation_mode(cfg, csv);
  else if (cfg.mode == "overlap") detail::run_overlap_mode(cfg, csv);
  else if (cfg.mode == "bench-gather") detail::run_bench_gather_mode(cfg, csv);
  else if (cfg.mode == "cost") detail::run_cost_mode(cfg, csv);
  else if (cfg.mode == "gen-instance")
    detail::run_gen_instance_mode(cfg, csv);
  else
    throw ConfigError("mode", "unknown mode '" + cfg.mode + "'");

  csv.close();
}

// Maps the error taxonomy onto the documented exit codes.
inline int run_experiment_catching(const ExperimentConfig& cfg) {
  try {
    run_experiment(cfg);
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const IoError& e) {
    std::cerr << e.what() << "\n";
    return kExitIoError;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumericError;
  }
}

}  // namespace hire
