#pragma once

// Experiment grids over the synthetic generators: one result row per
// (n, ate, seed, method), emitted in grid order regardless of how many
// worker threads ran the cells.

#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nes/effect_estimators.hpp"
#include "nes/error.hpp"
#include "nes/evaluation.hpp"
#include "nes/hypothesis_tests.hpp"
#include "nes/neural_effect_search.hpp"
#include "nes/parallel.hpp"
#include "nes/rng.hpp"
#include "nes/synthetic_dgp.hpp"
#include "nes/types.hpp"

namespace nes {

enum class Method { nes_bonferroni, nes_fdr, nes_t, t_test, bonferroni, fdr, top_k };

inline constexpr Method kAllMethods[] = {Method::nes_bonferroni, Method::nes_fdr, Method::nes_t, Method::t_test,
                                         Method::bonferroni,     Method::fdr,     Method::top_k};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::nes_bonferroni: return "nes-bonferroni";
    case Method::nes_fdr: return "nes-fdr";
    case Method::nes_t: return "nes-t";
    case Method::t_test: return "t-test";
    case Method::bonferroni: return "bonferroni";
    case Method::fdr: return "fdr";
    case Method::top_k: return "top-k";
  }
  return "unknown";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (to_string(m) == s) return m;
  throw Error(ErrorKind::invalid_argument, "unknown method '" + std::string(s) + "'");
}

enum class DgpKind { coeffect, linear, paradox };

inline std::string_view to_string(DgpKind k) {
  switch (k) {
    case DgpKind::coeffect: return "coeffect";
    case DgpKind::linear: return "linear";
    case DgpKind::paradox: return "paradox";
  }
  return "unknown";
}

inline DgpKind parse_dgp(std::string_view s) {
  if (s == "coeffect") return DgpKind::coeffect;
  if (s == "linear") return DgpKind::linear;
  if (s == "paradox") return DgpKind::paradox;
  throw Error(ErrorKind::invalid_argument, "unknown dgp '" + std::string(s) + "'");
}

// Generator template; a grid cell fills in n, ate and the seed.
//   coeffect: co-effect RCT with code leakage `leakage` and noise `noise_sd`
//   linear:   Gaussian-latent linear model, tau_Y = ate * effect_profile
//   paradox:  channel 0 = Y with tau = ate, other channels leak `leakage * Y`
struct DgpTemplate {
  DgpKind kind = DgpKind::coeffect;
  Index m = 50;
  double leakage = 0.1;
  double noise_sd = 0.5;
  std::vector<double> effect_profile = {1.0, 0.75};
};

struct MethodOptions {
  double alpha = 0.05;
  Index top_k = 2;
  Estimator estimator = Estimator::ad;
  NetConfig net;
  unsigned workers = 1;
};

struct GridSpec {
  std::vector<Index> n_values = {30, 50, 100, 250, 500, 1000};
  std::vector<double> ate_values = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<Method> methods = {std::begin(kAllMethods), std::end(kAllMethods)};
  MethodOptions options;
  DgpTemplate dgp;
  unsigned workers = 1;  // grid cells in flight
};

inline void validate(const GridSpec& spec) {
  require(!spec.n_values.empty() && !spec.ate_values.empty() && !spec.seeds.empty() && !spec.methods.empty(),
          ErrorKind::invalid_argument, "grid lists must be non-empty");
  require(spec.options.alpha > 0.0 && spec.options.alpha < 1.0, ErrorKind::invalid_argument,
          "alpha must lie in (0, 1)");
  require(spec.options.top_k >= 1, ErrorKind::invalid_argument, "top-k needs k >= 1");
}

struct ResultRow {
  std::string method;
  Index n = 0;
  double ate = 0.0;
  std::uint64_t seed = 0;
  Index discovered_count = 0;
  MetricsRecord metrics;
  std::string error;  // empty on success
  double wall_time_ms = 0.0;
};

struct MethodOutcome {
  IndexSet discovered;
  std::optional<DiscoveryReport> report;  // NES methods only
};

/// Runs one discovery method. Methods see only the observed data.
inline MethodOutcome run_method(Method method, const CodeMatrix& codes, const TreatmentAssignment& treatment,
                                std::span<const std::uint8_t> covariate, const MethodOptions& options) {
  MethodOutcome out;
  const auto nes_with = [&](Correction c) {
    NesConfig config;
    config.alpha = options.alpha;
    config.correction = c;
    config.net = options.net;
    config.estimator = options.estimator;
    config.workers = options.workers;
    out.report = nes_search(codes, treatment, config, {}, covariate);
    out.discovered = out.report->selected;
  };
  const auto scan = [&](SelectionKind kind) {
    std::vector<NeuronTest> tests;
    if (options.estimator == Estimator::aipw) {
      const Covariate constant(covariate.empty() ? codes.units() : 0, 0);
      tests = aipw_scan(codes, treatment, covariate.empty() ? std::span<const std::uint8_t>(constant) : covariate,
                        0.5, options.workers);
    } else {
      tests = ad_scan(codes, treatment, options.workers);
    }
    out.discovered = apply_selection(tests, {kind, options.alpha, options.top_k});
  };
  switch (method) {
    case Method::nes_bonferroni: nes_with(Correction::bonferroni); break;
    case Method::nes_fdr: nes_with(Correction::bh_fdr); break;
    case Method::nes_t: nes_with(Correction::none); break;
    case Method::t_test: scan(SelectionKind::uncorrected_t); break;
    case Method::bonferroni: scan(SelectionKind::bonferroni); break;
    case Method::fdr: scan(SelectionKind::bh_fdr); break;
    case Method::top_k: scan(SelectionKind::top_k); break;
  }
  return out;
}

/// Data seed of a grid cell. The method is not part of the hash, so every
/// method in a cell is scored on the same trial.
inline std::uint64_t cell_seed(DgpKind kind, Index n, double ate, std::uint64_t seed) {
  std::uint64_t h = hash_tag(to_string(kind));
  h = hash_combine(h, n);
  h = hash_combine(h, std::bit_cast<std::uint64_t>(ate));
  return hash_combine(h, seed);
}

inline GeneratedTrial generate_trial(const DgpTemplate& dgp, Index n, double ate, std::uint64_t data_seed) {
  switch (dgp.kind) {
    case DgpKind::coeffect: {
      CoEffectSpec spec;
      spec.n = n;
      spec.ate = ate;
      spec.seed = data_seed;
      spec.code.m = dgp.m;
      spec.code.leakage = dgp.leakage;
      spec.code.noise_sd = dgp.noise_sd;
      return gen_coeffect(spec);
    }
    case DgpKind::linear: {
      std::vector<double> sizes;
      for (double s : dgp.effect_profile) sizes.push_back(ate * s);
      return gen_linear_trial(make_linear_leakage_spec(n, dgp.m, sizes, dgp.leakage, dgp.noise_sd, data_seed));
    }
    case DgpKind::paradox: {
      ParadoxSpec spec;
      spec.n = n;
      spec.m = dgp.m;
      spec.tau = ate;
      spec.leakage = dgp.leakage;
      spec.seed = data_seed;
      return gen_paradox(spec);
    }
  }
  throw Error(ErrorKind::invalid_argument, "unknown dgp");
}

inline std::vector<ResultRow> run_grid(const GridSpec& spec) {
  validate(spec);
  struct Cell {
    Index n;
    double ate;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (Index n : spec.n_values)
    for (double ate : spec.ate_values)
      for (std::uint64_t seed : spec.seeds) cells.push_back({n, ate, seed});

  std::vector<std::vector<ResultRow>> per_cell(cells.size());
  parallel_for(cells.size(), spec.workers, [&](std::size_t c) {
    const Cell& cell = cells[c];
    std::optional<GeneratedTrial> trial;
    std::string trial_error;
    try {
      trial = generate_trial(spec.dgp, cell.n, cell.ate, cell_seed(spec.dgp.kind, cell.n, cell.ate, cell.seed));
    } catch (const Error& e) {
      trial_error = std::string(to_string(e.kind()));
    }
    for (Method method : spec.methods) {
      ResultRow row;
      row.method = std::string(to_string(method));
      row.n = cell.n;
      row.ate = cell.ate;
      row.seed = cell.seed;
      if (!trial) {
        row.error = trial_error;
        per_cell[c].push_back(std::move(row));
        continue;
      }
      const auto start = std::chrono::steady_clock::now();
      try {
        const MethodOutcome outcome =
            run_method(method, trial->codes, trial->treatment, trial->covariate, spec.options);
        row.discovered_count = outcome.discovered.size();
        row.metrics = set_metrics(outcome.discovered, trial->ground_truth_neurons);
      } catch (const Error& e) {
        row.error = std::string(to_string(e.kind()));
      }
      row.wall_time_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      per_cell[c].push_back(std::move(row));
    }
  });

  std::vector<ResultRow> rows;
  rows.reserve(cells.size() * spec.methods.size());
  for (auto& block : per_cell)
    for (auto& row : block) rows.push_back(std::move(row));
  return rows;
}

/// Rejection counts of the uncorrected scan, the Bonferroni scan and NES on
/// the paradox model across n and tau.
inline std::vector<ResultRow> run_paradox_figure(const std::vector<Index>& n_values,
                                                 const std::vector<double>& tau_values, Index m, double leakage,
                                                 const std::vector<std::uint64_t>& seeds, double alpha = 0.05,
                                                 unsigned workers = 1) {
  GridSpec spec;
  spec.n_values = n_values;
  spec.ate_values = tau_values;
  spec.seeds = seeds;
  spec.methods = {Method::t_test, Method::bonferroni, Method::nes_bonferroni};
  spec.options.alpha = alpha;
  spec.dgp.kind = DgpKind::paradox;
  spec.dgp.m = m;
  spec.dgp.leakage = leakage;
  spec.workers = workers;
  return run_grid(spec);
}

namespace detail {

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows, bool include_timing = false) {
  out << "method,n,ate,seed,discovered_count,precision,recall,f1,iou,degenerate,error";
  if (include_timing) out << ",wall_time_ms";
  out << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.n << ',' << detail::format_metric(r.ate) << ',' << r.seed << ','
        << r.discovered_count << ',' << detail::format_metric(r.metrics.precision) << ','
        << detail::format_metric(r.metrics.recall) << ',' << detail::format_metric(r.metrics.f1) << ','
        << detail::format_metric(r.metrics.iou) << ',' << (r.metrics.degenerate ? 1 : 0) << ',' << r.error;
    if (include_timing) out << ',' << detail::format_metric(r.wall_time_ms);
    out << '\n';
  }
}

inline nlohmann::json to_json(const NeuronTest& t) {
  nlohmann::json j;
  j["neuron"] = t.neuron;
  if (t.result) {
    j["tau_hat"] = t.result->tau_hat;
    j["se"] = t.result->se;
    j["df"] = t.result->df;
    j["p_value"] = t.result->p_value;
  } else {
    j["error"] = std::string(to_string(t.error.value_or(ErrorKind::invalid_argument)));
  }
  return j;
}

/// Audit document of a search: configuration, selection, and every round's
/// test table.
inline nlohmann::json report_to_json(const DiscoveryReport& report, const NesConfig& config) {
  nlohmann::json doc;
  doc["config"] = {{"alpha", config.alpha},
                   {"correction", std::string(to_string(config.correction))},
                   {"estimator", std::string(to_string(config.estimator))},
                   {"max_rounds", config.max_rounds},
                   {"residualize", config.net.residualize},
                   {"quantile_splits_per_stratifier", config.net.quantile_splits_per_stratifier},
                   {"min_cell_total", config.net.min_cell_total},
                   {"min_cell_per_arm", config.net.min_cell_per_arm}};
  doc["selected"] = report.selected;
  doc["halted_reason"] = std::string(to_string(report.halted_reason));
  doc["rounds"] = nlohmann::json::array();
  for (std::size_t r = 0; r < report.rounds.size(); ++r) {
    const auto& round = report.rounds[r];
    nlohmann::json jr;
    jr["round"] = r + 1;
    jr["selected_before"] = round.selected_before;
    jr["hypotheses"] = round.hypotheses;
    jr["rejected"] = round.rejected;
    jr["chosen"] = round.chosen ? nlohmann::json(*round.chosen) : nlohmann::json(nullptr);
    jr["tests"] = nlohmann::json::array();
    for (const auto& t : round.tests) jr["tests"].push_back(to_json(t));
    doc["rounds"].push_back(std::move(jr));
  }
  return doc;
}

}  // namespace nes
