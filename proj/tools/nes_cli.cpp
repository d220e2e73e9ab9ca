// nes_cli: simulate trials, run neural effect search and baseline scans on
// code matrices, and sweep benchmark grids.
//
// Exit codes: 0 success, 2 parse failure (command line or input files),
// 3 validation failure, 4 runtime failure.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nes/nes.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

int exit_code_for(nes::ErrorKind kind) {
  switch (kind) {
    case nes::ErrorKind::parse_error: return kExitParse;
    case nes::ErrorKind::invalid_argument:
    case nes::ErrorKind::row_count_mismatch:
    case nes::ErrorKind::non_binary_treatment:
    case nes::ErrorKind::non_finite_value: return kExitValidation;
    default: return kExitRuntime;
  }
}

// Writes to the file when a path is given, stdout otherwise.
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  nes::require(static_cast<bool>(out), nes::ErrorKind::io_error, "cannot write " + path);
  write(out);
}

struct NetFlags {
  nes::Index quantile_splits = 1;
  bool no_residualize = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--quantile-splits", quantile_splits, "Cutpoints per selected code (1 = median split)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--no-residualize", no_residualize, "Skip arm-wise residualization");
  }

  nes::NetConfig config() const {
    nes::NetConfig c;
    c.quantile_splits_per_stratifier = quantile_splits;
    c.residualize = !no_residualize;
    return c;
  }
};

struct SimulateArgs {
  std::string dgp = "coeffect";
  nes::Index n = 500;
  nes::Index m = 50;
  double ate = 0.4;
  double leakage = 0.1;
  double noise_sd = 0.5;
  std::vector<double> effect_profile = {1.0, 0.75};
  std::uint64_t seed = 0;
  std::string out_codes = "codes.csv";
  std::string out_treatment = "treatment.csv";
  std::string out_covariate;
  std::string out_truth;
};

void run_simulate(const SimulateArgs& a) {
  nes::DgpTemplate dgp;
  dgp.kind = nes::parse_dgp(a.dgp);
  dgp.m = a.m;
  dgp.leakage = a.leakage;
  dgp.noise_sd = a.noise_sd;
  dgp.effect_profile = a.effect_profile;
  const nes::GeneratedTrial trial = nes::generate_trial(dgp, a.n, a.ate, a.seed);
  nes::write_trial(a.out_codes, a.out_treatment, trial.codes, trial.treatment);
  if (!a.out_covariate.empty()) {
    nes::require(!trial.covariate.empty(), nes::ErrorKind::invalid_argument,
                 "the " + a.dgp + " model has no covariate");
    nes::write_binary_column(a.out_covariate, "w", trial.covariate);
  }
  if (!a.out_truth.empty()) {
    nlohmann::json doc;
    doc["rng"] = std::string(nes::kRngAlgorithm);
    doc["seed"] = a.seed;
    doc["dgp"] = a.dgp;
    doc["n"] = a.n;
    doc["m"] = a.m;
    doc["ate"] = a.ate;
    doc["leakage"] = a.leakage;
    doc["noise_sd"] = a.noise_sd;
    doc["effect_profile"] = a.effect_profile;
    doc["ground_truth_neurons"] = trial.ground_truth_neurons;
    emit(a.out_truth, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
  }
}

struct SearchArgs {
  std::string codes;
  std::string treatment;
  std::string covariate;
  double alpha = 0.05;
  std::string correction = "bonferroni";
  std::string estimator = "ad";
  nes::Index max_rounds = 0;
  unsigned workers = 1;
  NetFlags net;
  std::string out;
};

std::optional<nes::Covariate> load_covariate(const std::string& path, nes::Index units) {
  if (path.empty()) return std::nullopt;
  auto w = nes::read_binary_column(path, nes::ErrorKind::invalid_argument);
  nes::require(w.size() == units, nes::ErrorKind::row_count_mismatch, "covariate rows do not match the codes");
  return w;
}

void run_search(const SearchArgs& a) {
  const auto [codes, treatment] = nes::load_trial(a.codes, a.treatment);
  const auto covariate = load_covariate(a.covariate, codes.units());
  nes::NesConfig config;
  config.alpha = a.alpha;
  config.correction = nes::parse_correction(a.correction);
  config.estimator = nes::parse_estimator(a.estimator);
  config.max_rounds = a.max_rounds;
  config.workers = a.workers;
  config.net = a.net.config();
  const auto report =
      nes::nes_search(codes, treatment, config, {}, covariate ? std::span<const std::uint8_t>(*covariate)
                                                              : std::span<const std::uint8_t>());
  emit(a.out, [&](std::ostream& out) { out << nes::report_to_json(report, config).dump(2) << '\n'; });
}

struct ScanArgs {
  std::string codes;
  std::string treatment;
  std::string covariate;
  std::string estimator = "ad";
  std::string rule = "bonferroni";
  double alpha = 0.05;
  nes::Index k = 2;
  unsigned workers = 1;
  std::string out;
};

void run_scan(const ScanArgs& a) {
  const auto [codes, treatment] = nes::load_trial(a.codes, a.treatment);
  std::vector<nes::NeuronTest> tests;
  if (nes::parse_estimator(a.estimator) == nes::Estimator::aipw) {
    const auto covariate = load_covariate(a.covariate, codes.units()).value_or(nes::Covariate(codes.units(), 0));
    tests = nes::aipw_scan(codes, treatment, covariate, 0.5, a.workers);
  } else {
    tests = nes::ad_scan(codes, treatment, a.workers);
  }
  nes::SelectionRule rule{nes::SelectionKind::bonferroni, a.alpha, a.k};
  if (a.rule == "t-test") rule.kind = nes::SelectionKind::uncorrected_t;
  else if (a.rule == "fdr") rule.kind = nes::SelectionKind::bh_fdr;
  else if (a.rule == "top-k") rule.kind = nes::SelectionKind::top_k;
  const nes::IndexSet chosen = nes::apply_selection(tests, rule);
  std::vector<bool> selected(codes.channels(), false);
  for (auto j : chosen) selected[j] = true;

  emit(a.out, [&](std::ostream& out) {
    out << "neuron,tau_hat,se,df,p_value,selected,error\n";
    char buf[160];
    for (const auto& t : tests) {
      if (t.result) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%d,", t.neuron, t.result->tau_hat,
                      t.result->se, t.result->df, t.result->p_value, selected[t.neuron] ? 1 : 0);
        out << buf << '\n';
      } else {
        out << t.neuron << ",,,,,0," << nes::to_string(*t.error) << '\n';
      }
    }
  });
}

struct BenchArgs {
  std::vector<nes::Index> n_values = {30, 50, 100, 250, 500, 1000};
  std::vector<double> ate_values = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<std::uint64_t> seeds;
  nes::Index seed_count = 10;
  std::vector<std::string> methods = {"nes-bonferroni", "nes-fdr", "nes-t", "t-test", "bonferroni", "fdr", "top-k"};
  std::string estimator = "ad";
  std::string dgp = "coeffect";
  nes::Index m = 50;
  double leakage = 0.1;
  double noise_sd = 0.5;
  std::vector<double> effect_profile = {1.0, 0.75};
  double alpha = 0.05;
  nes::Index top_k = 2;
  unsigned workers = 1;
  bool timing = false;
  NetFlags net;
  std::string out;
};

// Fills the options of `cmd` that were not given on the command line from an
// INI/TOML file. Keys are long option names without the leading dashes and
// may sit at top level or under a section named after the subcommand.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  for (const auto& item : CLI::ConfigTOML().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == cmd->get_name()))
      throw CLI::ConfigError::Extras(item.fullname());
    CLI::Option* opt = cmd->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") throw CLI::ConfigError::Extras(item.fullname());
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

void write_rows(const std::string& path, const std::vector<nes::ResultRow>& rows, bool timing) {
  emit(path, [&](std::ostream& out) { nes::write_rows_csv(out, rows, timing); });
}

std::vector<std::uint64_t> resolve_seeds(const std::vector<std::uint64_t>& seeds, nes::Index count) {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(count);
  std::iota(out.begin(), out.end(), std::uint64_t{0});
  return out;
}

void run_bench(const BenchArgs& a) {
  nes::GridSpec spec;
  spec.n_values = a.n_values;
  spec.ate_values = a.ate_values;
  spec.seeds = resolve_seeds(a.seeds, a.seed_count);
  spec.methods.clear();
  for (const auto& m : a.methods) spec.methods.push_back(nes::parse_method(m));
  spec.options.alpha = a.alpha;
  spec.options.top_k = a.top_k;
  spec.options.estimator = nes::parse_estimator(a.estimator);
  spec.options.net = a.net.config();
  spec.dgp.kind = nes::parse_dgp(a.dgp);
  spec.dgp.m = a.m;
  spec.dgp.leakage = a.leakage;
  spec.dgp.noise_sd = a.noise_sd;
  spec.dgp.effect_profile = a.effect_profile;
  spec.workers = a.workers;
  write_rows(a.out, nes::run_grid(spec), a.timing);
}

struct ParadoxArgs {
  std::vector<nes::Index> n_values = {100, 1000, 10000};
  std::vector<double> tau_values = {1.0};
  nes::Index m = 50;
  double leakage = 0.01;
  std::vector<std::uint64_t> seeds;
  nes::Index seed_count = 10;
  double alpha = 0.05;
  unsigned workers = 1;
  bool timing = false;
  std::string out;
};

void run_paradox(const ParadoxArgs& a) {
  const auto rows = nes::run_paradox_figure(a.n_values, a.tau_values, a.m, a.leakage,
                                            resolve_seeds(a.seeds, a.seed_count), a.alpha, a.workers);
  write_rows(a.out, rows, a.timing);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural effect search on code matrices from randomized trials"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic trial and write it to files");
  simulate->add_option("--dgp", sim.dgp, "coeffect | linear | paradox")->check(CLI::IsMember({"coeffect", "linear", "paradox"}));
  simulate->add_option("--n", sim.n, "Units");
  simulate->add_option("--m", sim.m, "Code channels");
  simulate->add_option("--ate,--tau", sim.ate, "Effect size (ATE for coeffect, scale for linear, tau for paradox)");
  simulate->add_option("--leakage", sim.leakage, "Off-coordinate leakage");
  simulate->add_option("--noise-sd", sim.noise_sd, "Code noise standard deviation");
  simulate->add_option("--effect-profile", sim.effect_profile, "Relative effect sizes (linear model)");
  simulate->add_option("--seed", sim.seed, "Seed");
  simulate->add_option("--out-codes", sim.out_codes, "Codes file");
  simulate->add_option("--out-treatment", sim.out_treatment, "Treatment file");
  simulate->add_option("--out-covariate", sim.out_covariate, "Covariate file (coeffect only)");
  simulate->add_option("--out-truth", sim.out_truth, "JSON with generator settings and ground truth");

  SearchArgs search;
  auto* search_cmd = app.add_subcommand("search", "Run neural effect search on a trial");
  search_cmd->add_option("--codes", search.codes, "Codes file")->required();
  search_cmd->add_option("--treatment", search.treatment, "Treatment file")->required();
  search_cmd->add_option("--covariate", search.covariate, "Binary covariate file (AIPW first round)");
  search_cmd->add_option("--alpha", search.alpha, "Significance level");
  search_cmd->add_option("--correction", search.correction, "bonferroni | bh-fdr | none");
  search_cmd->add_option("--estimator", search.estimator, "First-round estimator: ad | aipw");
  search_cmd->add_option("--max-rounds", search.max_rounds, "Round cap (0 = number of channels)");
  search_cmd->add_option("--workers", search.workers, "Threads per round (0 = all cores)");
  search.net.add(search_cmd);
  search_cmd->add_option("--out", search.out, "Audit JSON (default stdout)");

  ScanArgs scan;
  auto* scan_cmd = app.add_subcommand("scan", "Per-channel baseline scan");
  scan_cmd->add_option("--codes", scan.codes, "Codes file")->required();
  scan_cmd->add_option("--treatment", scan.treatment, "Treatment file")->required();
  scan_cmd->add_option("--covariate", scan.covariate, "Binary covariate file (AIPW)");
  scan_cmd->add_option("--estimator", scan.estimator, "ad | aipw");
  scan_cmd->add_option("--rule", scan.rule, "t-test | bonferroni | fdr | top-k")
      ->check(CLI::IsMember({"t-test", "bonferroni", "fdr", "top-k"}));
  scan_cmd->add_option("--alpha", scan.alpha, "Significance level");
  scan_cmd->add_option("--k", scan.k, "k for top-k");
  scan_cmd->add_option("--workers", scan.workers, "Threads (0 = all cores)");
  scan_cmd->add_option("--out", scan.out, "Result CSV (default stdout)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run a method x n x ate x seed grid");
  std::string bench_config;
  bench_cmd->add_option("--config", bench_config, "INI/TOML file with grid settings; flags override");
  bench_cmd->add_option("--n", bench.n_values, "Sample sizes");
  bench_cmd->add_option("--ate", bench.ate_values, "Effect sizes");
  bench_cmd->add_option("--seeds", bench.seeds, "Explicit seeds");
  bench_cmd->add_option("--seed-count", bench.seed_count, "Seeds 0..N-1 when --seeds is absent");
  bench_cmd->add_option("--methods", bench.methods, "Methods")
      ->check(CLI::IsMember({"nes-bonferroni", "nes-fdr", "nes-t", "t-test", "bonferroni", "fdr", "top-k"}));
  bench_cmd->add_option("--estimator", bench.estimator, "ad | aipw")->check(CLI::IsMember({"ad", "aipw"}));
  bench_cmd->add_option("--dgp", bench.dgp, "coeffect | linear | paradox")
      ->check(CLI::IsMember({"coeffect", "linear", "paradox"}));
  bench_cmd->add_option("--m", bench.m, "Code channels");
  bench_cmd->add_option("--leakage", bench.leakage, "Leakage / entanglement");
  bench_cmd->add_option("--noise-sd", bench.noise_sd, "Code noise standard deviation");
  bench_cmd->add_option("--effect-profile", bench.effect_profile, "Relative effect sizes (linear model)");
  bench_cmd->add_option("--alpha", bench.alpha, "Significance level");
  bench_cmd->add_option("--top-k", bench.top_k, "k for top-k");
  bench_cmd->add_option("--workers", bench.workers, "Grid cells in parallel (0 = all cores)");
  bench_cmd->add_flag("--timing", bench.timing, "Add a wall_time_ms column (output is then not reproducible)");
  bench.net.add(bench_cmd);
  bench_cmd->add_option("--out", bench.out, "Result CSV (default stdout)");

  ParadoxArgs paradox;
  auto* paradox_cmd = app.add_subcommand("paradox", "Rejection counts on the entangled-channel model");
  paradox_cmd->add_option("--n", paradox.n_values, "Sample sizes");
  paradox_cmd->add_option("--tau", paradox.tau_values, "Effect sizes");
  paradox_cmd->add_option("--m", paradox.m, "Channels");
  paradox_cmd->add_option("--leakage", paradox.leakage, "Entanglement coefficient");
  paradox_cmd->add_option("--seeds", paradox.seeds, "Explicit seeds");
  paradox_cmd->add_option("--seed-count", paradox.seed_count, "Seeds 0..N-1 when --seeds is absent");
  paradox_cmd->add_option("--alpha", paradox.alpha, "Significance level");
  paradox_cmd->add_option("--workers", paradox.workers, "Grid cells in parallel (0 = all cores)");
  paradox_cmd->add_flag("--timing", paradox.timing, "Add a wall_time_ms column");
  paradox_cmd->add_option("--out", paradox.out, "Result CSV (default stdout)");

  try {
    app.parse(argc, argv);
    if (*bench_cmd && !bench_config.empty()) apply_config_file(bench_cmd, bench_config);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitParse;
  }

  try {
    if (*simulate) run_simulate(sim);
    else if (*search_cmd) run_search(search);
    else if (*scan_cmd) run_scan(scan);
    else if (*bench_cmd) run_bench(bench);
    else if (*paradox_cmd) run_paradox(paradox);
  } catch (const nes::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
