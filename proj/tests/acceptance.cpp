// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nes/nes.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::uint64_t> seed_range(std::uint64_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::uint64_t i = 0; i < count; ++i) s[i] = i;
  return s;
}

bool close_rel(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({std::fabs(a), std::fabs(b), 1e-300});
}

Outcome paradox_reproduction() {
  const auto start = Clock::now();
  const auto rows = nes::run_paradox_figure({200, 20000}, {1.0}, 50, 0.1, seed_range(10), 0.05, workers());
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  double bonf[2] = {0, 0};
  int nes_exact = 0, errors = 0;
  bool t_dominates = true;
  for (std::size_t i = 0; i + 2 < rows.size(); i += 3) {
    const auto& t = rows[i];
    const auto& b = rows[i + 1];
    const auto& s = rows[i + 2];
    errors += !t.error.empty() + !b.error.empty() + !s.error.empty();
    const int cell = t.n == 200 ? 0 : 1;
    bonf[cell] += static_cast<double>(b.discovered_count);
    if (t.discovered_count < b.discovered_count) t_dominates = false;
    if (cell == 1 && s.discovered_count == 1 && s.metrics.tp == 1) ++nes_exact;
  }
  bonf[0] /= 10.0;
  bonf[1] /= 10.0;
  const bool pass = errors == 0 && bonf[0] <= 5.0 && bonf[1] >= 45.0 && t_dominates && nes_exact >= 9 && secs < 60.0;
  return {pass, fmt("bonferroni mean rejections n=200: %.1f (<=5), n=20000: %.1f (>=45); t>=bonferroni in every "
                    "cell: %s; NES = {0} in %d/10 (>=9); %.1f s (<60)",
                    bonf[0], bonf[1], t_dominates ? "yes" : "no", nes_exact, secs)};
}

Outcome zero_effect_calibration() {
  const auto start = Clock::now();
  nes::GridSpec spec;
  spec.n_values = {500};
  spec.ate_values = {0.0};
  spec.seeds = seed_range(100);
  spec.methods = {nes::Method::nes_bonferroni, nes::Method::top_k};
  spec.options.top_k = 2;
  spec.workers = workers();
  const auto rows = nes::run_grid(spec);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  int empty = 0, topk_two = 0, errors = 0;
  for (const auto& r : rows) {
    errors += !r.error.empty();
    if (r.method == "nes-bonferroni" && r.error.empty() && r.discovered_count == 0) ++empty;
    if (r.method == "top-k" && r.error.empty() && r.discovered_count == 2) ++topk_two;
  }
  const bool pass = errors == 0 && empty >= 92 && topk_two == 100 && secs < 120.0;
  return {pass, fmt("NES-bonferroni empty in %d/100 (>=92); top-k returned 2 in %d/100; %.1f s (<120)", empty, topk_two,
                    secs)};
}

Outcome nes_consistency() {
  const auto start = Clock::now();
  nes::GridSpec spec;
  spec.n_values = {2000};
  spec.ate_values = {1.0};
  spec.seeds = seed_range(10);
  spec.dgp.kind = nes::DgpKind::linear;
  spec.dgp.m = 50;
  spec.dgp.leakage = 0.1;
  spec.dgp.noise_sd = 0.5;
  spec.dgp.effect_profile = {2.0, 1.5};
  spec.workers = workers();
  const auto rows = nes::run_grid(spec);
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::map<std::string, std::pair<double, double>> recall_iou;
  int nes_perfect = 0, errors = 0;
  for (const auto& r : rows) {
    errors += !r.error.empty();
    recall_iou[r.method].first += r.metrics.recall / 10.0;
    recall_iou[r.method].second += r.metrics.iou / 10.0;
    if (r.method == "nes-bonferroni" && r.metrics.iou == 1.0) ++nes_perfect;
  }
  double min_recall = 1.0;
  std::string worst;
  for (const auto& [method, v] : recall_iou)
    if (v.first < min_recall) min_recall = v.first, worst = method;
  const double bonf_iou = recall_iou["bonferroni"].second;
  const bool pass = errors == 0 && nes_perfect >= 8 && bonf_iou <= 0.2 && min_recall >= 0.9 && secs < 120.0;
  return {pass, fmt("NES IoU=1 in %d/10 (>=8); bonferroni mean IoU %.3f (<=0.2); min mean recall %.3f%s%s (>=0.9); "
                    "%.1f s (<120)",
                    nes_perfect, bonf_iou, min_recall, worst.empty() ? "" : " at ", worst.c_str(), secs)};
}

Outcome net_welch_reduction() {
  std::mt19937_64 gen(20240601);
  std::uniform_int_distribution<int> size(4, 300), cols(1, 6);
  std::uniform_real_distribution<double> scale(0.01, 100.0), shift(-50.0, 50.0);
  int mismatches = 0, datasets = 0;
  double worst = 0.0;
  while (datasets < 100) {
    const int n = size(gen), m = cols(gen);
    std::normal_distribution<double> nd(shift(gen), scale(gen));
    std::vector<std::uint8_t> t(n);
    for (int i = 0; i < n; ++i) t[i] = std::bernoulli_distribution(0.3 + 0.4 * (datasets % 3) / 2.0)(gen);
    const int treated = static_cast<int>(std::count(t.begin(), t.end(), 1));
    if (treated < 2 || n - treated < 2) continue;
    Eigen::MatrixXd v(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) v(i, j) = nd(gen) + (t[i] ? 0.3 * j : 0.0);
    const nes::CodeMatrix codes(v);
    const nes::TreatmentAssignment treatment(t);
    const nes::Index target = static_cast<nes::Index>(datasets % m);
    const auto a = nes::net_test(codes, treatment, target, {});
    const auto [x, y] = nes::split_by_arm(codes.column(target), treatment);
    const auto b = nes::welch_t_test(x, y);
    for (auto [p, q] : {std::pair{a.tau_hat, b.tau_hat}, {a.se, b.se}, {a.df, b.df}, {a.p_value, b.p_value}}) {
      const double rel = std::fabs(p - q) / std::max({std::fabs(p), std::fabs(q), 1e-300});
      worst = std::max(worst, rel);
      if (!close_rel(p, q, 1e-12)) ++mismatches;
    }
    ++datasets;
  }
  return {mismatches == 0, fmt("%d datasets, %d mismatches, worst relative difference %.2e (<=1e-12)", datasets,
                               mismatches, worst)};
}

Outcome stratified_unbiasedness() {
  const auto start = Clock::now();
  // channel 0: untreated concept used as the stratifier; channel 1: treated
  // concept with effect 0.5 plus 0.3 leakage of the stratifier concept.
  const double tau_j = 0.5;
  nes::LinearLeakageSpec spec;
  spec.n = 500;
  spec.m = 4;
  spec.noise_sd = 0.5;
  spec.principal_neurons = {0, 1};
  spec.effect_directions = Eigen::MatrixXd::Zero(4, 2);
  spec.effect_directions(0, 0) = 1.0;
  spec.effect_directions(1, 1) = 1.0;
  spec.effect_directions(1, 0) = 0.3;
  spec.effect_directions(2, 0) = 0.2;
  spec.effect_directions(3, 1) = 0.2;
  spec.effect_sizes = Eigen::Vector2d(0.0, tau_j);
  const int reps = 2000;
  std::vector<double> estimates(reps);
  nes::parallel_for(reps, workers(), [&](std::size_t rep) {
    nes::LinearLeakageSpec local = spec;
    local.seed = nes::derive_seed(rep, "unbiasedness");
    const auto trial = nes::gen_linear_trial(local);
    estimates[rep] = nes::net_test(trial.codes, trial.treatment, 1, {0}).tau_hat;
  });
  const auto m = nes::sample_moments(estimates);
  const double mcse = std::sqrt(m.variance / reps);
  const double z = (m.mean - tau_j) / mcse;
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {std::fabs(z) < 3.0, fmt("mean tau_hat %.5f vs %.2f, MC SE %.5f, |z| = %.2f (<3); %d reps, %.1f s", m.mean,
                                  tau_j, mcse, std::fabs(z), reps, secs)};
}

Outcome aipw_ad_identity() {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> size(8, 400);
  int fixtures = 0, estimate_mismatch = 0, p_mismatch = 0;
  double worst_est = 0.0, worst_p = 0.0;
  while (fixtures < 100) {
    const int n = size(gen), m = 5;
    std::vector<std::uint8_t> t(n);
    std::bernoulli_distribution coin(0.2 + 0.6 * std::uniform_real_distribution<double>()(gen));
    for (auto& x : t) x = coin(gen);
    const int treated = static_cast<int>(std::count(t.begin(), t.end(), 1));
    if (treated < 2 || n - treated < 2) continue;
    std::normal_distribution<double> nd;
    Eigen::MatrixXd v(n, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) v(i, j) = 2.0 * nd(gen) + (t[i] ? 0.4 * j : 0.0) + 3.0;
    const nes::CodeMatrix codes(v);
    const nes::TreatmentAssignment treatment(t);
    const nes::Covariate constant(n, 0);
    const double empirical_pi = static_cast<double>(treated) / n;
    const auto ad = nes::ad_scan(codes, treatment);
    const auto scan = nes::aipw_scan(codes, treatment, constant, 0.5);
    for (nes::Index j = 0; j < static_cast<nes::Index>(m); ++j) {
      const auto model = nes::fit_cell_means(codes.column(j), treatment, constant, empirical_pi);
      const auto psi = nes::aipw_pseudo_outcomes(codes, treatment, constant, model, j);
      const double est = nes::sample_moments(psi).mean;
      const double diff = std::fabs(est - ad[j].result->tau_hat);
      worst_est = std::max(worst_est, diff);
      if (diff > 1e-10) ++estimate_mismatch;

      // reduced pseudo-outcomes with constant W and pi = 1/2
      const auto [x, y] = nes::split_by_arm(codes.column(j), treatment);
      const double mu1 = nes::sample_moments(x).mean, mu0 = nes::sample_moments(y).mean;
      std::vector<double> reduced(n);
      for (int i = 0; i < n; ++i) reduced[i] = t[i] ? 2.0 * v(i, j) - mu1 - mu0 : mu1 + mu0 - 2.0 * v(i, j);
      const auto ref = nes::one_sample_t_test(reduced, 0.0);
      const double p = scan[j].result->p_value;
      worst_p = std::max(worst_p, std::fabs(p - ref.p_value) / std::max({p, ref.p_value, 1e-300}));
      if (!close_rel(p, ref.p_value, 1e-10)) ++p_mismatch;
    }
    ++fixtures;
  }
  return {estimate_mismatch == 0 && p_mismatch == 0,
          fmt("%d fixtures x 5 neurons: estimate mismatches %d (worst %.2e, <=1e-10), p-value mismatches %d "
              "(worst rel %.2e)",
              fixtures, estimate_mismatch, worst_est, p_mismatch, worst_p)};
}

nes::IndexSet brute_bonferroni(const std::vector<double>& p, double alpha) {
  nes::IndexSet out;
  for (nes::Index j = 0; j < p.size(); ++j)
    if (p[j] < alpha / static_cast<double>(p.size())) out.push_back(j);
  return out;
}

// largest k with at least k p-values <= k * alpha / m; reject every p <= that threshold
nes::IndexSet brute_bh(const std::vector<double>& p, double alpha) {
  const nes::Index m = p.size();
  nes::Index best = 0;
  for (nes::Index k = 1; k <= m; ++k) {
    const double thr = static_cast<double>(k) * alpha / static_cast<double>(m);
    nes::Index count = 0;
    for (double x : p) count += x <= thr;
    if (count >= k) best = k;
  }
  nes::IndexSet out;
  if (best == 0) return out;
  const double thr = static_cast<double>(best) * alpha / static_cast<double>(m);
  for (nes::Index j = 0; j < m; ++j)
    if (p[j] <= thr) out.push_back(j);
  return out;
}

Outcome multiplicity_oracles() {
  const double grid[] = {0.001, 0.01, 0.1, 1.0};
  long vectors = 0, mismatches = 0;
  for (double alpha : {0.05, 0.1}) {
    for (int len = 1; len <= 10; ++len) {
      std::vector<int> digits(len, 0);
      std::vector<double> p(len);
      while (true) {
        for (int i = 0; i < len; ++i) p[i] = grid[digits[i]];
        ++vectors;
        if (nes::bonferroni_select(p, alpha) != brute_bonferroni(p, alpha)) ++mismatches;
        if (nes::bh_fdr_select(p, alpha) != brute_bh(p, alpha)) ++mismatches;
        int pos = 0;
        while (pos < len && ++digits[pos] == 4) digits[pos++] = 0;
        if (pos == len) break;
      }
    }
  }
  return {mismatches == 0, fmt("%ld p-vectors (lengths 1..10, alpha 0.05 and 0.1), %ld discrepancies", vectors, mismatches)};
}

Outcome distribution_accuracy() {
  const double cauchy = nes::student_t_sf(1.0, 1.0);
  bool half = true;
  for (double df : {1.0, 2.0, 5.0, 30.0}) half = half && nes::student_t_sf(0.0, df) == 0.5;
  const double q = nes::normal_quantile(0.975);
  const bool pass = std::fabs(cauchy - 0.25) <= 1e-9 && half && std::fabs(q - 1.95996) <= 1e-4;
  return {pass, fmt("sf(1, df=1) = %.15f; sf(0, df) == 0.5 exactly: %s; normal_quantile(0.975) = %.12f", cauchy,
                    half ? "yes" : "no", q)};
}

Outcome dgp_marginals() {
  nes::CoEffectSpec spec;
  spec.n = 100000;
  spec.ate = 0.4;
  spec.seed = 0;
  spec.code.m = 3;
  const auto trial = nes::gen_coeffect(spec);
  const auto p = nes::coeffect_probabilities(spec.ate);
  double count[2][2] = {}, y1[2][2] = {}, y2[2] = {}, nt[2] = {}, nw = 0;
  for (nes::Index i = 0; i < spec.n; ++i) {
    const int t = trial.treatment[i], w = trial.covariate[i];
    count[t][w] += 1;
    nt[t] += 1;
    nw += w;
    y1[t][w] += trial.latents(static_cast<Eigen::Index>(i), 0);
    y2[t] += trial.latents(static_cast<Eigen::Index>(i), 1);
  }
  struct Check {
    const char* name;
    double hits, total, target;
  };
  const double n = static_cast<double>(spec.n);
  const Check checks[] = {{"P(T=1)", nt[1], n, 0.5},
                          {"P(W=1)", nw, n, 0.5},
                          {"P(Y2=1|T=1)", y2[1], nt[1], p.y2_treated},
                          {"P(Y2=1|T=0)", y2[0], nt[0], p.y2_control},
                          {"P(Y1=1|T=1,W=1)", y1[1][1], count[1][1], p.y1_t1w1},
                          {"P(Y1=1|T=1,W=0)", y1[1][0], count[1][0], p.y1_t1w0},
                          {"P(Y1=1|T=0,W=1)", y1[0][1], count[0][1], p.y1_t0w1},
                          {"P(Y1=1|T=0,W=0)", y1[0][0], count[0][0], p.y1_t0w0}};
  bool pass = true;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : checks) {
    const double se = std::sqrt(c.target * (1.0 - c.target) / c.total);
    const double z = std::fabs(c.hits / c.total - c.target) / se;
    if (z > worst) worst = z, worst_name = c.name;
    pass = pass && z <= 3.0;
  }
  return {pass, fmt("8 cell frequencies at n=1e5, ATE=0.4; worst |z| = %.2f at %s (<=3); P(Y2=1|T=1) = %.4f vs 0.7",
                    worst, worst_name.c_str(), y2[1] / nt[1])};
}

std::string grid_csv(const nes::GridSpec& spec, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary);
    nes::write_rows_csv(out, nes::run_grid(spec));
  }
  std::ifstream in(path, std::ios::binary);
  std::ostringstream bytes;
  bytes << in.rdbuf();
  return bytes.str();
}

Outcome end_to_end_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "nes_acceptance_determinism";
  std::filesystem::create_directories(dir);
  int identical = 0, total = 0;
  std::size_t bytes = 0;
  for (auto kind : {nes::DgpKind::coeffect, nes::DgpKind::linear, nes::DgpKind::paradox}) {
    nes::GridSpec spec;
    spec.n_values = {30, 100, 250};
    spec.ate_values = {0.0, 0.4, 0.8};
    spec.seeds = {0, 1, 2};
    spec.dgp.kind = kind;
    spec.workers = 1;
    const auto a = grid_csv(spec, dir / "a.csv");
    spec.workers = workers();
    spec.options.workers = 2;
    const auto b = grid_csv(spec, dir / "b.csv");
    ++total;
    identical += a == b && !a.empty();
    bytes += a.size();
  }
  std::filesystem::remove_all(dir);
  return {identical == total,
          fmt("%d/%d grids (coeffect, linear, paradox) byte-identical across reruns and worker counts; %zu bytes",
              identical, total, bytes)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"paradox reproduction", paradox_reproduction},
      {"zero-effect calibration", zero_effect_calibration},
      {"NES consistency", nes_consistency},
      {"NET-Welch reduction", net_welch_reduction},
      {"stratified estimator unbiasedness", stratified_unbiasedness},
      {"AIPW-AD identity", aipw_ad_identity},
      {"multiplicity oracles", multiplicity_oracles},
      {"distribution accuracy", distribution_accuracy},
      {"DGP marginals", dgp_marginals},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  criterion %2zu  %-34s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
