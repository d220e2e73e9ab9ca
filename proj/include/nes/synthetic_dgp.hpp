#pragma once

// Seeded generators for the synthetic trials: the entangled-channel paradox
// model, the binary co-effect RCT, and a linear code model in which the
// code-level effect is V * tau_Y.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nes/effect_estimators.hpp"
#include "nes/error.hpp"
#include "nes/rng.hpp"
#include "nes/types.hpp"

namespace nes {

struct GeneratedTrial {
  TreatmentAssignment treatment;
  CodeMatrix codes;
  Eigen::MatrixXd latents;  // n x (number of latent concepts)
  std::vector<std::string> latent_names;
  Covariate covariate;  // exogenous W when the model has one, else empty
  IndexSet ground_truth_neurons;
};

// ---------------------------------------------------------------------------
// Linear leakage code model

struct LinearLeakageSpec {
  Index n = 0;
  Index m = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd effect_directions;  // m x r, column k is v_k
  Eigen::VectorXd effect_sizes;       // tau_Y, length r
  double noise_sd = 1.0;
  Eigen::VectorXd baseline;  // length m; empty means zero
  IndexSet principal_neurons;  // j_k per column
};

inline Index concept_count(const LinearLeakageSpec& spec) {
  return static_cast<Index>(spec.effect_directions.cols());
}

/// Checks distinct principal neurons, strict principal dominance within
/// each principal row, and full column rank of the directions.
inline void validate(const LinearLeakageSpec& spec) {
  const auto m = static_cast<Eigen::Index>(spec.m);
  const auto r = spec.effect_directions.cols();
  require(spec.m >= 1 && spec.effect_directions.rows() == m && r >= 1, ErrorKind::invalid_argument,
          "effect directions must be m x r with r >= 1");
  require(spec.effect_sizes.size() == r, ErrorKind::invalid_argument, "effect_sizes length must equal r");
  require(spec.noise_sd >= 0.0, ErrorKind::invalid_argument, "noise_sd must be non-negative");
  require(spec.baseline.size() == 0 || spec.baseline.size() == m, ErrorKind::invalid_argument,
          "baseline length must equal m");
  require(spec.principal_neurons.size() == static_cast<Index>(r), ErrorKind::invalid_argument,
          "one principal neuron per direction");
  IndexSet sorted = spec.principal_neurons;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::invalid_argument,
          "principal neurons must be distinct");
  for (Eigen::Index k = 0; k < r; ++k) {
    const auto j = static_cast<Eigen::Index>(spec.principal_neurons[static_cast<Index>(k)]);
    require(j < m, ErrorKind::invalid_argument, "principal neuron out of range");
    for (Eigen::Index l = 0; l < r; ++l) {
      if (l == k) continue;
      require(std::fabs(spec.effect_directions(j, k)) > std::fabs(spec.effect_directions(j, l)),
              ErrorKind::invalid_argument, "principal entry must dominate other directions on its neuron");
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(spec.effect_directions);
  require(qr.rank() == r, ErrorKind::invalid_argument, "effect directions must be linearly independent");
}

/// Direction matrix with the given principal entries and off-coordinate
/// leakage drawn once from Uniform[-leakage, leakage].
inline Eigen::MatrixXd make_effect_directions(Index m, const IndexSet& principals,
                                              const std::vector<double>& principal_magnitudes, double leakage,
                                              std::uint64_t seed) {
  require(principals.size() == principal_magnitudes.size(), ErrorKind::invalid_argument,
          "one magnitude per principal neuron");
  require(leakage >= 0.0, ErrorKind::invalid_argument, "leakage must be non-negative");
  CounterRng rng(derive_seed(seed, "directions"));
  Eigen::MatrixXd v(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(principals.size()));
  for (Eigen::Index k = 0; k < v.cols(); ++k)
    for (Eigen::Index j = 0; j < v.rows(); ++j) v(j, k) = leakage > 0.0 ? rng.uniform(-leakage, leakage) : 0.0;
  for (Index k = 0; k < principals.size(); ++k)
    v(static_cast<Eigen::Index>(principals[k]), static_cast<Eigen::Index>(k)) = principal_magnitudes[k];
  return v;
}

/// r distinct channels out of m, drawn by a seeded partial shuffle.
inline IndexSet draw_principal_neurons(Index m, Index r, std::uint64_t seed) {
  require(r <= m, ErrorKind::invalid_argument, "more concepts than channels");
  CounterRng rng(derive_seed(seed, "principals"));
  IndexSet pool(m);
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index k = 0; k < r; ++k) {
    const Index pick = k + static_cast<Index>(rng.below(m - k));
    std::swap(pool[k], pool[pick]);
  }
  pool.resize(r);
  return pool;
}

/// Convenience constructor: seeded principal neurons and leakage entries.
inline LinearLeakageSpec make_linear_leakage_spec(Index n, Index m, std::vector<double> effect_sizes, double leakage,
                                                  double noise_sd, std::uint64_t seed,
                                                  double principal_magnitude = 1.0) {
  LinearLeakageSpec spec;
  spec.n = n;
  spec.m = m;
  spec.seed = seed;
  spec.principal_neurons = draw_principal_neurons(m, effect_sizes.size(), seed);
  spec.effect_directions = make_effect_directions(
      m, spec.principal_neurons, std::vector<double>(effect_sizes.size(), principal_magnitude), leakage, seed);
  spec.effect_sizes = Eigen::Map<const Eigen::VectorXd>(effect_sizes.data(), static_cast<Eigen::Index>(effect_sizes.size()));
  spec.noise_sd = noise_sd;
  validate(spec);
  return spec;
}

/// codes_i = baseline + sum_k latents(i, k) * v_k + N(0, noise_sd^2 I).
inline CodeMatrix gen_linear_leakage(const LinearLeakageSpec& spec, const Eigen::MatrixXd& latents) {
  validate(spec);
  require(latents.rows() == static_cast<Eigen::Index>(spec.n), ErrorKind::invalid_argument,
          "latents must have one row per unit");
  require(latents.cols() == spec.effect_directions.cols(), ErrorKind::invalid_argument,
          "latents must have one column per effect direction");
  Eigen::MatrixXd codes = latents * spec.effect_directions.transpose();
  if (spec.baseline.size() != 0) codes.rowwise() += spec.baseline.transpose();
  if (spec.noise_sd > 0.0) {
    CounterRng rng(derive_seed(spec.seed, "noise"));
    for (Eigen::Index i = 0; i < codes.rows(); ++i)
      for (Eigen::Index j = 0; j < codes.cols(); ++j) codes(i, j) += spec.noise_sd * rng.normal();
  }
  return CodeMatrix(std::move(codes));
}

inline IndexSet effective_ground_truth(const LinearLeakageSpec& spec) {
  IndexSet out;
  for (Index k = 0; k < spec.principal_neurons.size(); ++k)
    if (spec.effect_sizes(static_cast<Eigen::Index>(k)) != 0.0) out.push_back(spec.principal_neurons[k]);
  std::sort(out.begin(), out.end());
  return out;
}

/// Full trial from the linear model with Gaussian latents
/// Y_k | T = t ~ N(tau_k * t, 1) and T ~ Bernoulli(0.5).
inline GeneratedTrial gen_linear_trial(const LinearLeakageSpec& spec) {
  validate(spec);
  require(spec.n >= 4, ErrorKind::invalid_argument, "need at least four units");
  const Index r = concept_count(spec);
  CounterRng rng(derive_seed(spec.seed, "latents"));
  std::vector<std::uint8_t> arms(spec.n);
  Eigen::MatrixXd latents(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(r));
  for (Index i = 0; i < spec.n; ++i) {
    arms[i] = rng.bernoulli(0.5) ? 1 : 0;
    for (Index k = 0; k < r; ++k)
      latents(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          spec.effect_sizes(static_cast<Eigen::Index>(k)) * arms[i] + rng.normal();
  }
  GeneratedTrial trial;
  trial.treatment = TreatmentAssignment(std::move(arms));
  trial.codes = gen_linear_leakage(spec, latents);
  trial.latents = std::move(latents);
  for (Index k = 0; k < r; ++k) trial.latent_names.push_back("Y" + std::to_string(k + 1));
  trial.ground_truth_neurons = effective_ground_truth(spec);
  return trial;
}

struct LeakageProfile {
  IndexSet leakage_set;  // ascending
  double leakage_index = 0.0;
};

/// A_eps = union over k of { j : |v_kj| >= eps }, rho_eps = |A_eps| / m.
inline LeakageProfile leakage_profile(const LinearLeakageSpec& spec, double epsilon) {
  require(epsilon > 0.0, ErrorKind::invalid_argument, "epsilon must be positive");
  LeakageProfile out;
  const auto& v = spec.effect_directions;
  for (Eigen::Index j = 0; j < v.rows(); ++j) {
    if ((v.row(j).array().abs() >= epsilon).any()) out.leakage_set.push_back(static_cast<Index>(j));
  }
  out.leakage_index = v.rows() == 0 ? 0.0 : static_cast<double>(out.leakage_set.size()) / static_cast<double>(v.rows());
  return out;
}

// ---------------------------------------------------------------------------
// Paradox model: channel 0 is the outcome Y itself, every other channel
// leaks `leakage * Y`.

struct ParadoxSpec {
  Index n = 1000;
  Index m = 50;
  double tau = 1.0;
  double leakage = 0.01;
  std::uint64_t seed = 0;
};

inline void validate(const ParadoxSpec& spec) {
  require(spec.n >= 4, ErrorKind::invalid_argument, "paradox model needs n >= 4");
  require(spec.m >= 2, ErrorKind::invalid_argument, "paradox model needs m >= 2");
  require(spec.leakage >= 0.0 && std::isfinite(spec.leakage), ErrorKind::invalid_argument,
          "leakage must be non-negative");
  require(std::isfinite(spec.tau), ErrorKind::invalid_argument, "tau must be finite");
}

inline GeneratedTrial gen_paradox(const ParadoxSpec& spec) {
  validate(spec);
  CounterRng rng(derive_seed(spec.seed, "paradox"));
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto m = static_cast<Eigen::Index>(spec.m);
  std::vector<std::uint8_t> arms(spec.n);
  Eigen::MatrixXd codes(n, m);
  Eigen::MatrixXd latents(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    arms[static_cast<Index>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    const double y = rng.normal(spec.tau * arms[static_cast<Index>(i)], 1.0);
    latents(i, 0) = y;
    codes(i, 0) = y;
    for (Eigen::Index j = 1; j < m; ++j) codes(i, j) = rng.normal(spec.leakage * y, 1.0);
  }
  GeneratedTrial trial;
  trial.treatment = TreatmentAssignment(std::move(arms));
  trial.codes = CodeMatrix(std::move(codes));
  trial.latents = std::move(latents);
  trial.latent_names = {"Y"};
  if (spec.tau != 0.0) trial.ground_truth_neurons = {0};
  return trial;
}

// ---------------------------------------------------------------------------
// Co-effect RCT: T shifts Y1 and Y2, the exogenous W modifies only Y1.
// Codes come from the linear leakage model over the concepts (Y1, Y2, W).

struct CodeModel {
  Index m = 50;
  double leakage = 0.1;
  double noise_sd = 0.5;
  double principal_magnitude = 1.0;
};

struct CoEffectSpec {
  Index n = 500;
  double ate = 0.0;
  std::uint64_t seed = 0;
  CodeModel code;
};

// Cell probabilities of the co-effect model.
struct CoEffectProbabilities {
  double y2_treated, y2_control;      // Pr(Y2 = 1 | T = t)
  double y1_t1w1, y1_t1w0, y1_t0w1, y1_t0w0;  // Pr(Y1 = 1 | T = t, W = w)
};

inline CoEffectProbabilities coeffect_probabilities(double ate) {
  return {0.5 + ate / 2.0, 0.5 - ate / 2.0, 0.5 + ate / 2.0, 0.2 + ate, 0.5 - ate / 2.0, 0.2};
}

inline void validate(const CoEffectSpec& spec) {
  require(spec.n >= 4, ErrorKind::invalid_argument, "co-effect model needs n >= 4");
  require(spec.ate >= 0.0 && spec.ate <= 0.8, ErrorKind::invalid_argument, "ate must lie in [0, 0.8]");
  require(spec.code.m >= 3, ErrorKind::invalid_argument, "co-effect codes need m >= 3");
  require(spec.code.leakage >= 0.0 && spec.code.leakage < spec.code.principal_magnitude,
          ErrorKind::invalid_argument, "leakage must be below the principal magnitude");
}

/// The code model used for a co-effect spec; concept order is (Y1, Y2, W).
inline LinearLeakageSpec coeffect_code_spec(const CoEffectSpec& spec) {
  LinearLeakageSpec code;
  code.n = spec.n;
  code.m = spec.code.m;
  code.seed = derive_seed(spec.seed, "codes");
  code.principal_neurons = draw_principal_neurons(code.m, 3, code.seed);
  code.effect_directions = make_effect_directions(code.m, code.principal_neurons,
                                                  std::vector<double>(3, spec.code.principal_magnitude),
                                                  spec.code.leakage, code.seed);
  code.effect_sizes = Eigen::Vector3d(spec.ate, spec.ate, 0.0);
  code.noise_sd = spec.code.noise_sd;
  return code;
}

inline GeneratedTrial gen_coeffect(const CoEffectSpec& spec) {
  validate(spec);
  const CoEffectProbabilities p = coeffect_probabilities(spec.ate);
  CounterRng rng(derive_seed(spec.seed, "coeffect"));
  std::vector<std::uint8_t> arms(spec.n);
  Covariate w(spec.n);
  Eigen::MatrixXd latents(static_cast<Eigen::Index>(spec.n), 3);
  for (Index i = 0; i < spec.n; ++i) {
    const bool t = rng.bernoulli(0.5);
    const bool wi = rng.bernoulli(0.5);
    const double p1 = t ? (wi ? p.y1_t1w1 : p.y1_t1w0) : (wi ? p.y1_t0w1 : p.y1_t0w0);
    const bool y1 = rng.bernoulli(p1);
    const bool y2 = rng.bernoulli(t ? p.y2_treated : p.y2_control);
    arms[i] = t ? 1 : 0;
    w[i] = wi ? 1 : 0;
    const auto row = static_cast<Eigen::Index>(i);
    latents(row, 0) = y1;
    latents(row, 1) = y2;
    latents(row, 2) = wi;
  }
  const LinearLeakageSpec code = coeffect_code_spec(spec);
  GeneratedTrial trial;
  trial.treatment = TreatmentAssignment(std::move(arms));
  trial.codes = gen_linear_leakage(code, latents);
  trial.latents = std::move(latents);
  trial.latent_names = {"Y1", "Y2", "W"};
  trial.covariate = std::move(w);
  trial.ground_truth_neurons = effective_ground_truth(code);
  return trial;
}

}  // namespace nes
