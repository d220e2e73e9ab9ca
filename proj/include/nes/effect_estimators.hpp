#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nes/error.hpp"
#include "nes/hypothesis_tests.hpp"
#include "nes/parallel.hpp"
#include "nes/types.hpp"

namespace nes {

using Covariate = std::vector<std::uint8_t>;

namespace detail {

template <class Fn>
std::vector<NeuronTest> scan_channels(Index channels, unsigned workers, Fn&& test) {
  std::vector<NeuronTest> out(channels);
  parallel_for(channels, workers, [&](std::size_t j) {
    out[j].neuron = j;
    try {
      out[j].result = test(j);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_argument) throw;
      out[j].error = e.kind();
    }
  });
  return out;
}

}  // namespace detail

/// Associational difference: a Welch test on every channel.
inline std::vector<NeuronTest> ad_scan(const CodeMatrix& codes, const TreatmentAssignment& treatment,
                                       unsigned workers = 1) {
  require_matching(codes, treatment);
  return detail::scan_channels(codes.channels(), workers, [&](Index j) {
    const auto [treated, control] = split_by_arm(codes.column(j), treatment);
    return welch_t_test(treated, control);
  });
}

// Propensity pi(W) (a known constant in an RCT) and outcome regressions
// mu_t(w) for one channel.
struct NuisanceModel {
  double propensity = 0.5;
  std::map<std::pair<int, int>, double> outcome_means;  // (arm, covariate cell) -> mu

  double mu(int arm, int cell) const {
    const auto it = outcome_means.find({arm, cell});
    require(it != outcome_means.end(), ErrorKind::invalid_argument,
            "no outcome model for arm " + std::to_string(arm) + ", covariate cell " + std::to_string(cell));
    return it->second;
  }
};

inline void require_covariate(const TreatmentAssignment& treatment, std::span<const std::uint8_t> covariate) {
  require(covariate.size() == treatment.size(), ErrorKind::invalid_argument,
          "covariate length does not match the unit count");
}

/// Saturated outcome model: within (arm x covariate cell) sample means of
/// one channel. Every observed covariate cell needs `min_per_cell` units in
/// both arms.
inline NuisanceModel fit_cell_means(std::span<const double> column, const TreatmentAssignment& treatment,
                                    std::span<const std::uint8_t> covariate, double propensity,
                                    Index min_per_cell = 2) {
  require_covariate(treatment, covariate);
  std::map<std::pair<int, int>, std::pair<double, Index>> sums;
  std::map<int, bool> cells;
  for (Index i = 0; i < column.size(); ++i) {
    auto& [sum, count] = sums[{treatment[i], covariate[i]}];
    sum += column[i];
    ++count;
    cells[covariate[i]] = true;
  }
  NuisanceModel model;
  model.propensity = propensity;
  for (const auto& [cell, unused] : cells) {
    for (int arm = 0; arm < 2; ++arm) {
      const auto it = sums.find({arm, cell});
      const Index count = it == sums.end() ? 0 : it->second.second;
      require(count >= min_per_cell, ErrorKind::insufficient_data,
              "arm " + std::to_string(arm) + " x covariate cell " + std::to_string(cell) + " has " +
                  std::to_string(count) + " units");
      model.outcome_means[{arm, cell}] = it->second.first / static_cast<double>(count);
    }
  }
  return model;
}

/// AIPW pseudo-outcomes of channel `target`; their mean is the AIPW estimate.
inline std::vector<double> aipw_pseudo_outcomes(const CodeMatrix& codes, const TreatmentAssignment& treatment,
                                                std::span<const std::uint8_t> covariate,
                                                const NuisanceModel& nuisance, Index target) {
  require_matching(codes, treatment);
  require_covariate(treatment, covariate);
  require(target < codes.channels(), ErrorKind::invalid_argument, "target channel out of range");
  const double pi = nuisance.propensity;
  require(pi > 0.0 && pi < 1.0, ErrorKind::invalid_argument, "propensity must lie in (0, 1)");

  const auto z = codes.column(target);
  std::vector<double> out(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    const int w = covariate[i];
    const double mu1 = nuisance.mu(1, w);
    const double mu0 = nuisance.mu(0, w);
    const double t = treatment[i];
    out[i] = mu1 - mu0 + (t / pi) * (z[i] - mu1) - ((1.0 - t) / (1.0 - pi)) * (z[i] - mu0);
  }
  return out;
}

/// Per-channel AIPW test: cell-mean nuisances, known propensity, and a
/// one-sample t-test of the pseudo-outcomes against zero.
inline std::vector<NeuronTest> aipw_scan(const CodeMatrix& codes, const TreatmentAssignment& treatment,
                                         std::span<const std::uint8_t> covariate, double propensity = 0.5,
                                         unsigned workers = 1) {
  require_matching(codes, treatment);
  require_covariate(treatment, covariate);
  return detail::scan_channels(codes.channels(), workers, [&](Index j) {
    const NuisanceModel model = fit_cell_means(codes.column(j), treatment, covariate, propensity);
    const auto pseudo = aipw_pseudo_outcomes(codes, treatment, covariate, model, j);
    return one_sample_t_test(pseudo, 0.0);
  });
}

}  // namespace nes
