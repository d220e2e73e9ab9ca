#pragma once

// Neural effect search: each round tests every unselected channel with the
// neural effect test given the current selection, gates the p-values with a
// multiplicity rule over the round's hypotheses, and adds the rejected
// channel with the largest |tau_hat|. Stops when nothing is rejected.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nes/effect_estimators.hpp"
#include "nes/error.hpp"
#include "nes/hypothesis_tests.hpp"
#include "nes/neural_effect_test.hpp"
#include "nes/parallel.hpp"
#include "nes/types.hpp"

namespace nes {

enum class Correction { bonferroni, bh_fdr, none };
enum class Estimator { ad, aipw };
enum class HaltReason { no_rejections, max_rounds, all_neurons_selected };

inline std::string_view to_string(Correction c) {
  switch (c) {
    case Correction::bonferroni: return "bonferroni";
    case Correction::bh_fdr: return "bh-fdr";
    case Correction::none: return "none";
  }
  return "unknown";
}

inline std::string_view to_string(Estimator e) { return e == Estimator::ad ? "ad" : "aipw"; }

inline std::string_view to_string(HaltReason r) {
  switch (r) {
    case HaltReason::no_rejections: return "no-rejections";
    case HaltReason::max_rounds: return "max-rounds";
    case HaltReason::all_neurons_selected: return "all-neurons-selected";
  }
  return "unknown";
}

inline Correction parse_correction(std::string_view s) {
  if (s == "bonferroni") return Correction::bonferroni;
  if (s == "bh-fdr" || s == "fdr") return Correction::bh_fdr;
  if (s == "none" || s == "t") return Correction::none;
  throw Error(ErrorKind::invalid_argument, "unknown correction '" + std::string(s) + "'");
}

inline Estimator parse_estimator(std::string_view s) {
  if (s == "ad") return Estimator::ad;
  if (s == "aipw") return Estimator::aipw;
  throw Error(ErrorKind::invalid_argument, "unknown estimator '" + std::string(s) + "'");
}

struct NesConfig {
  double alpha = 0.05;
  Correction correction = Correction::bonferroni;
  Index max_rounds = 0;  // 0 = number of channels
  NetConfig net;
  // Estimator for the first round (empty selection); later rounds always
  // use the neural effect test.
  Estimator estimator = Estimator::ad;
  double propensity = 0.5;
  unsigned workers = 1;
};

struct RoundRecord {
  IndexSet selected_before;
  Index hypotheses = 0;
  std::vector<NeuronTest> tests;  // one per unselected channel, ascending
  IndexSet rejected;              // ascending
  std::optional<Index> chosen;
};

struct DiscoveryReport {
  IndexSet selected;  // selection order
  std::vector<RoundRecord> rounds;
  HaltReason halted_reason = HaltReason::no_rejections;
};

inline SelectionKind gate_kind(Correction c) {
  switch (c) {
    case Correction::bonferroni: return SelectionKind::bonferroni;
    case Correction::bh_fdr: return SelectionKind::bh_fdr;
    case Correction::none: return SelectionKind::uncorrected_t;
  }
  return SelectionKind::bonferroni;
}

/// Runs the recursion (iteratively) starting from `initial` selections.
/// `covariate` is only read when the first round uses the AIPW estimator;
/// an empty span means a constant covariate.
inline DiscoveryReport nes_search(const CodeMatrix& codes, const TreatmentAssignment& treatment,
                                  const NesConfig& config, const IndexSet& initial = {},
                                  std::span<const std::uint8_t> covariate = {}) {
  require_matching(codes, treatment);
  require(codes.units() >= 4, ErrorKind::invalid_argument, "NES needs at least four units");
  require(treatment.treated_count() >= 1 && treatment.control_count() >= 1, ErrorKind::invalid_argument,
          "both arms must be represented");
  require(config.alpha > 0.0 && config.alpha < 1.0, ErrorKind::invalid_argument, "alpha must lie in (0, 1)");
  validate(config.net);

  const Index m = codes.channels();
  const Index max_rounds = config.max_rounds == 0 ? m : config.max_rounds;
  std::vector<bool> in_selection(m, false);
  for (Index s : initial) {
    require(s < m, ErrorKind::invalid_argument, "initial selection out of range");
    require(!in_selection[s], ErrorKind::invalid_argument, "initial selection has duplicates");
    in_selection[s] = true;
  }

  Covariate constant_covariate;
  if (config.estimator == Estimator::aipw && covariate.empty()) {
    constant_covariate.assign(codes.units(), 0);
    covariate = constant_covariate;
  }

  DiscoveryReport report;
  report.selected = initial;
  const SelectionRule gate{gate_kind(config.correction), config.alpha, 1};

  while (true) {
    if (report.selected.size() == m) {
      report.halted_reason = HaltReason::all_neurons_selected;
      break;
    }
    if (report.rounds.size() == max_rounds) {
      report.halted_reason = HaltReason::max_rounds;
      break;
    }

    RoundRecord round;
    round.selected_before = report.selected;
    IndexSet candidates;
    for (Index j = 0; j < m; ++j)
      if (!in_selection[j]) candidates.push_back(j);
    round.hypotheses = candidates.size();
    round.tests.resize(candidates.size());

    if (report.selected.empty() && config.estimator == Estimator::aipw) {
      const auto scan = aipw_scan(codes, treatment, covariate, config.propensity, config.workers);
      for (Index c = 0; c < candidates.size(); ++c) round.tests[c] = scan[candidates[c]];
    } else {
      const NetRound net(codes, treatment, report.selected, config.net);
      parallel_for(candidates.size(), config.workers,
                   [&](std::size_t c) { round.tests[c] = net.try_test(candidates[c]); });
    }

    round.rejected = apply_selection(round.tests, gate);
    if (!round.rejected.empty()) {
      // rejected is ascending, so a strict comparison keeps the lowest index on ties
      Index best = round.rejected.front();
      double best_abs = -1.0;
      for (Index j : round.rejected) {
        const auto& t = round.tests[static_cast<Index>(
            std::lower_bound(candidates.begin(), candidates.end(), j) - candidates.begin())];
        const double a = std::fabs(t.result->tau_hat);
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
      round.chosen = best;
    }
    const bool stop = !round.chosen.has_value();
    if (round.chosen) {
      report.selected.push_back(*round.chosen);
      in_selection[*round.chosen] = true;
    }
    report.rounds.push_back(std::move(round));
    if (stop) {
      report.halted_reason = HaltReason::no_rejections;
      break;
    }
  }
  return report;
}

}  // namespace nes
