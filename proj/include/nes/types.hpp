#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nes/error.hpp"

namespace nes {

using Index = std::size_t;
using IndexSet = std::vector<Index>;

// n units x m channels of real-valued code activations. Stored column-major
// so that a single channel is a contiguous span.
class CodeMatrix {
 public:
  CodeMatrix() = default;

  explicit CodeMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    require(values_.rows() >= 1 && values_.cols() >= 1, ErrorKind::invalid_argument,
            "code matrix needs at least one unit and one channel");
    require(values_.allFinite(), ErrorKind::non_finite_value, "code matrix contains non-finite entries");
  }

  Index units() const { return static_cast<Index>(values_.rows()); }
  Index channels() const { return static_cast<Index>(values_.cols()); }

  double operator()(Index unit, Index channel) const {
    return values_(static_cast<Eigen::Index>(unit), static_cast<Eigen::Index>(channel));
  }

  std::span<const double> column(Index channel) const {
    return {values_.data() + channel * units(), units()};
  }

  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

// Binary arm label per unit (1 = treated, 0 = control).
class TreatmentAssignment {
 public:
  TreatmentAssignment() = default;

  explicit TreatmentAssignment(std::vector<std::uint8_t> arms) : arms_(std::move(arms)) {
    for (auto a : arms_) {
      require(a == 0 || a == 1, ErrorKind::non_binary_treatment, "treatment values must be 0 or 1");
      treated_ += a;
    }
  }

  Index size() const { return arms_.size(); }
  bool treated(Index unit) const { return arms_[unit] == 1; }
  std::uint8_t operator[](Index unit) const { return arms_[unit]; }
  Index treated_count() const { return treated_; }
  Index control_count() const { return arms_.size() - treated_; }
  const std::vector<std::uint8_t>& arms() const { return arms_; }

 private:
  std::vector<std::uint8_t> arms_;
  Index treated_ = 0;
};

inline void require_matching(const CodeMatrix& codes, const TreatmentAssignment& treatment) {
  require(codes.units() == treatment.size(), ErrorKind::invalid_argument,
          "code matrix has " + std::to_string(codes.units()) + " units but treatment has " +
              std::to_string(treatment.size()));
}

// Splits one channel into (treated, control) samples, preserving unit order.
inline std::pair<std::vector<double>, std::vector<double>> split_by_arm(std::span<const double> values,
                                                                        const TreatmentAssignment& treatment) {
  std::pair<std::vector<double>, std::vector<double>> arms;
  arms.first.reserve(treatment.treated_count());
  arms.second.reserve(treatment.control_count());
  for (Index i = 0; i < values.size(); ++i) {
    (treatment.treated(i) ? arms.first : arms.second).push_back(values[i]);
  }
  return arms;
}

}  // namespace nes
