#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "repobs/error.hpp"

namespace repobs {

/// Row-stochastic confusion probabilities p(j, l) = P{g(V) = l | Y = j}.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;

  explicit ConfusionMatrix(std::vector<std::vector<double>> rows) : p_(std::move(rows)) {
    require(p_.size() >= 2, ErrorKind::config, "confusion matrix needs at least two classes");
    for (std::size_t j = 0; j < p_.size(); ++j) {
      require(p_[j].size() == p_.size(), ErrorKind::dimension, "confusion matrix must be square");
      double total = 0.0;
      for (double v : p_[j]) {
        require(v >= 0.0 && v <= 1.0, ErrorKind::config, "confusion entries must lie in [0,1]");
        total += v;
      }
      require(std::abs(total - 1.0) <= 1e-12, ErrorKind::config,
              "confusion row " + std::to_string(j + 1) + " does not sum to 1");
    }
  }

  /// Binary matrix with p on the diagonal.
  static ConfusionMatrix symmetric_binary(double p) { return ConfusionMatrix({{p, 1.0 - p}, {1.0 - p, p}}); }

  std::size_t M() const noexcept { return p_.size(); }
  double operator()(std::size_t j, std::size_t l) const { return p_[j][l]; }
  const std::vector<double>& row(std::size_t j) const { return p_[j]; }
  const std::vector<std::vector<double>>& rows() const noexcept { return p_; }

 private:
  std::vector<std::vector<double>> p_;
};

}  // namespace repobs
