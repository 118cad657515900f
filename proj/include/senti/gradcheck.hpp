#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "senti/tensor.hpp"

namespace senti {

// A parameter under test: `value` is perturbed in place and restored,
// `analytic` is the tape gradient for the same coordinates.
struct GradCheckEntry {
  std::string name;
  Matrix* value = nullptr;
  Matrix analytic;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_name;
  Index worst_row = -1;
  Index worst_col = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
// derivative is ~0 from reporting huge relative errors on round-off.
double relative_error(double analytic, double numeric, double floor = 1e-4);

// Central differences (f(x + eps) - f(x - eps)) / 2 eps on every coordinate
// of every entry, compared with the entry's analytic gradient.
// `loss` must be deterministic in the entry values.
GradCheckReport finite_diff_check(const std::function<double()>& loss, std::span<GradCheckEntry> params,
                                  double eps = 1e-5);

// Numeric gradient of `loss` with respect to *value.
Matrix numeric_gradient(const std::function<double()>& loss, Matrix& value, double eps = 1e-5);

}  // namespace senti
