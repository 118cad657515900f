#include "senti/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "senti/errors.hpp"

namespace senti {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

Matrix numeric_gradient(const std::function<double()>& loss, Matrix& value, double eps) {
  Matrix out(value.rows(), value.cols());
  for (Index i = 0; i < value.size(); ++i) {
    double& x = value.data()[i];
    const double saved = x;
    x = saved + eps;
    const double up = loss();
    x = saved - eps;
    const double down = loss();
    x = saved;
    out.data()[i] = (up - down) / (2.0 * eps);
  }
  return out;
}

GradCheckReport finite_diff_check(const std::function<double()>& loss, std::span<GradCheckEntry> params,
                                  double eps) {
  GradCheckReport report;
  report.max_rel_error = 0.0;
  for (GradCheckEntry& entry : params) {
    if (entry.value == nullptr) throw Error("finite_diff_check: entry '" + entry.name + "' has no value");
    Matrix& value = *entry.value;
    if (entry.analytic.rows() != value.rows() || entry.analytic.cols() != value.cols()) {
      throw ShapeError("finite_diff_check: analytic gradient shape differs for '" + entry.name + "'");
    }
    const Matrix numeric = numeric_gradient(loss, value, eps);
    for (Index r = 0; r < value.rows(); ++r) {
      for (Index c = 0; c < value.cols(); ++c) {
        const double err = relative_error(entry.analytic(r, c), numeric(r, c));
        ++report.coordinates;
        if (err > report.max_rel_error || report.worst_name.empty()) {
          report.max_rel_error = err;
          report.worst_name = entry.name;
          report.worst_row = r;
          report.worst_col = c;
          report.worst_analytic = entry.analytic(r, c);
          report.worst_numeric = numeric(r, c);
        }
      }
    }
  }
  return report;
}

}  // namespace senti
