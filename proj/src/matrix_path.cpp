#include "slq/matrix_path.hpp"

#include <algorithm>
#include <cmath>

#include "slq/errors.hpp"

namespace slq {

MatrixPath MatrixPath::constant(Matrix value, bool symmetric) {
  const auto r = value.rows(), c = value.cols();
  return MatrixPath(Constant{std::move(value)}, r, c, symmetric);
}

MatrixPath MatrixPath::zero(Eigen::Index rows, Eigen::Index cols) {
  return constant(Matrix::Zero(rows, cols));
}

MatrixPath MatrixPath::polynomial(std::vector<Matrix> coefficients, bool symmetric) {
  if (coefficients.empty()) throw DimensionError("polynomial path needs at least one coefficient");
  const auto r = coefficients.front().rows(), c = coefficients.front().cols();
  for (const auto& m : coefficients) {
    if (m.rows() != r || m.cols() != c) {
      throw DimensionError("polynomial path: coefficient shapes differ");
    }
  }
  return MatrixPath(Polynomial{std::move(coefficients)}, r, c, symmetric);
}

MatrixPath MatrixPath::sampled(std::vector<double> times, std::vector<Matrix> values,
                               bool symmetric) {
  if (times.empty() || times.size() != values.size()) {
    throw DimensionError("sampled path: times and values must be non-empty and of equal length");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw DimensionError("sampled path: times must be strictly increasing");
    }
  }
  const auto r = values.front().rows(), c = values.front().cols();
  for (const auto& m : values) {
    if (m.rows() != r || m.cols() != c) throw DimensionError("sampled path: value shapes differ");
  }
  return MatrixPath(Sampled{std::move(times), std::move(values)}, r, c, symmetric);
}

MatrixPath MatrixPath::function(Eigen::Index rows, Eigen::Index cols,
                                std::function<Matrix(double)> fn, bool symmetric) {
  return MatrixPath(Function{std::move(fn)}, rows, cols, symmetric);
}

Matrix MatrixPath::eval_raw(double s) const {
  return std::visit(
      [&](const auto& rep) -> Matrix {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return rep.value;
        } else if constexpr (std::is_same_v<T, Polynomial>) {
          Matrix acc = rep.coefficients.back();
          for (auto k = rep.coefficients.size() - 1; k-- > 0;) {
            acc = acc * s + rep.coefficients[k];
          }
          return acc;
        } else if constexpr (std::is_same_v<T, Sampled>) {
          const auto& ts = rep.times;
          if (s <= ts.front()) return rep.values.front();
          if (s >= ts.back()) return rep.values.back();
          const auto it = std::upper_bound(ts.begin(), ts.end(), s);
          const auto k = static_cast<std::size_t>(it - ts.begin());
          const double w = (s - ts[k - 1]) / (ts[k] - ts[k - 1]);
          return (1.0 - w) * rep.values[k - 1] + w * rep.values[k];
        } else {
          return rep.fn(s);
        }
      },
      rep_);
}

Matrix MatrixPath::operator()(double s) const {
  if (!symmetric_) return eval_raw(s);
  return sym(eval_raw(s));
}

MatrixPath MatrixPath::as_symmetric() const {
  MatrixPath out = *this;
  out.symmetric_ = true;
  return out;
}

double MatrixPath::max_asymmetry(const TimeGrid& grid) const {
  if (rows_ != cols_) return 0.0;
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    const Matrix m = eval_raw(grid.node(k));
    worst = std::max(worst, (m - m.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

double MatrixPath::max_norm(const TimeGrid& grid) const {
  if (rows_ == 0 || cols_ == 0) return 0.0;
  if (kind() == Kind::constant) return std::get<Constant>(rep_).value.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    worst = std::max(worst, (*this)(grid.node(k)).cwiseAbs().maxCoeff());
  }
  return worst;
}

bool MatrixPath::is_exactly_zero() const {
  if (rows_ == 0 || cols_ == 0) return true;
  return std::visit(
      [](const auto& rep) {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return rep.value.isZero(0.0);
        } else if constexpr (std::is_same_v<T, Polynomial>) {
          return std::all_of(rep.coefficients.begin(), rep.coefficients.end(),
                             [](const Matrix& m) { return m.isZero(0.0); });
        } else if constexpr (std::is_same_v<T, Sampled>) {
          return std::all_of(rep.values.begin(), rep.values.end(),
                             [](const Matrix& m) { return m.isZero(0.0); });
        } else {
          return false;
        }
      },
      rep_);
}

MatrixPath MatrixPath::resampled(const TimeGrid& grid) const {
  std::vector<double> ts = grid.nodes();
  std::vector<Matrix> vs;
  vs.reserve(ts.size());
  for (double t : ts) vs.push_back((*this)(t));
  return sampled(std::move(ts), std::move(vs), symmetric_);
}

}  // namespace slq
