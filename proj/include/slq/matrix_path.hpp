#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "slq/time_grid.hpp"

namespace slq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A matrix-valued function of time.
///
/// Four representations are supported:
///   - constant,
///   - per-entry polynomial in s (stored as coefficient matrices, ascending
///     powers),
///   - samples with linear interpolation (clamped outside the sample range),
///   - an arbitrary callable. Derived paths such as feedback gains built from
///     a Riccati trajectory use this form; it cannot be written to a problem
///     file.
///
/// When `symmetric()` is set every evaluation is symmetrized.
class MatrixPath {
 public:
  enum class Kind { constant, polynomial, sampled, function };

  struct Constant {
    Matrix value;
  };
  struct Polynomial {
    std::vector<Matrix> coefficients;  // M(s) = sum_k coefficients[k] s^k
  };
  struct Sampled {
    std::vector<double> times;
    std::vector<Matrix> values;
  };
  struct Function {
    std::function<Matrix(double)> fn;
  };

  MatrixPath() : MatrixPath(constant(Matrix::Zero(0, 0))) {}

  static MatrixPath constant(Matrix value, bool symmetric = false);
  static MatrixPath zero(Eigen::Index rows, Eigen::Index cols);
  static MatrixPath polynomial(std::vector<Matrix> coefficients, bool symmetric = false);
  static MatrixPath sampled(std::vector<double> times, std::vector<Matrix> values,
                            bool symmetric = false);
  static MatrixPath function(Eigen::Index rows, Eigen::Index cols,
                             std::function<Matrix(double)> fn, bool symmetric = false);

  Matrix operator()(double s) const;

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  bool symmetric() const { return symmetric_; }
  Kind kind() const { return static_cast<Kind>(rep_.index()); }

  /// Raw representation; used by the serializer.
  const auto& representation() const { return rep_; }

  /// Same path with the symmetry flag set (no validation).
  MatrixPath as_symmetric() const;

  /// Largest asymmetry max|M - M'| over the grid nodes, before symmetrization.
  double max_asymmetry(const TimeGrid& grid) const;
  /// max over grid nodes of the entry-wise max norm.
  double max_norm(const TimeGrid& grid) const;

  /// True when the representation is exactly zero everywhere.
  bool is_exactly_zero() const;

  /// Samples the path at every node of `grid`.
  MatrixPath resampled(const TimeGrid& grid) const;

 private:
  using Rep = std::variant<Constant, Polynomial, Sampled, Function>;
  MatrixPath(Rep rep, Eigen::Index rows, Eigen::Index cols, bool symmetric)
      : rep_(std::move(rep)), rows_(rows), cols_(cols), symmetric_(symmetric) {}

  Matrix eval_raw(double s) const;

  Rep rep_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  bool symmetric_;
};

/// Symmetric part (M + M')/2.
inline Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace slq
