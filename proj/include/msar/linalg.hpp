#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "msar/errors.hpp"

namespace msar {

/**
 * Lower Cholesky factor of a symmetric positive definite matrix.
 *
 * Factorization is attempted on the matrix as given, then with a diagonal
 * jitter of eps * trace(s)/dim for eps in {1e-10, 1e-8, 1e-6}. Throws
 * NotPositiveDefinite once the ladder is exhausted. All solves in the
 * library run through factors produced here; no explicit inverses are
 * formed anywhere.
 */
inline Eigen::MatrixXd cholesky(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols()) {
    throw LengthMismatch("cholesky needs a square matrix, got " +
                         std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()));
  }
  const auto dim = s.rows();
  const double scale = s.trace() / static_cast<double>(dim);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    // A positive definite matrix has a positive diagonal, so a non-positive
    // (or non-finite) trace cannot be round-off: fail without jitter.
    throw NotPositiveDefinite("matrix trace is not positive (dim " +
                              std::to_string(dim) + ")");
  }

  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  for (double eps : {1e-10, 1e-8, 1e-6}) {
    Eigen::MatrixXd jittered = s;
    jittered.diagonal().array() += eps * scale;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw NotPositiveDefinite(
      "matrix is not positive definite after jitter escalation (dim " +
      std::to_string(dim) + ")");
}

// log det(S) from its lower Cholesky factor.
inline double log_det_from_cholesky(const Eigen::MatrixXd& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

/**
 * Symmetric positive definite matrix.
 *
 * Construction checks squareness and symmetry (1e-10 relative) and stores
 * the symmetrized matrix. Positive definiteness is enforced lazily by
 * cholesky() at the point of use.
 */
class SpdMatrix {
 public:
  explicit SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) {
      throw InvariantViolation("SpdMatrix needs a square matrix, got " +
                               std::to_string(m_.rows()) + "x" +
                               std::to_string(m_.cols()));
    }
    if (m_.rows() == 0) {
      throw InvariantViolation("SpdMatrix must have positive dimension");
    }
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    const double skew = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
    if (!(skew <= 1e-10 * scale)) {
      throw InvariantViolation("matrix is asymmetric beyond tolerance: " +
                               std::to_string(skew / scale));
    }
    m_ = ((m_ + m_.transpose()) / 2.0).eval();
  }

  static SpdMatrix identity(Eigen::Index dim) {
    return SpdMatrix(Eigen::MatrixXd::Identity(dim, dim));
  }

  const Eigen::MatrixXd& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Eigen::MatrixXd m_;
};

/**
 * Probability vector: non-negative entries summing to 1.
 *
 * Construction validates the sum to 1e-12, clamps round-off negatives no
 * larger than 1e-12 in magnitude, and renormalizes exactly.
 */
class ProbVector {
 public:
  explicit ProbVector(Eigen::VectorXd v) : v_(std::move(v)) {
    if (v_.size() == 0) {
      throw InvariantViolation("probability vector must be non-empty");
    }
    for (Eigen::Index i = 0; i < v_.size(); ++i) {
      if (!std::isfinite(v_[i]) || v_[i] < -1e-12) {
        throw InvariantViolation("probability entry " + std::to_string(i) +
                                 " is " + std::to_string(v_[i]));
      }
      if (v_[i] < 0.0) v_[i] = 0.0;
    }
    const double total = v_.sum();
    if (std::abs(total - 1.0) > 1e-12) {
      throw InvariantViolation("probabilities sum to " +
                               std::to_string(total));
    }
    v_ /= total;
  }

  static ProbVector uniform(Eigen::Index size) {
    return ProbVector(Eigen::VectorXd::Constant(
        size, 1.0 / static_cast<double>(size)));
  }

  const Eigen::VectorXd& vec() const { return v_; }
  Eigen::Index size() const { return v_.size(); }
  double operator[](Eigen::Index i) const { return v_[i]; }

 private:
  Eigen::VectorXd v_;
};

}  // namespace msar
