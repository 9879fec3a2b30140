#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msar/errors.hpp"
#include "msar/linalg.hpp"
#include "msar/rng.hpp"

namespace msar {

namespace detail {

inline void check_index_set(const std::vector<int>& idx, Eigen::Index dim,
                            const char* who) {
  std::vector<bool> seen(static_cast<std::size_t>(dim), false);
  for (int i : idx) {
    if (i < 0 || i >= dim) {
      throw IndexOutOfRange(std::string(who) + ": index " + std::to_string(i) +
                            " outside [0, " + std::to_string(dim) + ")");
    }
    if (seen[static_cast<std::size_t>(i)]) {
      throw InvalidArgument(std::string(who) + ": duplicate index " +
                            std::to_string(i));
    }
    seen[static_cast<std::size_t>(i)] = true;
  }
}

}  // namespace detail

inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const SpdMatrix& cov) {
  if (x.size() != mean.size() || mean.size() != cov.dim()) {
    throw LengthMismatch("mvn_logpdf: x has " + std::to_string(x.size()) +
                         " entries, mean " + std::to_string(mean.size()) +
                         ", cov dim " + std::to_string(cov.dim()));
  }
  const Eigen::MatrixXd lower = cholesky(cov.mat());
  const Eigen::VectorXd w =
      lower.triangularView<Eigen::Lower>().solve(x - mean);
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) +
                 log_det_from_cholesky(lower) + w.squaredNorm());
}

// As above but with a precomputed Cholesky factor of the covariance.
inline double mvn_logpdf_cholesky(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& lower) {
  const Eigen::VectorXd w =
      lower.triangularView<Eigen::Lower>().solve(x - mean);
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * std::numbers::pi) +
                 log_det_from_cholesky(lower) + w.squaredNorm());
}

inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                                  const SpdMatrix& cov, Rng& rng) {
  if (mean.size() != cov.dim()) {
    throw LengthMismatch("sample_mvn: mean has " + std::to_string(mean.size()) +
                         " entries, cov dim " + std::to_string(cov.dim()));
  }
  const Eigen::MatrixXd lower = cholesky(cov.mat());
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + lower * z;
}

/**
 * Draw from the inverse-Wishart IW(psi, nu), nu > dim - 1.
 *
 * Uses the Bartlett factorization of a Wishart(I, nu) draw: with A lower
 * triangular, A(i,i)^2 ~ chi^2(nu - i) (0-based) and subdiagonal standard
 * normals, W = U A A' U' ~ Wishart(psi^{-1}, nu) for any U with U U' =
 * psi^{-1}; inverting gives the draw as B B' with B = chol(psi) A^{-T},
 * computed by a triangular solve.
 */
inline SpdMatrix sample_inverse_wishart(const SpdMatrix& psi, double nu,
                                        Rng& rng) {
  const Eigen::Index d = psi.dim();
  if (!(nu > static_cast<double>(d - 1))) {
    throw DegreesOfFreedomTooSmall(
        "inverse-Wishart needs nu > dim - 1: nu = " + std::to_string(nu) +
        ", dim = " + std::to_string(d));
  }
  Eigen::MatrixXd bart = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    bart(i, i) = std::sqrt(rng.chi_squared(nu - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) bart(i, j) = rng.normal();
  }
  const Eigen::MatrixXd lower = cholesky(psi.mat());
  const Eigen::MatrixXd bt =
      bart.triangularView<Eigen::Lower>().solve(lower.transpose());
  const Eigen::MatrixXd b = bt.transpose();
  return SpdMatrix(b * b.transpose());
}

/**
 * Draw from the matrix normal MN(m, row_cov, col_cov): m + L_r Z L_c' with
 * Z a matrix of standard normals, so vec of the draw has covariance
 * kron(col_cov, row_cov).
 */
inline Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& m,
                                            const SpdMatrix& row_cov,
                                            const SpdMatrix& col_cov,
                                            Rng& rng) {
  if (m.rows() != row_cov.dim() || m.cols() != col_cov.dim()) {
    throw LengthMismatch("sample_matrix_normal: mean is " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", row cov dim " +
                         std::to_string(row_cov.dim()) + ", col cov dim " +
                         std::to_string(col_cov.dim()));
  }
  Eigen::MatrixXd z(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
  }
  const Eigen::MatrixXd lr = cholesky(row_cov.mat());
  const Eigen::MatrixXd lc = cholesky(col_cov.mat());
  return m + lr * z * lc.transpose();
}

// Dirichlet draw via normalized gammas; every concentration must be > 0.
inline ProbVector sample_dirichlet(const Eigen::VectorXd& alpha, Rng& rng) {
  if (alpha.size() == 0) {
    throw EmptyInput("sample_dirichlet: empty concentration vector");
  }
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0)) {
      throw NonPositiveConcentration("dirichlet concentration " +
                                     std::to_string(i) + " is " +
                                     std::to_string(alpha[i]));
    }
  }
  Eigen::VectorXd g(alpha.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (Eigen::Index i = 0; i < alpha.size(); ++i) g[i] = rng.gamma(alpha[i]);
    const double total = g.sum();
    if (total > 0.0 && std::isfinite(total)) return ProbVector(g / total);
  }
  throw NumericalUnderflow("dirichlet gamma draws underflowed to zero");
}

// A Gaussian over a subset of coordinates of a larger Gaussian; `dims`
// records which original coordinates the rows refer to.
struct GaussianBlock {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<int> dims;
};

/**
 * Condition N(mean, cov) on observed coordinates.
 *
 * With o the observed set and f its complement, returns the Schur
 * complement conditional
 *   mean_f + C_fo C_oo^{-1} (y_o - mean_o),
 *   C_ff - C_fo C_oo^{-1} C_of,
 * with the observed-block solve done through its Cholesky factor. The free
 * coordinates come back in ascending original order. An empty observed set
 * returns the distribution unchanged; observing every coordinate is an
 * error, as is a singular observed block.
 */
inline GaussianBlock gaussian_condition(const Eigen::VectorXd& mean,
                                        const SpdMatrix& cov,
                                        const std::vector<int>& observed_idx,
                                        const Eigen::VectorXd& observed_values) {
  const Eigen::Index dim = mean.size();
  if (cov.dim() != dim) {
    throw LengthMismatch("gaussian_condition: mean has " +
                         std::to_string(dim) + " entries, cov dim " +
                         std::to_string(cov.dim()));
  }
  if (static_cast<Eigen::Index>(observed_idx.size()) !=
      observed_values.size()) {
    throw LengthMismatch("gaussian_condition: " +
                         std::to_string(observed_idx.size()) +
                         " indices but " + std::to_string(observed_values.size()) +
                         " values");
  }
  detail::check_index_set(observed_idx, dim, "gaussian_condition");
  if (observed_idx.empty()) {
    return GaussianBlock{mean, cov.mat(), [&] {
                           std::vector<int> all(static_cast<std::size_t>(dim));
                           for (Eigen::Index i = 0; i < dim; ++i)
                             all[static_cast<std::size_t>(i)] = static_cast<int>(i);
                           return all;
                         }()};
  }
  if (static_cast<Eigen::Index>(observed_idx.size()) == dim) {
    throw EmptyComplement("gaussian_condition: every coordinate observed");
  }

  std::vector<bool> is_observed(static_cast<std::size_t>(dim), false);
  for (int i : observed_idx) is_observed[static_cast<std::size_t>(i)] = true;
  std::vector<int> free_idx;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!is_observed[static_cast<std::size_t>(i)]) {
      free_idx.push_back(static_cast<int>(i));
    }
  }

  const auto no = static_cast<Eigen::Index>(observed_idx.size());
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  Eigen::MatrixXd c_oo(no, no), c_fo(nf, no);
  Eigen::VectorXd m_o(no), m_f(nf);
  Eigen::MatrixXd c_ff(nf, nf);
  for (Eigen::Index a = 0; a < no; ++a) {
    m_o[a] = mean[observed_idx[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < no; ++b) {
      c_oo(a, b) = cov.mat()(observed_idx[static_cast<std::size_t>(a)],
                             observed_idx[static_cast<std::size_t>(b)]);
    }
  }
  for (Eigen::Index a = 0; a < nf; ++a) {
    m_f[a] = mean[free_idx[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < nf; ++b) {
      c_ff(a, b) = cov.mat()(free_idx[static_cast<std::size_t>(a)],
                             free_idx[static_cast<std::size_t>(b)]);
    }
    for (Eigen::Index b = 0; b < no; ++b) {
      c_fo(a, b) = cov.mat()(free_idx[static_cast<std::size_t>(a)],
                             observed_idx[static_cast<std::size_t>(b)]);
    }
  }

  Eigen::MatrixXd lower;
  try {
    lower = cholesky(c_oo);
  } catch (const NotPositiveDefinite&) {
    throw ObservedBlockSingular(
        "gaussian_condition: observed block is singular");
  }
  // w = L^{-1}(y - m_o), v = L^{-1} C_of
  const Eigen::VectorXd w =
      lower.triangularView<Eigen::Lower>().solve(observed_values - m_o);
  const Eigen::MatrixXd v =
      lower.triangularView<Eigen::Lower>().solve(c_fo.transpose());
  Eigen::MatrixXd cov_cond = c_ff - v.transpose() * v;
  cov_cond = ((cov_cond + cov_cond.transpose()) / 2.0).eval();
  return GaussianBlock{m_f + v.transpose() * w, std::move(cov_cond),
                       std::move(free_idx)};
}

// Marginal of N(mean, cov) over `idx`, kept in the order given.
inline GaussianBlock gaussian_marginal(const Eigen::VectorXd& mean,
                                       const SpdMatrix& cov,
                                       const std::vector<int>& idx) {
  if (cov.dim() != mean.size()) {
    throw LengthMismatch("gaussian_marginal: mean has " +
                         std::to_string(mean.size()) + " entries, cov dim " +
                         std::to_string(cov.dim()));
  }
  if (idx.empty()) throw EmptyInput("gaussian_marginal: empty index set");
  detail::check_index_set(idx, mean.size(), "gaussian_marginal");
  const auto k = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd m(k);
  Eigen::MatrixXd c(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    m[a] = mean[idx[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < k; ++b) {
      c(a, b) = cov.mat()(idx[static_cast<std::size_t>(a)],
                          idx[static_cast<std::size_t>(b)]);
    }
  }
  return GaussianBlock{std::move(m), std::move(c), idx};
}

}  // namespace msar
