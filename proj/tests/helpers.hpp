#pragma once

// Shared utilities for the test suites: small random problem generators,
// oracles computed independently of the library (dense inverses, brute-force
// path enumeration, numerical quadrature), and Monte-Carlo moment summaries.
// Oracles here deliberately use Eigen's dense inverse so they share no code
// path with the Cholesky-based implementations under test.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "msar/distributions.hpp"
#include "msar/linalg.hpp"
#include "msar/model.hpp"
#include "msar/rng.hpp"

namespace testutil {

// Random SPD matrix with eigenvalues bounded away from zero.
inline Eigen::MatrixXd random_spd(int dim, msar::Rng& rng, double ridge = 0.5) {
  Eigen::MatrixXd g(dim, dim);
  for (int j = 0; j < dim; ++j) {
    for (int i = 0; i < dim; ++i) g(i, j) = rng.normal();
  }
  Eigen::MatrixXd s = g * g.transpose() / static_cast<double>(dim) +
                      ridge * Eigen::MatrixXd::Identity(dim, dim);
  return ((s + s.transpose()) / 2.0).eval();
}

// Random row-stochastic matrix with entries bounded away from zero.
inline Eigen::MatrixXd random_stochastic(int rows, int cols, msar::Rng& rng) {
  Eigen::MatrixXd t(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double total = 0.0;
    for (int j = 0; j < cols; ++j) {
      t(i, j) = 0.1 + rng.uniform();
      total += t(i, j);
    }
    t.row(i) /= total;
  }
  return t;
}

inline Eigen::MatrixXd random_transition(int k, msar::Rng& rng) {
  return random_stochastic(k, k, rng);
}

// Random regime parameters: coefficient matrices rescaled to the requested
// spectral radius, standard-normal state means scaled by mean_scale, and
// moderately conditioned covariances.
inline msar::RegimeParams random_params(int dim, int k, msar::Rng& rng,
                                        double radius = 0.6,
                                        double mean_scale = 1.0) {
  msar::RegimeParams params;
  params.transition = random_transition(k, rng);
  for (int s = 0; s < k; ++s) {
    Eigen::MatrixXd a(dim, dim);
    for (int j = 0; j < dim; ++j) {
      for (int i = 0; i < dim; ++i) a(i, j) = rng.normal();
    }
    const double rho = msar::spectral_radius(a);
    if (rho > 0.0) a *= radius / rho;
    params.coeff.push_back(a);
    Eigen::VectorXd mu(dim);
    for (int i = 0; i < dim; ++i) mu[i] = mean_scale * rng.normal();
    params.mean.push_back(mu);
    params.cov.emplace_back(random_spd(dim, rng));
  }
  params.validate();
  return params;
}

// ---------------------------------------------------------------------------
// Brute-force hidden-chain enumeration.
//
// For a chain of `count` positions with K states, initial law `initial`,
// transition matrix `transition`, and per-position per-state log emission
// weights logem(i, z) (row 0 conventionally zero when position 1 carries no
// emission), sums over all K^count paths.
// ---------------------------------------------------------------------------

struct PathEnumeration {
  double log_evidence = 0.0;       // log sum over paths of exp(log weight)
  Eigen::MatrixXd marginals;       // count x K posterior state marginals
  std::vector<double> path_probs;  // normalized posterior per path id
  int num_states = 0;
  int count = 0;

  int state_at(long path, int position) const {
    long p = path;
    for (int i = 0; i < position; ++i) p /= num_states;
    return static_cast<int>(p % num_states);
  }
};

inline PathEnumeration enumerate_chain(const Eigen::MatrixXd& logem,
                                       const Eigen::MatrixXd& transition,
                                       const Eigen::VectorXd& initial) {
  PathEnumeration out;
  out.count = static_cast<int>(logem.rows());
  out.num_states = static_cast<int>(logem.cols());
  const int k = out.num_states;
  long num_paths = 1;
  for (int i = 0; i < out.count; ++i) num_paths *= k;

  std::vector<double> logw(static_cast<std::size_t>(num_paths));
  double peak = -std::numeric_limits<double>::infinity();
  for (long p = 0; p < num_paths; ++p) {
    long rest = p;
    int prev = -1;
    double w = 0.0;
    for (int i = 0; i < out.count; ++i) {
      const int z = static_cast<int>(rest % k);
      rest /= k;
      w += i == 0 ? std::log(initial[z]) : std::log(transition(prev, z));
      w += logem(i, z);
      prev = z;
    }
    logw[static_cast<std::size_t>(p)] = w;
    peak = std::max(peak, w);
  }
  double total = 0.0;
  for (double w : logw) total += std::exp(w - peak);
  out.log_evidence = peak + std::log(total);

  out.path_probs.resize(static_cast<std::size_t>(num_paths));
  out.marginals = Eigen::MatrixXd::Zero(out.count, k);
  for (long p = 0; p < num_paths; ++p) {
    const double prob =
        std::exp(logw[static_cast<std::size_t>(p)] - out.log_evidence);
    out.path_probs[static_cast<std::size_t>(p)] = prob;
    long rest = p;
    for (int i = 0; i < out.count; ++i) {
      out.marginals(i, static_cast<int>(rest % k)) += prob;
      rest /= k;
    }
  }
  return out;
}

// Log emission matrix for fully observed runs under the regime model: row 0
// is zero (the first run of a day is conditioned on, not scored), and row
// i >= 1 holds log N(y_i | A_z y_{i-1} + mu_z, Sigma_z) per state.
inline Eigen::MatrixXd complete_emissions(
    const std::vector<Eigen::VectorXd>& runs,
    const msar::RegimeParams& params) {
  const int count = static_cast<int>(runs.size());
  const int k = params.num_states();
  Eigen::MatrixXd logem = Eigen::MatrixXd::Zero(count, k);
  for (int i = 1; i < count; ++i) {
    for (int s = 0; s < k; ++s) {
      const Eigen::VectorXd mean =
          params.coeff[s] * runs[static_cast<std::size_t>(i - 1)] +
          params.mean[s];
      logem(i, s) =
          msar::mvn_logpdf(runs[static_cast<std::size_t>(i)], mean,
                           params.cov[s]);
    }
  }
  return logem;
}

// ---------------------------------------------------------------------------
// Dense-inverse Gaussian conditioning oracle.
// ---------------------------------------------------------------------------

struct DenseConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<int> free_idx;
};

inline DenseConditional dense_condition(const Eigen::VectorXd& mean,
                                        const Eigen::MatrixXd& cov,
                                        const std::vector<int>& observed_idx,
                                        const Eigen::VectorXd& observed_values) {
  const int dim = static_cast<int>(mean.size());
  std::vector<bool> is_obs(static_cast<std::size_t>(dim), false);
  for (int i : observed_idx) is_obs[static_cast<std::size_t>(i)] = true;
  DenseConditional out;
  for (int i = 0; i < dim; ++i) {
    if (!is_obs[static_cast<std::size_t>(i)]) out.free_idx.push_back(i);
  }
  const int no = static_cast<int>(observed_idx.size());
  const int nf = static_cast<int>(out.free_idx.size());
  Eigen::MatrixXd c_oo(no, no), c_fo(nf, no), c_ff(nf, nf);
  Eigen::VectorXd m_o(no), m_f(nf);
  for (int a = 0; a < no; ++a) {
    m_o[a] = mean[observed_idx[static_cast<std::size_t>(a)]];
    for (int b = 0; b < no; ++b) {
      c_oo(a, b) = cov(observed_idx[static_cast<std::size_t>(a)],
                       observed_idx[static_cast<std::size_t>(b)]);
    }
  }
  for (int a = 0; a < nf; ++a) {
    m_f[a] = mean[out.free_idx[static_cast<std::size_t>(a)]];
    for (int b = 0; b < nf; ++b) {
      c_ff(a, b) = cov(out.free_idx[static_cast<std::size_t>(a)],
                       out.free_idx[static_cast<std::size_t>(b)]);
    }
    for (int b = 0; b < no; ++b) {
      c_fo(a, b) = cov(out.free_idx[static_cast<std::size_t>(a)],
                       observed_idx[static_cast<std::size_t>(b)]);
    }
  }
  const Eigen::MatrixXd inv = c_oo.inverse();
  out.mean = m_f + c_fo * inv * (observed_values - m_o);
  out.cov = c_ff - c_fo * inv * c_fo.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Monte-Carlo moment summaries.
// ---------------------------------------------------------------------------

// Sample mean, unbiased variance, and the standard error of the mean for a
// stream of vectors collected column-wise.
class VectorMoments {
 public:
  void add(const Eigen::VectorXd& x) {
    if (count_ == 0) {
      sum_ = Eigen::VectorXd::Zero(x.size());
      sum_sq_ = Eigen::VectorXd::Zero(x.size());
    }
    sum_ += x;
    sum_sq_ += x.cwiseProduct(x);
    ++count_;
  }
  long count() const { return count_; }
  Eigen::VectorXd mean() const { return sum_ / static_cast<double>(count_); }
  Eigen::VectorXd variance() const {
    const double n = static_cast<double>(count_);
    const Eigen::VectorXd m = mean();
    return (sum_sq_ / n - m.cwiseProduct(m)) * (n / (n - 1.0));
  }
  // Standard error of the sample mean, per entry.
  Eigen::VectorXd se_mean() const {
    return (variance() / static_cast<double>(count_)).cwiseSqrt();
  }

 private:
  Eigen::VectorXd sum_;
  Eigen::VectorXd sum_sq_;
  long count_ = 0;
};

inline double mean_of(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

inline double se_of_mean(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) /
                   static_cast<double>(xs.size()));
}

}  // namespace testutil
