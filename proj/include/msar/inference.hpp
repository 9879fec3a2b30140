#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msar/distributions.hpp"
#include "msar/errors.hpp"
#include "msar/model.hpp"
#include "msar/rng.hpp"

namespace msar {

using StateSequence = std::vector<int>;
// Per day, per run hidden-state index in 0..K-1.
using StateAssignment = std::vector<StateSequence>;

struct ForwardResult {
  // Row i holds the normalized filtered distribution of z_i given runs
  // 1..i (run 1 contributes no emission; its row is the stationary prior).
  Eigen::MatrixXd messages;
  // Log normalizer per step; entry 0 is zero, and the tail sums to
  // log p(y_2..y_I | y_1, params).
  Eigen::VectorXd step_log_norm;
  double log_likelihood;
};

namespace detail {

// Per-iteration cache of state-dependent factors shared across days.
struct RegimeCache {
  const RegimeParams* params;
  std::vector<Eigen::MatrixXd> chol_cov;  // lower factors of Sigma_k
  Eigen::VectorXd initial;                // stationary distribution of pi
  Eigen::MatrixXd log_transition;
};

inline RegimeCache build_cache(const RegimeParams& params) {
  RegimeCache cache;
  cache.params = &params;
  const int k = params.num_states();
  cache.chol_cov.reserve(k);
  for (int s = 0; s < k; ++s) {
    cache.chol_cov.push_back(cholesky(params.cov[s].mat()));
  }
  cache.initial = stationary_distribution(params.transition).probs.vec();
  cache.log_transition =
      params.transition.array().max(1e-300).log().matrix();
  return cache;
}

// I x K matrix of log emission densities; row 0 is zero because the first
// run of a day is conditioned on, not scored.
inline Eigen::MatrixXd emission_log_densities(
    const std::vector<Eigen::VectorXd>& runs, const RegimeCache& cache) {
  const auto count = static_cast<Eigen::Index>(runs.size());
  const int k = cache.params->num_states();
  Eigen::MatrixXd logem = Eigen::MatrixXd::Zero(count, k);
  for (Eigen::Index i = 1; i < count; ++i) {
    for (int s = 0; s < k; ++s) {
      const Eigen::VectorXd mean =
          cache.params->coeff[s] * runs[i - 1] + cache.params->mean[s];
      logem(i, s) = mvn_logpdf_cholesky(runs[i], mean, cache.chol_cov[s]);
    }
  }
  return logem;
}

inline ForwardResult forward_from_emissions(const Eigen::MatrixXd& logem,
                                            const RegimeCache& cache) {
  const Eigen::Index count = logem.rows();
  const int k = cache.params->num_states();
  ForwardResult result;
  result.messages.resize(count, k);
  result.step_log_norm = Eigen::VectorXd::Zero(count);
  result.messages.row(0) = cache.initial.transpose();
  for (Eigen::Index i = 1; i < count; ++i) {
    Eigen::VectorXd log_mass(k);
    for (int s = 0; s < k; ++s) {
      const double incoming = result.messages.row(i - 1).dot(
          cache.params->transition.col(s).transpose());
      log_mass[s] = incoming > 0.0
                        ? std::log(incoming) + logem(i, s)
                        : -std::numeric_limits<double>::infinity();
    }
    const double peak = log_mass.maxCoeff();
    if (!std::isfinite(peak)) {
      throw NumericalUnderflow("all states have zero mass at run " +
                               std::to_string(i + 1));
    }
    const Eigen::VectorXd shifted = (log_mass.array() - peak).exp();
    const double total = shifted.sum();
    result.messages.row(i) = (shifted / total).transpose();
    result.step_log_norm[i] = peak + std::log(total);
  }
  result.log_likelihood = result.step_log_norm.sum();
  return result;
}

}  // namespace detail

/**
 * Scaled forward recursion for one day.
 *
 * alpha_1 is the stationary distribution of the transition matrix (the
 * first run is not scored); for i >= 2
 *   alpha_i(z) proportional to N(y_i | A_z y_{i-1} + mu_z, Sigma_z)
 *              * sum_z' alpha_{i-1}(z') pi(z', z)
 * with per-step normalizers whose logs accumulate to the day's
 * log likelihood.
 */
inline ForwardResult forward_pass(const std::vector<Eigen::VectorXd>& runs,
                                  const RegimeParams& params) {
  if (runs.empty()) throw EmptyInput("forward_pass: day has no runs");
  params.validate();
  const auto cache = detail::build_cache(params);
  return detail::forward_from_emissions(
      detail::emission_log_densities(runs, cache), cache);
}

inline ForwardResult forward_pass(const DaySequence& day,
                                  const RegimeParams& params) {
  return forward_pass(flatten_runs(day), params);
}

// Joint posterior draw of the day's state path given the forward messages:
// z_I from the last filtered row, then z_i proportional to
// alpha_i(z) pi(z, z_{i+1}).
inline StateSequence backward_sample(const ForwardResult& forward,
                                     const RegimeParams& params, Rng& rng) {
  const Eigen::Index count = forward.messages.rows();
  if (count == 0) throw EmptyInput("backward_sample: empty forward result");
  StateSequence states(static_cast<std::size_t>(count));
  states[static_cast<std::size_t>(count - 1)] =
      rng.categorical(forward.messages.row(count - 1).transpose());
  for (Eigen::Index i = count - 2; i >= 0; --i) {
    const int next = states[static_cast<std::size_t>(i + 1)];
    const Eigen::VectorXd weights =
        forward.messages.row(i).transpose().cwiseProduct(
            params.transition.col(next));
    states[static_cast<std::size_t>(i)] = rng.categorical(weights);
  }
  return states;
}

/**
 * Posterior marginal p(z_i | all runs of the day) per run, by the scaled
 * backward recursion in log space combined with the forward messages.
 */
inline Eigen::MatrixXd smoothed_marginals(
    const std::vector<Eigen::VectorXd>& runs, const RegimeParams& params) {
  if (runs.empty()) throw EmptyInput("smoothed_marginals: day has no runs");
  params.validate();
  const auto cache = detail::build_cache(params);
  const Eigen::MatrixXd logem = detail::emission_log_densities(runs, cache);
  const ForwardResult forward = detail::forward_from_emissions(logem, cache);
  const Eigen::Index count = logem.rows();
  const int k = params.num_states();

  Eigen::MatrixXd log_beta = Eigen::MatrixXd::Zero(count, k);
  for (Eigen::Index i = count - 2; i >= 0; --i) {
    for (int s = 0; s < k; ++s) {
      double peak = -std::numeric_limits<double>::infinity();
      Eigen::VectorXd terms(k);
      for (int t = 0; t < k; ++t) {
        terms[t] = cache.log_transition(s, t) + logem(i + 1, t) +
                   log_beta(i + 1, t);
        peak = std::max(peak, terms[t]);
      }
      log_beta(i, s) =
          std::isfinite(peak)
              ? peak + std::log((terms.array() - peak).exp().sum())
              : peak;
      log_beta(i, s) -= forward.step_log_norm[i + 1];
    }
  }

  Eigen::MatrixXd marginals(count, k);
  for (Eigen::Index i = 0; i < count; ++i) {
    Eigen::VectorXd log_row(k);
    for (int s = 0; s < k; ++s) {
      const double alpha = forward.messages(i, s);
      log_row[s] = alpha > 0.0
                       ? std::log(alpha) + log_beta(i, s)
                       : -std::numeric_limits<double>::infinity();
    }
    const double peak = log_row.maxCoeff();
    if (!std::isfinite(peak)) {
      throw NumericalUnderflow("smoothed marginal vanished at run " +
                               std::to_string(i + 1));
    }
    const Eigen::VectorXd row = (log_row.array() - peak).exp();
    marginals.row(i) = (row / row.sum()).transpose();
  }
  return marginals;
}

inline Eigen::MatrixXd smoothed_marginals(const DaySequence& day,
                                          const RegimeParams& params) {
  return smoothed_marginals(flatten_runs(day), params);
}

// Posterior hyperparameters of the normal-inverse-Wishart update given
// residuals r = y_i - A_k y_{i-1} assigned to one state.
struct NiwPosterior {
  Eigen::VectorXd mu;
  double lambda;
  double nu;
  SpdMatrix psi;
};

inline NiwPosterior niw_posterior(const std::vector<Eigen::VectorXd>& residuals,
                                  const Hyperparams& hyper) {
  const auto count = static_cast<double>(residuals.size());
  const Eigen::Index d = hyper.mu0.size();
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(d);
  for (const auto& r : residuals) {
    if (r.size() != d) {
      throw LengthMismatch("residual dimension " + std::to_string(r.size()) +
                           " does not match prior dimension " +
                           std::to_string(d));
    }
    delta += r;
  }
  if (count > 0.0) delta /= count;

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (const auto& r : residuals) {
    const Eigen::VectorXd c = r - delta;
    scatter.noalias() += c * c.transpose();
  }
  const double shrink = hyper.lambda0 * count / (hyper.lambda0 + count);
  const Eigen::VectorXd gap = delta - hyper.mu0;
  Eigen::MatrixXd psi =
      hyper.psi0.mat() + scatter + shrink * gap * gap.transpose();
  return NiwPosterior{
      (hyper.lambda0 * hyper.mu0 + count * delta) / (hyper.lambda0 + count),
      hyper.lambda0 + count, hyper.nu0 + count, SpdMatrix(std::move(psi))};
}

struct MeanCov {
  Eigen::VectorXd mean;
  SpdMatrix cov;
};

// Draw (Sigma, mu) from the conjugate posterior: Sigma ~ IW(psi*, nu*),
// then mu | Sigma ~ N(mu*, Sigma / lambda*). Empty residual sets reduce to
// the prior.
inline MeanCov sample_niw_posterior(const std::vector<Eigen::VectorXd>& residuals,
                                    const Hyperparams& hyper, Rng& rng) {
  const NiwPosterior post = niw_posterior(residuals, hyper);
  SpdMatrix sigma = sample_inverse_wishart(post.psi, post.nu, rng);
  const Eigen::VectorXd mu =
      sample_mvn(post.mu, SpdMatrix(sigma.mat() / post.lambda), rng);
  return MeanCov{mu, std::move(sigma)};
}

// Posterior for the coefficient matrix given predecessor/successor pairs:
// column covariance (v0^{-1} + sum x x')^{-1} and location
// (m0 v0^{-1} + sum (y - mu) x') v*, with all inverses applied through
// Cholesky factors of the assembled Gram matrix.
struct CoeffPosterior {
  Eigen::MatrixXd location;
  Eigen::MatrixXd gram_cholesky;  // lower factor of v*^{-1}
};

inline CoeffPosterior coefficient_posterior(
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs,
    const Eigen::VectorXd& mu, const Hyperparams& hyper) {
  const Eigen::Index d = hyper.mu0.size();
  if (mu.size() != d) {
    throw LengthMismatch("coefficient posterior: mean dimension mismatch");
  }
  const Eigen::MatrixXd lv = cholesky(hyper.v0.mat());
  const Eigen::MatrixXd lv_inv =
      lv.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::MatrixXd gram = lv_inv.transpose() * lv_inv;  // v0^{-1}
  Eigen::MatrixXd cross = hyper.m0 * gram;
  for (const auto& [y, y_prev] : pairs) {
    if (y.size() != d || y_prev.size() != d) {
      throw LengthMismatch("coefficient posterior: pair dimension mismatch");
    }
    gram.noalias() += y_prev * y_prev.transpose();
    cross.noalias() += (y - mu) * y_prev.transpose();
  }
  const Eigen::MatrixXd lg = cholesky(gram);
  // location = cross * gram^{-1}, via two triangular solves on the right.
  Eigen::MatrixXd loc_t = lg.triangularView<Eigen::Lower>().solve(
      cross.transpose());
  loc_t = lg.transpose().triangularView<Eigen::Upper>().solve(loc_t);
  return CoeffPosterior{loc_t.transpose(), lg};
}

// Draw A ~ MN(location, sigma, v*) where v* is carried implicitly by the
// Cholesky factor of its inverse: A = location + chol(sigma) Z lg^{-1}.
inline Eigen::MatrixXd sample_coefficient_posterior(
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& pairs,
    const Eigen::VectorXd& mu, const SpdMatrix& sigma,
    const Hyperparams& hyper, Rng& rng) {
  const CoeffPosterior post = coefficient_posterior(pairs, mu, hyper);
  const Eigen::Index d = mu.size();
  Eigen::MatrixXd z(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) z(i, j) = rng.normal();
  }
  const Eigen::MatrixXd ls = cholesky(sigma.mat());
  const Eigen::MatrixXd scaled =
      post.gram_cholesky.triangularView<Eigen::Lower>()
          .solve<Eigen::OnTheRight>(ls * z);
  return post.location + scaled;
}

/**
 * Draw each transition row k from Dirichlet(counts_k + alpha), where
 * counts_k are within-day consecutive state pairs only; day boundaries
 * contribute no counts.
 */
inline Eigen::MatrixXd sample_transition_rows(const StateAssignment& states,
                                              int num_states,
                                              const Eigen::VectorXd& alpha,
                                              Rng& rng) {
  if (alpha.size() != num_states) {
    throw LengthMismatch("alpha has " + std::to_string(alpha.size()) +
                         " entries for K = " + std::to_string(num_states));
  }
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_states, num_states);
  for (const auto& day : states) {
    for (std::size_t i = 1; i < day.size(); ++i) {
      const int from = day[i - 1];
      const int to = day[i];
      if (from < 0 || from >= num_states || to < 0 || to >= num_states) {
        throw IndexOutOfRange("state outside 0.." +
                              std::to_string(num_states - 1));
      }
      counts(from, to) += 1.0;
    }
  }
  Eigen::MatrixXd transition(num_states, num_states);
  for (int s = 0; s < num_states; ++s) {
    const ProbVector row =
        sample_dirichlet(counts.row(s).transpose() + alpha, rng);
    transition.row(s) = row.vec().transpose();
  }
  return transition;
}

struct PosteriorDraw {
  RegimeParams regime;
  std::optional<StateAssignment> states;
};

struct GibbsOptions {
  int threads = 1;
  bool keep_states = true;
  // Called with (iteration, data log likelihood) every progress_every
  // iterations.
  std::function<void(int, double)> progress;
  int progress_every = 100;
};

namespace detail {

// Derived-stream key tags; fixed so results never depend on thread count.
inline constexpr std::uint64_t kGibbsDayTag = 0x4646u;
inline constexpr std::uint64_t kStateInitTag = 0x494eu;

template <typename Fn>
inline void parallel_over(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/**
 * Gibbs sampler over regime parameters and hidden state paths.
 *
 * Each iteration draws, in order: per state (Sigma_k, mu_k) from the
 * normal-inverse-Wishart update on residuals under the current A_k, then
 * A_k from its matrix-normal update; then the transition rows from their
 * Dirichlet updates; then every day's state path by forward filtering and
 * backward sampling. After burn_in iterations every thin-th draw is kept
 * until num_draws snapshots are collected.
 *
 * Day paths are drawn from substreams keyed by (iteration, day), so the
 * output is identical for any thread count.
 */
inline std::vector<PosteriorDraw> gibbs_fit(
    const std::vector<std::vector<Eigen::VectorXd>>& days,
    const Hyperparams& hyper, int num_states, int burn_in, int num_draws,
    Rng& rng, int thin = 1, const GibbsOptions& options = {}) {
  if (days.empty()) throw EmptyInput("gibbs_fit: no days");
  if (num_states < 1) throw InvalidArgument("gibbs_fit: need K >= 1");
  if (burn_in < 0 || num_draws < 1 || thin < 1) {
    throw InvalidArgument("gibbs_fit: bad burn-in/draw/thin settings");
  }
  const Eigen::Index d = days.front().empty() ? 0 : days.front().front().size();
  for (const auto& day : days) {
    if (day.empty()) throw EmptyInput("gibbs_fit: a day has no runs");
    for (const auto& run : day) {
      if (run.size() != d || d == 0) {
        throw LengthMismatch("gibbs_fit: runs disagree on dimension");
      }
    }
  }
  hyper.validate(static_cast<int>(d), num_states);

  const int num_days = static_cast<int>(days.size());
  StateAssignment states(days.size());
  {
    Rng init = rng.stream(detail::kStateInitTag);
    const Eigen::VectorXd uniform =
        Eigen::VectorXd::Ones(num_states);
    for (int day = 0; day < num_days; ++day) {
      states[day].resize(days[day].size());
      for (auto& z : states[day]) z = init.categorical(uniform);
    }
  }

  RegimeParams params;
  params.transition = Eigen::MatrixXd::Constant(
      num_states, num_states, 1.0 / static_cast<double>(num_states));
  for (int s = 0; s < num_states; ++s) {
    params.coeff.push_back(hyper.m0);
    params.mean.push_back(hyper.mu0);
    params.cov.push_back(hyper.psi0);
  }

  std::vector<PosteriorDraw> draws;
  draws.reserve(static_cast<std::size_t>(num_draws));
  const int total_iterations = burn_in + num_draws * thin;
  for (int iter = 1; iter <= total_iterations; ++iter) {
    // Parameters given states.
    for (int s = 0; s < num_states; ++s) {
      std::vector<Eigen::VectorXd> residuals;
      std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
      for (int day = 0; day < num_days; ++day) {
        for (std::size_t i = 1; i < days[day].size(); ++i) {
          if (states[day][i] != s) continue;
          residuals.push_back(days[day][i] -
                              params.coeff[s] * days[day][i - 1]);
          pairs.emplace_back(days[day][i], days[day][i - 1]);
        }
      }
      MeanCov mc = sample_niw_posterior(residuals, hyper, rng);
      params.mean[s] = mc.mean;
      params.cov[s] = std::move(mc.cov);
      params.coeff[s] = sample_coefficient_posterior(
          pairs, params.mean[s], params.cov[s], hyper, rng);
    }

    // Transition rows given states.
    params.transition =
        sample_transition_rows(states, num_states, hyper.alpha, rng);

    // State paths given parameters.
    const auto cache = detail::build_cache(params);
    std::vector<double> day_loglik(days.size(), 0.0);
    detail::parallel_over(num_days, options.threads, [&](int day) {
      Rng day_rng = rng.stream(detail::kGibbsDayTag,
                               static_cast<std::uint64_t>(iter),
                               static_cast<std::uint64_t>(day));
      const ForwardResult forward = detail::forward_from_emissions(
          detail::emission_log_densities(days[day], cache), cache);
      day_loglik[day] = forward.log_likelihood;
      states[day] = backward_sample(forward, params, day_rng);
    });
    const double loglik =
        std::accumulate(day_loglik.begin(), day_loglik.end(), 0.0);
    if (!std::isfinite(loglik)) {
      throw NonFiniteLikelihood("log likelihood became non-finite at iteration " +
                                std::to_string(iter));
    }
    if (options.progress && iter % options.progress_every == 0) {
      options.progress(iter, loglik);
    }

    if (iter > burn_in && (iter - burn_in) % thin == 0) {
      PosteriorDraw draw;
      draw.regime = params;
      if (options.keep_states) draw.states = states;
      draws.push_back(std::move(draw));
    }
  }
  return draws;
}

/**
 * Permutation aligning estimated labels to reference labels: perm[e] is
 * the reference label for estimated label e, chosen to maximize agreement.
 * Exhaustive for K <= 8, greedy on the confusion matrix above that.
 */
inline std::vector<int> match_states_to_truth(const StateAssignment& estimated,
                                              const StateAssignment& reference,
                                              int num_states) {
  if (estimated.size() != reference.size()) {
    throw LengthMismatch("state assignments disagree on number of days");
  }
  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(num_states, num_states);
  for (std::size_t day = 0; day < estimated.size(); ++day) {
    if (estimated[day].size() != reference[day].size()) {
      throw LengthMismatch("state assignments disagree on day " +
                           std::to_string(day));
    }
    for (std::size_t i = 0; i < estimated[day].size(); ++i) {
      confusion(estimated[day][i], reference[day][i]) += 1.0;
    }
  }

  std::vector<int> best(num_states);
  if (num_states <= 8) {
    std::vector<int> perm(num_states);
    std::iota(perm.begin(), perm.end(), 0);
    double best_score = -1.0;
    do {
      double score = 0.0;
      for (int e = 0; e < num_states; ++e) score += confusion(e, perm[e]);
      if (score > best_score) {
        best_score = score;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  std::vector<bool> row_used(num_states, false), col_used(num_states, false);
  for (int step = 0; step < num_states; ++step) {
    int best_e = -1, best_t = -1;
    double best_count = -1.0;
    for (int e = 0; e < num_states; ++e) {
      if (row_used[e]) continue;
      for (int t = 0; t < num_states; ++t) {
        if (col_used[t]) continue;
        if (confusion(e, t) > best_count) {
          best_count = confusion(e, t);
          best_e = e;
          best_t = t;
        }
      }
    }
    best[best_e] = best_t;
    row_used[best_e] = true;
    col_used[best_t] = true;
  }
  return best;
}

}  // namespace msar
