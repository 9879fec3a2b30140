#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msar/distributions.hpp"
#include "msar/errors.hpp"
#include "msar/forecast.hpp"
#include "msar/inference.hpp"
#include "msar/rng.hpp"

namespace msar {

/**
 * One posterior draw of the Gaussian-mixture baseline: shared component
 * Gaussians plus one mixing row per departure-time period.
 */
struct BgmmDraw {
  Eigen::MatrixXd mixing;  // periods x K, rows sum to 1
  std::vector<Eigen::VectorXd> mean;
  std::vector<SpdMatrix> cov;

  int num_states() const { return static_cast<int>(mean.size()); }
  int num_periods() const { return static_cast<int>(mixing.rows()); }
};

namespace detail {

inline constexpr std::uint64_t kBgmmForecastTag = 0x42474du;

}  // namespace detail

/**
 * Gibbs sampler for the mixture baseline. Runs are exchangeable within a
 * period: each iteration draws component labels from their categorical
 * conditionals, component (Sigma_k, mu_k) from the normal-inverse-Wishart
 * update on the raw vectors (no autoregression), and each period's mixing
 * row from its Dirichlet update. Periods with no runs keep their prior
 * row. Retention matches gibbs_fit.
 */
inline std::vector<BgmmDraw> bgmm_gibbs_fit(
    const std::vector<Eigen::VectorXd>& runs, const std::vector<int>& periods,
    const Hyperparams& hyper, int num_states, int burn_in, int num_draws,
    Rng& rng, int thin = 1, const GibbsOptions& options = {}) {
  if (runs.empty()) throw EmptyInput("bgmm_gibbs_fit: no runs");
  if (runs.size() != periods.size()) {
    throw LengthMismatch("bgmm_gibbs_fit: " + std::to_string(runs.size()) +
                         " runs but " + std::to_string(periods.size()) +
                         " period labels");
  }
  if (num_states < 1) throw InvalidArgument("bgmm_gibbs_fit: need K >= 1");
  if (burn_in < 0 || num_draws < 1 || thin < 1) {
    throw InvalidArgument("bgmm_gibbs_fit: bad burn-in/draw/thin settings");
  }
  const Eigen::Index d = runs.front().size();
  for (const auto& y : runs) {
    if (y.size() != d) {
      throw LengthMismatch("bgmm_gibbs_fit: runs disagree on dimension");
    }
  }
  int num_periods = 0;
  for (int t : periods) {
    if (t < 0) throw InvalidArgument("period labels must be non-negative");
    num_periods = std::max(num_periods, t + 1);
  }
  hyper.validate(static_cast<int>(d), num_states);

  const auto count = runs.size();
  std::vector<int> labels(count);
  {
    Rng init = rng.stream(detail::kStateInitTag);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Ones(num_states);
    for (auto& z : labels) z = init.categorical(uniform);
  }

  BgmmDraw params;
  params.mixing = Eigen::MatrixXd::Constant(
      num_periods, num_states, 1.0 / static_cast<double>(num_states));
  for (int s = 0; s < num_states; ++s) {
    params.mean.push_back(hyper.mu0);
    params.cov.push_back(hyper.psi0);
  }

  std::vector<BgmmDraw> draws;
  draws.reserve(static_cast<std::size_t>(num_draws));
  const int total_iterations = burn_in + num_draws * thin;
  for (int iter = 1; iter <= total_iterations; ++iter) {
    // Component parameters given labels.
    for (int s = 0; s < num_states; ++s) {
      std::vector<Eigen::VectorXd> members;
      for (std::size_t i = 0; i < count; ++i) {
        if (labels[i] == s) members.push_back(runs[i]);
      }
      MeanCov mc = sample_niw_posterior(members, hyper, rng);
      params.mean[s] = mc.mean;
      params.cov[s] = std::move(mc.cov);
    }

    // Mixing rows given labels.
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_periods, num_states);
    for (std::size_t i = 0; i < count; ++i) counts(periods[i], labels[i]) += 1.0;
    for (int t = 0; t < num_periods; ++t) {
      params.mixing.row(t) =
          sample_dirichlet(counts.row(t).transpose() + hyper.alpha, rng)
              .vec()
              .transpose();
    }

    // Labels given parameters, and the mixture log likelihood.
    std::vector<Eigen::MatrixXd> chol_cov;
    chol_cov.reserve(static_cast<std::size_t>(num_states));
    for (int s = 0; s < num_states; ++s) {
      chol_cov.push_back(cholesky(params.cov[s].mat()));
    }
    double loglik = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      Eigen::VectorXd log_mass(num_states);
      for (int s = 0; s < num_states; ++s) {
        const double weight = params.mixing(periods[i], s);
        log_mass[s] = weight > 0.0
                          ? std::log(weight) + mvn_logpdf_cholesky(
                                                   runs[i], params.mean[s],
                                                   chol_cov[s])
                          : -std::numeric_limits<double>::infinity();
      }
      const double peak = log_mass.maxCoeff();
      if (!std::isfinite(peak)) {
        throw NumericalUnderflow("all components have zero mass for run " +
                                 std::to_string(i + 1));
      }
      const Eigen::VectorXd weights = (log_mass.array() - peak).exp();
      labels[i] = rng.categorical(weights);
      loglik += peak + std::log(weights.sum());
    }
    if (!std::isfinite(loglik)) {
      throw NonFiniteLikelihood("log likelihood became non-finite at iteration " +
                                std::to_string(iter));
    }
    if (options.progress && iter % options.progress_every == 0) {
      options.progress(iter, loglik);
    }

    if (iter > burn_in && (iter - burn_in) % thin == 0) {
      draws.push_back(params);
    }
  }
  return draws;
}

/**
 * One draw of the free entries of a partial run under the mixture: pick a
 * component with probability proportional to mixing(t, k) times the
 * marginal density of the observed entries, then sample the free block of
 * that component's Gaussian conditioned on the observations. With nothing
 * observed the component is drawn from the period's mixing row and the
 * free entries from the component Gaussian.
 */
inline FreeSample bgmm_conditional_forecast(const PartialRun& run, int period,
                                            const BgmmDraw& draw, Rng& rng) {
  if (period < 0 || period >= draw.num_periods()) {
    throw IndexOutOfRange("period " + std::to_string(period) + " outside 0.." +
                          std::to_string(draw.num_periods() - 1));
  }
  if (run.fully_observed()) return FreeSample{Eigen::VectorXd(), {}};
  const int k = draw.num_states();
  const std::vector<int> obs = run.observed_idx();

  int component;
  if (obs.empty()) {
    component = rng.categorical(draw.mixing.row(period).transpose());
  } else {
    Eigen::VectorXd log_mass(k);
    for (int s = 0; s < k; ++s) {
      const double weight = draw.mixing(period, s);
      if (!(weight > 0.0)) {
        log_mass[s] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const GaussianBlock marg = gaussian_marginal(draw.mean[s], draw.cov[s], obs);
      log_mass[s] = std::log(weight) +
                    mvn_logpdf(run.observed_values(), marg.mean,
                               SpdMatrix(marg.cov));
    }
    const double peak = log_mass.maxCoeff();
    if (!std::isfinite(peak)) {
      throw NumericalUnderflow("no mixture component carries the observation");
    }
    component = rng.categorical((log_mass.array() - peak).exp());
  }

  FreeSample sample;
  detail::complete_from_gaussian(draw.mean[component], draw.cov[component],
                                 run, rng, &sample);
  return sample;
}

/**
 * Bundle of mixture forecasts for target runs of one day. Targets are
 * independent given the draw; draw rho uses a substream keyed by rho, so
 * results do not depend on thread count. The mixture has no
 * autoregressive structure, so any incomplete run may be a target,
 * including the first of a day.
 */
inline ForecastBundle bgmm_forecast_day(const std::vector<PartialRun>& runs,
                                        const std::vector<int>& periods,
                                        const std::vector<int>& target_runs,
                                        const std::vector<BgmmDraw>& posterior,
                                        Rng& rng, int threads = 1) {
  if (runs.empty()) throw EmptyInput("bgmm_forecast_day: day has no runs");
  if (runs.size() != periods.size()) {
    throw LengthMismatch("bgmm_forecast_day: period labels disagree with runs");
  }
  if (posterior.empty()) throw EmptyInput("bgmm_forecast_day: no posterior draws");

  ForecastBundle bundle;
  bundle.num_draws = static_cast<int>(posterior.size());
  std::vector<int> targets;
  for (int target : target_runs) {
    if (target < 0 || target >= static_cast<int>(runs.size())) {
      throw IndexOutOfRange("target run position " + std::to_string(target) +
                            " outside this day");
    }
    if (!runs[static_cast<std::size_t>(target)].fully_observed()) {
      targets.push_back(target);
    }
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  for (int target : targets) {
    TargetForecast forecast;
    forecast.run_pos = target;
    forecast.dims = runs[static_cast<std::size_t>(target)].free_idx();
    forecast.samples.resize(bundle.num_draws,
                            static_cast<Eigen::Index>(forecast.dims.size()));
    bundle.targets.push_back(std::move(forecast));
  }

  detail::parallel_over(bundle.num_draws, threads, [&](int rho) {
    Rng draw_rng = rng.stream(detail::kBgmmForecastTag,
                              static_cast<std::uint64_t>(rho));
    for (auto& forecast : bundle.targets) {
      const FreeSample sample = bgmm_conditional_forecast(
          runs[static_cast<std::size_t>(forecast.run_pos)],
          periods[static_cast<std::size_t>(forecast.run_pos)],
          posterior[static_cast<std::size_t>(rho)], draw_rng);
      forecast.samples.row(rho) = sample.values.transpose();
    }
  });
  return bundle;
}

}  // namespace msar
