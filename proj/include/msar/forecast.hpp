#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msar/distributions.hpp"
#include "msar/errors.hpp"
#include "msar/inference.hpp"
#include "msar/model.hpp"
#include "msar/rng.hpp"

namespace msar {

/**
 * A run vector with an observation mask: entries are either observed
 * (finite) or free. Unobserved values are ignored and may be NaN.
 */
class PartialRun {
 public:
  PartialRun(Eigen::VectorXd values, std::vector<bool> observed)
      : values_(std::move(values)), observed_(std::move(observed)) {
    if (static_cast<Eigen::Index>(observed_.size()) != values_.size()) {
      throw LengthMismatch("partial run has " + std::to_string(values_.size()) +
                           " values but " + std::to_string(observed_.size()) +
                           " mask entries");
    }
    if (values_.size() == 0) throw EmptyInput("partial run has no entries");
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      if (observed_[static_cast<std::size_t>(i)] && !std::isfinite(values_[i])) {
        throw NonFiniteValue("observed entry " + std::to_string(i) +
                             " of a partial run is not finite");
      }
    }
  }

  static PartialRun complete(Eigen::VectorXd values) {
    const auto dim = static_cast<std::size_t>(values.size());
    return PartialRun(std::move(values), std::vector<bool>(dim, true));
  }

  const Eigen::VectorXd& values() const { return values_; }
  const std::vector<bool>& observed() const { return observed_; }
  Eigen::Index dim() const { return values_.size(); }

  int num_observed() const {
    int count = 0;
    for (bool b : observed_) count += b ? 1 : 0;
    return count;
  }
  bool fully_observed() const {
    return num_observed() == static_cast<int>(observed_.size());
  }

  std::vector<int> observed_idx() const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < observed_.size(); ++i) {
      if (observed_[i]) idx.push_back(static_cast<int>(i));
    }
    return idx;
  }
  std::vector<int> free_idx() const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < observed_.size(); ++i) {
      if (!observed_[i]) idx.push_back(static_cast<int>(i));
    }
    return idx;
  }
  Eigen::VectorXd observed_values() const {
    const auto idx = observed_idx();
    Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) v[static_cast<Eigen::Index>(i)] = values_[idx[i]];
    return v;
  }

 private:
  Eigen::VectorXd values_;
  std::vector<bool> observed_;
};

/**
 * Mask for a run whose first `observed_links` links have been traversed:
 * those link times and occupancies are observed, later ones are free, and
 * the headway is always observed for a run that has departed.
 */
inline PartialRun prefix_partial(const RunVector& run, int observed_links) {
  const int n = run.num_links();
  if (observed_links < 0 || observed_links > n) {
    throw IndexOutOfRange("observed prefix " + std::to_string(observed_links) +
                          " outside 0.." + std::to_string(n));
  }
  std::vector<bool> mask(static_cast<std::size_t>(2 * n + 1), false);
  for (int i = 0; i < observed_links; ++i) {
    mask[static_cast<std::size_t>(i)] = true;
    mask[static_cast<std::size_t>(n + i)] = true;
  }
  mask[static_cast<std::size_t>(2 * n)] = true;
  return PartialRun(run.flat(), std::move(mask));
}

// Restrict a partial run to a subset of coordinates (for models fitted on
// a variable subset).
inline PartialRun slice_partial(const PartialRun& run,
                                const std::vector<int>& dims) {
  detail::check_index_set(dims, run.dim(), "slice_partial");
  Eigen::VectorXd values(static_cast<Eigen::Index>(dims.size()));
  std::vector<bool> mask(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    values[static_cast<Eigen::Index>(i)] = run.values()[dims[i]];
    mask[i] = run.observed()[static_cast<std::size_t>(dims[i])];
  }
  return PartialRun(std::move(values), std::move(mask));
}

struct PairJoint {
  Eigen::VectorXd mean;  // 2d, [y_j; y_{j+1}]
  SpdMatrix cov;
};

/**
 * Joint Gaussian of two consecutive runs given the run before them and
 * their states:
 *   m = [ m_j; A_{k'} m_j + mu_{k'} ],  m_j = A_k y_prev + mu_k,
 *   cov = [ S_k,            S_k A_{k'}' ;
 *           A_{k'} S_k,  A_{k'} S_k A_{k'}' + S_{k'} ].
 */
inline PairJoint pair_joint(const Eigen::VectorXd& y_prev, int state,
                            int next_state, const RegimeParams& params) {
  const int k = params.num_states();
  if (state < 0 || state >= k || next_state < 0 || next_state >= k) {
    throw IndexOutOfRange("state pair (" + std::to_string(state) + ", " +
                          std::to_string(next_state) + ") outside 0.." +
                          std::to_string(k - 1));
  }
  const Eigen::Index d = params.dim();
  if (y_prev.size() != d) {
    throw LengthMismatch("predecessor has " + std::to_string(y_prev.size()) +
                         " entries, model dim is " + std::to_string(d));
  }
  const Eigen::MatrixXd& a_next = params.coeff[next_state];
  const Eigen::MatrixXd& s_j = params.cov[state].mat();

  Eigen::VectorXd mean(2 * d);
  mean.head(d) = params.coeff[state] * y_prev + params.mean[state];
  mean.tail(d) = a_next * mean.head(d) + params.mean[next_state];

  const Eigen::MatrixXd cross = s_j * a_next.transpose();
  Eigen::MatrixXd cov(2 * d, 2 * d);
  cov.topLeftCorner(d, d) = s_j;
  cov.topRightCorner(d, d) = cross;
  cov.bottomLeftCorner(d, d) = cross.transpose();
  cov.bottomRightCorner(d, d) =
      a_next * cross + params.cov[next_state].mat();
  return PairJoint{std::move(mean), SpdMatrix(std::move(cov))};
}

struct FreeSample {
  Eigen::VectorXd values;  // one draw of the free entries
  std::vector<int> dims;   // coordinates the values refer to, ascending
};

namespace detail {

// Sample the free entries of `run` from N(mean, cov) conditioned on its
// observed entries; returns the completed vector.
inline Eigen::VectorXd complete_from_gaussian(const Eigen::VectorXd& mean,
                                              const SpdMatrix& cov,
                                              const PartialRun& run, Rng& rng,
                                              FreeSample* sample_out = nullptr) {
  Eigen::VectorXd filled = run.values();
  if (run.fully_observed()) {
    if (sample_out) *sample_out = FreeSample{Eigen::VectorXd(), {}};
    return filled;
  }
  const GaussianBlock cond =
      gaussian_condition(mean, cov, run.observed_idx(), run.observed_values());
  const Eigen::VectorXd draw =
      sample_mvn(cond.mean, SpdMatrix(cond.cov), rng);
  for (std::size_t i = 0; i < cond.dims.size(); ++i) {
    filled[cond.dims[i]] = draw[static_cast<Eigen::Index>(i)];
  }
  if (sample_out) *sample_out = FreeSample{draw, cond.dims};
  return filled;
}

}  // namespace detail

/**
 * One draw of the free entries of run j given the completed previous run,
 * the observed entries of run j, the observed entries of the following run
 * when one is active, and the two states. Conditions the pair-joint
 * Gaussian on every observed coordinate and samples the free block of run
 * j from the marginal of the result. A fully observed run yields an empty
 * sample.
 */
inline FreeSample conditional_forecast_pair(const Eigen::VectorXd& y_prev,
                                            const PartialRun& run,
                                            const PartialRun* next_run,
                                            int state, int next_state,
                                            const RegimeParams& params,
                                            Rng& rng) {
  const Eigen::Index d = params.dim();
  if (run.dim() != d) {
    throw LengthMismatch("partial run dimension " + std::to_string(run.dim()) +
                         " does not match model dim " + std::to_string(d));
  }
  if (run.fully_observed()) return FreeSample{Eigen::VectorXd(), {}};

  // A follower with no observed data carries no information; fall back to
  // the single-run conditional, which is the exact marginalization.
  if (next_run == nullptr || next_run->num_observed() == 0) {
    const Eigen::VectorXd mean =
        params.coeff[state] * y_prev + params.mean[state];
    FreeSample sample;
    detail::complete_from_gaussian(mean, params.cov[state], run, rng, &sample);
    return sample;
  }
  if (next_run->dim() != d) {
    throw LengthMismatch("follower dimension does not match model dim");
  }

  const PairJoint joint = pair_joint(y_prev, state, next_state, params);
  std::vector<int> observed = run.observed_idx();
  Eigen::VectorXd observed_values(observed.size() +
                                  static_cast<std::size_t>(next_run->num_observed()));
  Eigen::Index pos = 0;
  for (int idx : observed) observed_values[pos++] = run.values()[idx];
  for (int idx : next_run->observed_idx()) {
    observed.push_back(static_cast<int>(d) + idx);
    observed_values[pos++] = next_run->values()[idx];
  }

  const GaussianBlock cond =
      gaussian_condition(joint.mean, joint.cov, observed, observed_values);
  std::vector<int> own_positions;
  std::vector<int> own_dims;
  for (std::size_t i = 0; i < cond.dims.size(); ++i) {
    if (cond.dims[i] < d) {
      own_positions.push_back(static_cast<int>(i));
      own_dims.push_back(cond.dims[i]);
    }
  }
  const GaussianBlock marg =
      gaussian_marginal(cond.mean, SpdMatrix(cond.cov), own_positions);
  return FreeSample{sample_mvn(marg.mean, SpdMatrix(marg.cov), rng),
                    std::move(own_dims)};
}

namespace detail {

struct PartialForwardResult {
  ForwardResult forward;
  std::vector<Eigen::VectorXd> filled;  // provisional completions, see below
};

/**
 * Forward recursion over a day whose runs may be partially observed.
 *
 * Run 1 contributes no emission. A later run contributes the marginal
 * density of its observed entries under N(A_z y_prev + mu_z, Sigma_z); a
 * run with nothing observed contributes no emission. Whenever a partial
 * run precedes another run, its free entries are provisionally completed
 * by sampling a state from the current filtered distribution and drawing
 * the free block from the run's conditional law (the start-of-day law
 * N(mu_z, Sigma_z) for run 1), so the next emission has a full
 * predecessor. Those completions consume `rng` draws and are internal to
 * state inference; forecasting redraws them jointly with the sampled
 * state path.
 */
inline PartialForwardResult partial_forward(const std::vector<PartialRun>& runs,
                                            const RegimeParams& params,
                                            Rng& rng) {
  if (runs.empty()) throw EmptyInput("partial forward pass: day has no runs");
  params.validate();
  const auto count = static_cast<Eigen::Index>(runs.size());
  const int k = params.num_states();
  const Eigen::Index d = params.dim();
  for (const auto& run : runs) {
    if (run.dim() != d) {
      throw LengthMismatch("run dimension does not match model dim " +
                           std::to_string(d));
    }
  }
  const Eigen::VectorXd initial =
      stationary_distribution(params.transition).probs.vec();

  PartialForwardResult result;
  result.forward.messages.resize(count, k);
  result.forward.step_log_norm = Eigen::VectorXd::Zero(count);
  result.filled.reserve(static_cast<std::size_t>(count));

  for (Eigen::Index i = 0; i < count; ++i) {
    const auto& run = runs[static_cast<std::size_t>(i)];
    if (i == 0) {
      result.forward.messages.row(0) = initial.transpose();
    } else {
      const Eigen::VectorXd& y_prev = result.filled.back();
      const std::vector<int> obs = run.observed_idx();
      Eigen::VectorXd log_mass(k);
      for (int s = 0; s < k; ++s) {
        const double incoming =
            result.forward.messages.row(i - 1).dot(params.transition.col(s));
        if (!(incoming > 0.0)) {
          log_mass[s] = -std::numeric_limits<double>::infinity();
          continue;
        }
        double logem = 0.0;
        if (!obs.empty()) {
          const Eigen::VectorXd mean =
              params.coeff[s] * y_prev + params.mean[s];
          const GaussianBlock marg =
              gaussian_marginal(mean, params.cov[s], obs);
          logem = mvn_logpdf(run.observed_values(), marg.mean,
                             SpdMatrix(marg.cov));
        }
        log_mass[s] = std::log(incoming) + logem;
      }
      const double peak = log_mass.maxCoeff();
      if (!std::isfinite(peak)) {
        throw NumericalUnderflow("all states have zero mass at run " +
                                 std::to_string(i + 1));
      }
      const Eigen::VectorXd shifted = (log_mass.array() - peak).exp();
      const double total = shifted.sum();
      result.forward.messages.row(i) = (shifted / total).transpose();
      result.forward.step_log_norm[i] = peak + std::log(total);
    }

    // Provisional completion so run i can serve as the next predecessor.
    if (run.fully_observed() || i + 1 == count) {
      result.filled.push_back(run.values());
    } else {
      const int s = rng.categorical(result.forward.messages.row(i).transpose());
      const Eigen::VectorXd mean =
          i == 0 ? params.mean[s]
                 : params.coeff[s] * result.filled.back() + params.mean[s];
      result.filled.push_back(
          complete_from_gaussian(mean, params.cov[s], run, rng));
    }
  }
  result.forward.log_likelihood = result.forward.step_log_norm.sum();
  return result;
}

inline constexpr std::uint64_t kForecastDrawTag = 0x464f52u;

}  // namespace detail

/**
 * Joint posterior draw of the day's state path given partial observations,
 * by the partial-emission forward pass and backward sampling.
 */
inline StateSequence infer_states_partial(const std::vector<PartialRun>& runs,
                                          const RegimeParams& params,
                                          Rng& rng) {
  const detail::PartialForwardResult result =
      detail::partial_forward(runs, params, rng);
  return backward_sample(result.forward, params, rng);
}

/**
 * Exact per-run posterior state marginals for a day whose trailing run may
 * be partial. Earlier runs must be complete: a partial run in the middle
 * of a day would force a sampled completion, and the marginals would no
 * longer be analytic.
 */
inline Eigen::MatrixXd smoothed_marginals_partial(
    const std::vector<PartialRun>& runs, const RegimeParams& params) {
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    if (!runs[i].fully_observed()) {
      throw InvalidArgument(
          "analytic marginals need every non-final run complete; run " +
          std::to_string(i + 1) + " is partial");
    }
  }
  // No completion is ever sampled under the precondition, so the rng is
  // never consumed.
  Rng unused(0);
  const detail::PartialForwardResult result =
      detail::partial_forward(runs, params, unused);

  const Eigen::Index count = result.forward.messages.rows();
  const int k = params.num_states();
  // Only the final run can be partial, so the backward pass reduces to the
  // final filtered row spread one step at a time through the transition.
  Eigen::MatrixXd marginals(count, k);
  marginals.row(count - 1) = result.forward.messages.row(count - 1);
  for (Eigen::Index i = count - 2; i >= 0; --i) {
    Eigen::VectorXd row(k);
    for (int s = 0; s < k; ++s) {
      double total = 0.0;
      for (int t = 0; t < k; ++t) {
        const double denom =
            result.forward.messages.row(i).dot(params.transition.col(t));
        if (denom > 0.0) {
          total += marginals(i + 1, t) * params.transition(s, t) *
                   result.forward.messages(i, s) / denom;
        }
      }
      row[s] = total;
    }
    marginals.row(i) = (row / row.sum()).transpose();
  }
  return marginals;
}

struct TargetForecast {
  int run_pos;               // 0-based position within the day
  std::vector<int> dims;     // free coordinates, ascending
  Eigen::MatrixXd samples;   // num_draws x dims.size()
};

struct ForecastBundle {
  int num_draws = 0;
  std::vector<TargetForecast> targets;
  // Standardization applied to the model's coordinates; empty vectors mean
  // the samples are already in data units.
  Eigen::VectorXd stats_mean;
  Eigen::VectorXd stats_std;

  bool has_stats() const { return stats_mean.size() > 0; }
  double to_data_units(double value, int dim) const {
    return has_stats() ? value * stats_std[dim] + stats_mean[dim] : value;
  }
};

/**
 * Predictive samples for target runs of one day.
 *
 * Per posterior draw: sample a state path from the partial-observation
 * posterior, then sweep the day's runs in increasing order, drawing each
 * incomplete run's free entries from the pair-joint conditional given the
 * completed predecessor, the run's own observations, the follower's
 * observations, and the sampled states. Earlier completions in the same
 * sweep serve as predecessors for later runs. Draw rho uses a substream
 * keyed by rho, so results do not depend on thread count.
 *
 * Run 1 of a day has no predecessor and cannot be a target; when it is
 * incomplete it is completed from its start-of-day law N(mu_z, Sigma_z)
 * conditioned on its observed entries.
 */
inline ForecastBundle rolling_forecast(const std::vector<PartialRun>& runs,
                                       const std::vector<PosteriorDraw>& posterior,
                                       const std::vector<int>& target_runs,
                                       Rng& rng, int threads = 1) {
  if (runs.empty()) throw EmptyInput("rolling_forecast: day has no runs");
  if (posterior.empty()) throw EmptyInput("rolling_forecast: no posterior draws");
  const auto count = static_cast<int>(runs.size());
  for (int target : target_runs) {
    if (target < 0 || target >= count) {
      throw IndexOutOfRange("target run position " + std::to_string(target) +
                            " outside this day");
    }
    if (target == 0) {
      throw TargetBeforeSecondRun(
          "run 1 of a day has no predecessor to forecast from");
    }
  }

  ForecastBundle bundle;
  bundle.num_draws = static_cast<int>(posterior.size());
  std::vector<int> targets;
  for (int target : target_runs) {
    if (!runs[static_cast<std::size_t>(target)].fully_observed()) {
      targets.push_back(target);
    }
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  std::vector<std::size_t> slot(static_cast<std::size_t>(count),
                                std::numeric_limits<std::size_t>::max());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    TargetForecast target;
    target.run_pos = targets[t];
    target.dims = runs[static_cast<std::size_t>(targets[t])].free_idx();
    target.samples.resize(bundle.num_draws,
                          static_cast<Eigen::Index>(target.dims.size()));
    slot[static_cast<std::size_t>(targets[t])] = t;
    bundle.targets.push_back(std::move(target));
  }

  detail::parallel_over(bundle.num_draws, threads, [&](int rho) {
    Rng draw_rng = rng.stream(detail::kForecastDrawTag,
                              static_cast<std::uint64_t>(rho));
    const RegimeParams& params = posterior[static_cast<std::size_t>(rho)].regime;
    const StateSequence states = infer_states_partial(runs, params, draw_rng);

    std::vector<Eigen::VectorXd> filled;
    filled.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const auto& run = runs[static_cast<std::size_t>(i)];
      if (run.fully_observed()) {
        filled.push_back(run.values());
        continue;
      }
      FreeSample sample;
      if (i == 0) {
        filled.push_back(detail::complete_from_gaussian(
            params.mean[states[0]], params.cov[states[0]], run, draw_rng,
            &sample));
      } else {
        const auto* next_run =
            i + 1 < count ? &runs[static_cast<std::size_t>(i + 1)] : nullptr;
        const int next_state = i + 1 < count ? states[static_cast<std::size_t>(i + 1)] : 0;
        sample = conditional_forecast_pair(filled.back(), run, next_run,
                                           states[static_cast<std::size_t>(i)],
                                           next_state, params, draw_rng);
        Eigen::VectorXd value = run.values();
        for (std::size_t j = 0; j < sample.dims.size(); ++j) {
          value[sample.dims[j]] = sample.values[static_cast<Eigen::Index>(j)];
        }
        filled.push_back(std::move(value));
      }
      if (slot[static_cast<std::size_t>(i)] !=
          std::numeric_limits<std::size_t>::max()) {
        bundle.targets[slot[static_cast<std::size_t>(i)]].samples.row(rho) =
            sample.values.transpose();
      }
    }
  });
  return bundle;
}

struct TargetSummary {
  int run_pos;
  std::vector<int> dims;
  Eigen::VectorXd mean;       // per dim, in data units when stats attached
  Eigen::MatrixXd quantiles;  // dims x probs
};

namespace detail {

// Order-statistic quantile with linear interpolation: rank (n-1)p between
// sorted neighbors.
inline double interpolated_quantile(std::vector<double>& sorted, double p) {
  const auto n = sorted.size();
  const double rank = (static_cast<double>(n) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

inline std::vector<TargetSummary> predictive_summary(
    const ForecastBundle& bundle, const std::vector<double>& probs) {
  if (bundle.num_draws < 1) {
    throw EmptyBundle("predictive summary needs at least one draw");
  }
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgument("quantile probability " + std::to_string(p) +
                            " outside [0, 1]");
    }
  }
  std::vector<TargetSummary> out;
  out.reserve(bundle.targets.size());
  for (const auto& target : bundle.targets) {
    TargetSummary summary;
    summary.run_pos = target.run_pos;
    summary.dims = target.dims;
    const auto nd = static_cast<Eigen::Index>(target.dims.size());
    summary.mean.resize(nd);
    summary.quantiles.resize(nd, static_cast<Eigen::Index>(probs.size()));
    for (Eigen::Index j = 0; j < nd; ++j) {
      std::vector<double> column(static_cast<std::size_t>(bundle.num_draws));
      for (int r = 0; r < bundle.num_draws; ++r) {
        column[static_cast<std::size_t>(r)] =
            bundle.to_data_units(target.samples(r, j), target.dims[static_cast<std::size_t>(j)]);
      }
      summary.mean[j] =
          Eigen::Map<Eigen::VectorXd>(column.data(), static_cast<Eigen::Index>(column.size())).mean();
      std::sort(column.begin(), column.end());
      for (std::size_t q = 0; q < probs.size(); ++q) {
        summary.quantiles(j, static_cast<Eigen::Index>(q)) =
            detail::interpolated_quantile(column, probs[q]);
      }
    }
    out.push_back(std::move(summary));
  }
  return out;
}

/**
 * Predictive samples of the travel time from stop m1 to stop m2 for one
 * target run: per draw, the sum of link times over links m1..m2-1, taking
 * observed links from `observed_links` (data units, NaN where unobserved)
 * and unobserved links from the target's samples converted to data units.
 * Link coordinates are assumed to occupy dims 0..n-1 of the model, which
 * holds for the joint and travel-time variable sets.
 */
inline Eigen::VectorXd trip_time_predictive(const ForecastBundle& bundle,
                                            std::size_t target_index,
                                            const Eigen::VectorXd& observed_links,
                                            int m1, int m2) {
  if (target_index >= bundle.targets.size()) {
    throw IndexOutOfRange("target index " + std::to_string(target_index) +
                          " outside bundle");
  }
  const int n = static_cast<int>(observed_links.size());
  if (m1 < 1 || m2 <= m1 || m2 > n + 1) {
    throw IndexOutOfRange("stop pair (" + std::to_string(m1) + ", " +
                          std::to_string(m2) + ") invalid for " +
                          std::to_string(n) + " links");
  }
  const auto& target = bundle.targets[target_index];
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(bundle.num_draws);
  for (int link = m1 - 1; link <= m2 - 2; ++link) {
    if (std::isfinite(observed_links[link])) {
      totals.array() += observed_links[link];
      continue;
    }
    const auto it = std::find(target.dims.begin(), target.dims.end(), link);
    if (it == target.dims.end()) {
      throw IndexOutOfRange("link " + std::to_string(link + 1) +
                            " is neither observed nor forecast");
    }
    const auto col = static_cast<Eigen::Index>(it - target.dims.begin());
    for (int r = 0; r < bundle.num_draws; ++r) {
      totals[r] += bundle.to_data_units(target.samples(r, col), link);
    }
  }
  return totals;
}

}  // namespace msar
