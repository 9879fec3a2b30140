#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msar/errors.hpp"
#include "msar/model.hpp"

namespace msar {

inline double rmse(const std::vector<double>& predictions,
                   const std::vector<double>& truths) {
  if (predictions.size() != truths.size()) {
    throw LengthMismatch("rmse: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(truths.size()) +
                         " truths");
  }
  if (predictions.empty()) throw EmptyInput("rmse: no values");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double gap = predictions[i] - truths[i];
    total += gap * gap;
  }
  return std::sqrt(total / static_cast<double>(predictions.size()));
}

inline double mae(const std::vector<double>& predictions,
                  const std::vector<double>& truths) {
  if (predictions.size() != truths.size()) {
    throw LengthMismatch("mae: " + std::to_string(predictions.size()) +
                         " predictions vs " + std::to_string(truths.size()) +
                         " truths");
  }
  if (predictions.empty()) throw EmptyInput("mae: no values");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += std::abs(predictions[i] - truths[i]);
  }
  return total / static_cast<double>(predictions.size());
}

/**
 * Sample-based continuous ranked probability score,
 *   mean_i |x_i - y| - (1 / 2 n^2) sum_{i,i'} |x_i - x_{i'}|,
 * where the double sum runs over all ordered pairs including i = i'. The
 * pairwise term is computed exactly from the sorted samples in
 * O(n log n).
 */
inline double crps_samples(const std::vector<double>& samples, double truth) {
  if (samples.size() < 2) {
    throw TooFewSamples("crps needs at least two samples, got " +
                        std::to_string(samples.size()));
  }
  double abs_gap = 0.0;
  for (double x : samples) {
    if (!std::isfinite(x)) throw NonFiniteValue("crps sample is not finite");
    abs_gap += std::abs(x - truth);
  }
  abs_gap /= static_cast<double>(samples.size());

  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  // sum over i < j of x_j - x_i, via prefix sums; ordered pairs double it.
  double pairwise = 0.0;
  double prefix = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    pairwise += static_cast<double>(j) * sorted[j] - prefix;
    prefix += sorted[j];
  }
  const double n = static_cast<double>(samples.size());
  return abs_gap - pairwise / (n * n);
}

// One forecast target entry with its truth, in data units.
struct EvalTarget {
  std::string day_id;
  int run_index;               // run identifier as in the data file
  std::vector<int> flat_dims;  // full run-vector coordinates (0..2n)
  std::vector<double> truth;
  Eigen::MatrixXd samples;     // draws x flat_dims.size()
};

struct MetricsRow {
  std::string model;
  int num_states;
  std::string variable;
  std::string horizon;  // "1", "2", ... or "all"
  double rmse_value;
  double mae_value;
  double crps_value;
};

namespace detail {

struct MetricAccumulator {
  std::vector<double> means;
  std::vector<double> truths;
  std::vector<double> crps_values;

  void add(const std::vector<double>& samples, double truth) {
    double mean = 0.0;
    for (double x : samples) mean += x;
    means.push_back(mean / static_cast<double>(samples.size()));
    truths.push_back(truth);
    crps_values.push_back(crps_samples(samples, truth));
  }

  MetricsRow row(const std::string& model, int num_states,
                 const std::string& variable, const std::string& horizon) const {
    double crps_mean = 0.0;
    for (double c : crps_values) crps_mean += c;
    crps_mean /= static_cast<double>(crps_values.size());
    return MetricsRow{model,      num_states,        variable,
                      horizon,    rmse(means, truths), mae(means, truths),
                      crps_mean};
  }
};

}  // namespace detail

/**
 * Metric table over forecast targets: RMSE and MAE of the predictive
 * means and mean CRPS, grouped by variable and forecast horizon, plus an
 * "all" row per variable.
 *
 * Link and occupancy horizons count links past the target's observed
 * prefix, with the prefix inferred as the smallest forecast link index
 * minus one. Trip travel times sum forecast links from the first
 * unobserved stop m1 to every later stop m2, with horizon m2 - m1; they
 * are derived per draw from the link samples.
 */
inline std::vector<MetricsRow> evaluate_forecasts(
    const std::vector<EvalTarget>& targets, int num_links,
    const std::string& model_label = "", int num_states = 0) {
  if (targets.empty()) return {};
  // variable -> horizon -> accumulator; horizon 0 is the pooled bucket.
  std::map<std::string, std::map<int, detail::MetricAccumulator>> groups;

  for (const auto& target : targets) {
    if (target.flat_dims.size() != target.truth.size() ||
        static_cast<Eigen::Index>(target.flat_dims.size()) !=
            target.samples.cols()) {
      throw LengthMismatch("evaluation target " + target.day_id + "/" +
                           std::to_string(target.run_index) +
                           " has inconsistent shapes");
    }
    if (target.samples.rows() < 2) {
      throw TooFewSamples("evaluation target needs at least two sample draws");
    }
    int min_link = num_links;  // 0-based link dims are 0..n-1
    for (int dim : target.flat_dims) {
      if (dim < 0 || dim > 2 * num_links) {
        throw IndexOutOfRange("flat dim " + std::to_string(dim) +
                              " outside a " + std::to_string(num_links) +
                              "-link run vector");
      }
      if (dim < num_links) min_link = std::min(min_link, dim);
    }
    const int prefix = min_link;  // links 1..prefix observed

    std::vector<double> column(static_cast<std::size_t>(target.samples.rows()));
    for (std::size_t j = 0; j < target.flat_dims.size(); ++j) {
      const int dim = target.flat_dims[j];
      for (Eigen::Index r = 0; r < target.samples.rows(); ++r) {
        column[static_cast<std::size_t>(r)] =
            target.samples(r, static_cast<Eigen::Index>(j));
      }
      std::string variable;
      int horizon;
      if (dim < num_links) {
        variable = "link_travel_time";
        horizon = dim + 1 - prefix;
      } else if (dim < 2 * num_links) {
        variable = "occupancy";
        horizon = dim - num_links + 1 - prefix;
      } else {
        variable = "headway";
        horizon = 1;
      }
      if (horizon < 1) horizon = 1;
      groups[variable][horizon].add(column, target.truth[j]);
      groups[variable][0].add(column, target.truth[j]);
    }

    // Trip travel times from the first unobserved stop.
    std::vector<Eigen::Index> link_cols(static_cast<std::size_t>(num_links),
                                        -1);
    std::vector<double> link_truth(static_cast<std::size_t>(num_links), 0.0);
    for (std::size_t j = 0; j < target.flat_dims.size(); ++j) {
      if (target.flat_dims[j] < num_links) {
        link_cols[static_cast<std::size_t>(target.flat_dims[j])] =
            static_cast<Eigen::Index>(j);
        link_truth[static_cast<std::size_t>(target.flat_dims[j])] =
            target.truth[j];
      }
    }
    Eigen::VectorXd trip = Eigen::VectorXd::Zero(target.samples.rows());
    double trip_truth = 0.0;
    for (int last = prefix; last < num_links; ++last) {
      if (link_cols[static_cast<std::size_t>(last)] < 0) break;
      trip += target.samples.col(link_cols[static_cast<std::size_t>(last)]);
      trip_truth += link_truth[static_cast<std::size_t>(last)];
      const int horizon = last - prefix + 1;  // m2 - m1
      std::vector<double> trip_column(trip.data(), trip.data() + trip.size());
      groups["trip_travel_time"][horizon].add(trip_column, trip_truth);
      groups["trip_travel_time"][0].add(trip_column, trip_truth);
    }
  }

  const std::vector<std::string> variable_order{
      "link_travel_time", "occupancy", "trip_travel_time", "headway"};
  std::vector<MetricsRow> rows;
  for (const auto& variable : variable_order) {
    const auto it = groups.find(variable);
    if (it == groups.end()) continue;
    for (const auto& [horizon, acc] : it->second) {
      if (horizon == 0) continue;
      rows.push_back(acc.row(model_label, num_states, variable,
                             std::to_string(horizon)));
    }
    rows.push_back(it->second.at(0).row(model_label, num_states, variable,
                                        "all"));
  }
  return rows;
}

}  // namespace msar
