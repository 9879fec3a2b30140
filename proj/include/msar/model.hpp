#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "msar/distributions.hpp"
#include "msar/errors.hpp"
#include "msar/linalg.hpp"
#include "msar/rng.hpp"

namespace msar {

/**
 * One bus run over a route with n links, stored flat as
 *   [link travel times (n), occupancies (n), headway]
 * so the vector has length 2n + 1.
 */
class RunVector {
 public:
  RunVector(const Eigen::VectorXd& link_times,
            const Eigen::VectorXd& occupancies, double headway)
      : n_(static_cast<int>(link_times.size())) {
    if (link_times.size() != occupancies.size()) {
      throw LengthMismatch("run vector needs one occupancy per link: " +
                           std::to_string(link_times.size()) + " links, " +
                           std::to_string(occupancies.size()) +
                           " occupancies");
    }
    if (n_ < 1) throw LengthMismatch("run vector needs at least one link");
    y_.resize(2 * n_ + 1);
    y_.head(n_) = link_times;
    y_.segment(n_, n_) = occupancies;
    y_[2 * n_] = headway;
  }

  static RunVector from_flat(const Eigen::VectorXd& y, int num_links) {
    if (num_links < 1 || y.size() != 2 * num_links + 1) {
      throw LengthMismatch("flat run vector of length " +
                           std::to_string(y.size()) + " does not match " +
                           std::to_string(num_links) + " links");
    }
    return RunVector(y.head(num_links), y.segment(num_links, num_links),
                     y[2 * num_links]);
  }

  const Eigen::VectorXd& flat() const { return y_; }
  int num_links() const { return n_; }
  Eigen::VectorXd link_times() const { return y_.head(n_); }
  Eigen::VectorXd occupancies() const { return y_.segment(n_, n_); }
  double headway() const { return y_[2 * n_]; }

 private:
  int n_;
  Eigen::VectorXd y_;
};

// All runs of one service day, in departure order.
struct DaySequence {
  std::string day_id;
  std::vector<RunVector> runs;
};

inline std::vector<Eigen::VectorXd> flatten_runs(const DaySequence& day) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(day.runs.size());
  for (const auto& run : day.runs) out.push_back(run.flat());
  return out;
}

// Which coordinates of the full run vector a model covers.
enum class VariableSet { joint, travel_time, occupancy };

// Flat indices selected by a variable set; the headway coordinate is kept
// in every set.
inline std::vector<int> variable_set_dims(VariableSet set, int num_links) {
  if (num_links < 1) throw DimOutOfRange("need at least one link");
  std::vector<int> dims;
  if (set == VariableSet::joint || set == VariableSet::travel_time) {
    for (int i = 0; i < num_links; ++i) dims.push_back(i);
  }
  if (set == VariableSet::joint || set == VariableSet::occupancy) {
    for (int i = 0; i < num_links; ++i) dims.push_back(num_links + i);
  }
  dims.push_back(2 * num_links);
  return dims;
}

// Stable names for full-vector coordinates: ltt_1..ltt_n, occ_1..occ_n, hw.
inline std::string flat_dim_name(int flat_index, int num_links) {
  if (flat_index < 0 || flat_index > 2 * num_links) {
    throw IndexOutOfRange("flat index " + std::to_string(flat_index) +
                          " outside a " + std::to_string(num_links) +
                          "-link run vector");
  }
  if (flat_index < num_links) return "ltt_" + std::to_string(flat_index + 1);
  if (flat_index < 2 * num_links) {
    return "occ_" + std::to_string(flat_index - num_links + 1);
  }
  return "hw";
}

/**
 * Parameters of a K-state Markov-switching vector autoregression:
 * transition matrix over hidden states and per-state (A_k, mu_k, Sigma_k)
 * for the observation law y_i | y_{i-1}, z_i = k ~ N(A_k y_{i-1} + mu_k,
 * Sigma_k).
 */
struct RegimeParams {
  Eigen::MatrixXd transition;          // K x K, rows sum to 1
  std::vector<Eigen::MatrixXd> coeff;  // K matrices, dim x dim
  std::vector<Eigen::VectorXd> mean;   // K vectors, dim
  std::vector<SpdMatrix> cov;          // K matrices, dim x dim

  int num_states() const { return static_cast<int>(mean.size()); }
  int dim() const {
    return mean.empty() ? 0 : static_cast<int>(mean.front().size());
  }

  void validate() const {
    const int k = num_states();
    if (k < 1) throw InvariantViolation("regime parameters need K >= 1");
    if (static_cast<int>(coeff.size()) != k ||
        static_cast<int>(cov.size()) != k) {
      throw InvariantViolation("regime parameter lists disagree on K");
    }
    if (transition.rows() != k || transition.cols() != k) {
      throw InvariantViolation("transition matrix is " +
                               std::to_string(transition.rows()) + "x" +
                               std::to_string(transition.cols()) +
                               " for K = " + std::to_string(k));
    }
    const int d = dim();
    if (d < 1) throw InvariantViolation("regime parameters need dim >= 1");
    for (int s = 0; s < k; ++s) {
      if (mean[s].size() != d || coeff[s].rows() != d || coeff[s].cols() != d ||
          cov[s].dim() != d) {
        throw InvariantViolation("state " + std::to_string(s) +
                                 " parameters disagree on dimension");
      }
      try {
        ProbVector(transition.row(s).transpose());
      } catch (const Error& e) {
        throw InvariantViolation("transition row " + std::to_string(s) +
                                 " is not a probability vector: " + e.what());
      }
    }
  }
};

/**
 * Conjugate prior settings: Sigma_k ~ IW(psi0, nu0), mu_k | Sigma_k ~
 * N(mu0, Sigma_k / lambda0), A_k | Sigma_k ~ MN(m0, Sigma_k, v0), and
 * Dirichlet(alpha) on each transition row.
 */
struct Hyperparams {
  Eigen::VectorXd mu0;
  double lambda0;
  SpdMatrix psi0;
  double nu0;
  Eigen::MatrixXd m0;
  SpdMatrix v0;
  Eigen::VectorXd alpha;  // length K

  // Weakly informative defaults: zero locations, identity scale matrices,
  // lambda0 = 2, nu0 = dim + 2 (the smallest integer order keeping the
  // prior covariance mean equal to psi0), alpha = 0.2 per transition target.
  static Hyperparams defaults(int dim, int num_states) {
    if (dim < 1) throw DimOutOfRange("hyperparameter dim must be >= 1");
    if (num_states < 1) throw DimOutOfRange("need at least one state");
    return Hyperparams{Eigen::VectorXd::Zero(dim),
                       2.0,
                       SpdMatrix::identity(dim),
                       static_cast<double>(dim) + 2.0,
                       Eigen::MatrixXd::Zero(dim, dim),
                       SpdMatrix::identity(dim),
                       Eigen::VectorXd::Constant(num_states, 0.2)};
  }

  void validate(int dim, int num_states) const {
    if (mu0.size() != dim || psi0.dim() != dim || m0.rows() != dim ||
        m0.cols() != dim || v0.dim() != dim) {
      throw InvariantViolation("hyperparameters disagree with dim " +
                               std::to_string(dim));
    }
    if (!(lambda0 > 0.0)) {
      throw InvariantViolation("lambda0 must be positive");
    }
    if (!(nu0 > static_cast<double>(dim - 1))) {
      throw DegreesOfFreedomTooSmall("nu0 must exceed dim - 1");
    }
    if (alpha.size() != num_states) {
      throw InvariantViolation("alpha has " + std::to_string(alpha.size()) +
                               " entries for K = " +
                               std::to_string(num_states));
    }
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
      if (!(alpha[i] > 0.0)) {
        throw NonPositiveConcentration("alpha entry " + std::to_string(i) +
                                       " must be positive");
      }
    }
  }
};

struct StationaryResult {
  ProbVector probs;
  bool converged;  // false means the uniform fallback was returned
};

/**
 * Stationary distribution of a row-stochastic matrix by power iteration
 * from the uniform vector, to 1e-12 in L1. Chains that fail to converge
 * within 1e5 sweeps get the uniform distribution with converged = false.
 */
inline StationaryResult stationary_distribution(
    const Eigen::MatrixXd& transition) {
  const Eigen::Index k = transition.rows();
  if (k < 1 || transition.cols() != k) {
    throw LengthMismatch("transition matrix must be square and non-empty");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  for (int sweep = 0; sweep < 100000; ++sweep) {
    Eigen::VectorXd next = transition.transpose() * v;
    next /= next.sum();
    const double gap = (next - v).cwiseAbs().sum();
    v = next;
    if (gap <= 1e-12) return StationaryResult{ProbVector(v), true};
  }
  return StationaryResult{
      ProbVector(Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k))),
      false};
}

// Travel time over stops m1..m2 (1-based, 1 <= m1 < m2 <= n + 1): the sum
// of link times m1 .. m2 - 1.
inline double trip_travel_time(const Eigen::VectorXd& link_times, int m1,
                               int m2) {
  const int n = static_cast<int>(link_times.size());
  if (m1 < 1 || m2 <= m1 || m2 > n + 1) {
    throw IndexOutOfRange("stop pair (" + std::to_string(m1) + ", " +
                          std::to_string(m2) + ") invalid for " +
                          std::to_string(n) + " links");
  }
  return link_times.segment(m1 - 1, m2 - m1).sum();
}

// Simulated days in flat-vector form plus the hidden states behind them.
struct SimulatedSequences {
  std::vector<std::vector<Eigen::VectorXd>> days;
  std::vector<std::vector<int>> states;
};

/**
 * Draw `num_days` independent days of `runs_per_day` runs from the model:
 * z_1 ~ stationary(transition), y_1 ~ N(mu_{z_1}, Sigma_{z_1}) (no
 * autoregressive term for the first run of a day), then z_i ~ row z_{i-1}
 * and y_i ~ N(A_{z_i} y_{i-1} + mu_{z_i}, Sigma_{z_i}).
 *
 * Each day is generated from a substream keyed by its index, so the draw
 * for day d does not depend on how many runs earlier days have.
 */
inline SimulatedSequences simulate_sequences(const RegimeParams& params,
                                             int num_days, int runs_per_day,
                                             Rng& rng) {
  params.validate();
  if (num_days < 1 || runs_per_day < 1) {
    throw InvalidArgument("need at least one day and one run per day");
  }
  const int k = params.num_states();
  const Eigen::VectorXd initial =
      stationary_distribution(params.transition).probs.vec();
  std::vector<Eigen::MatrixXd> chol_cov;
  chol_cov.reserve(k);
  for (int s = 0; s < k; ++s) chol_cov.push_back(cholesky(params.cov[s].mat()));

  const int d = params.dim();
  SimulatedSequences out;
  out.days.resize(num_days);
  out.states.resize(num_days);
  for (int day = 0; day < num_days; ++day) {
    Rng day_rng = rng.stream(0x5349u, static_cast<std::uint64_t>(day));
    auto& runs = out.days[day];
    auto& states = out.states[day];
    runs.reserve(runs_per_day);
    states.reserve(runs_per_day);
    for (int i = 0; i < runs_per_day; ++i) {
      int z;
      Eigen::VectorXd mean;
      if (i == 0) {
        z = day_rng.categorical(initial);
        mean = params.mean[z];
      } else {
        z = day_rng.categorical(params.transition.row(states.back()).transpose());
        mean = params.coeff[z] * runs.back() + params.mean[z];
      }
      Eigen::VectorXd noise(d);
      for (int j = 0; j < d; ++j) noise[j] = day_rng.normal();
      runs.push_back(mean + chol_cov[z] * noise);
      states.push_back(z);
    }
  }
  return out;
}

struct SimulatedDataset {
  std::vector<DaySequence> days;
  std::vector<std::vector<int>> states;
};

// As simulate_sequences, with runs wrapped as RunVector (dim = 2n + 1) and
// day ids day_001, day_002, ...
inline SimulatedDataset simulate_dataset(const RegimeParams& params,
                                         int num_days, int runs_per_day,
                                         Rng& rng) {
  const int d = params.dim();
  if (d < 3 || d % 2 == 0) {
    throw DimOutOfRange("run vectors need odd dimension >= 3, got " +
                        std::to_string(d));
  }
  const int n = (d - 1) / 2;
  SimulatedSequences seqs = simulate_sequences(params, num_days, runs_per_day, rng);
  SimulatedDataset out;
  out.states = std::move(seqs.states);
  out.days.reserve(num_days);
  for (int day = 0; day < num_days; ++day) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "day_%03d", day + 1);
    DaySequence ds{buf, {}};
    ds.runs.reserve(seqs.days[day].size());
    for (const auto& y : seqs.days[day]) ds.runs.push_back(RunVector::from_flat(y, n));
    out.days.push_back(std::move(ds));
  }
  return out;
}

// Knobs for generating a random but stable parameter set.
struct RegimeRecipe {
  double spectral_radius = 0.5;  // largest |eigenvalue| of each A_k, <= 0.95
  double cross_coupling = 0.3;   // scale of off-diagonal coefficient noise
  double mean_scale = 2.0;       // spread of regime means
  double noise_scale = 0.5;      // observation noise scale
  double stay_prob = 0.8;        // transition diagonal (K > 1)
};

inline double spectral_radius(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/**
 * Random parameter set with every A_k rescaled to the requested spectral
 * radius, diagonally dominant before rescaling, so simulations stay
 * bounded.
 */
inline RegimeParams random_regime(int dim, int num_states,
                                  const RegimeRecipe& recipe, Rng& rng) {
  if (dim < 1 || num_states < 1) {
    throw DimOutOfRange("random regime needs dim >= 1 and K >= 1");
  }
  if (!(recipe.spectral_radius > 0.0) || recipe.spectral_radius > 0.95) {
    throw ConfigError("spectral radius must lie in (0, 0.95], got " +
                      std::to_string(recipe.spectral_radius));
  }
  if (recipe.stay_prob < 0.0 || recipe.stay_prob > 1.0) {
    throw ConfigError("stay probability must lie in [0, 1]");
  }
  RegimeParams params;
  for (int s = 0; s < num_states; ++s) {
    Eigen::MatrixXd a(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        a(i, j) = i == j ? 0.5 + 0.4 * rng.uniform()
                         : recipe.cross_coupling * rng.normal() /
                               static_cast<double>(dim);
      }
    }
    const double rho = spectral_radius(a);
    if (rho > 0.0) a *= recipe.spectral_radius / rho;
    params.coeff.push_back(a);

    Eigen::VectorXd mu(dim);
    for (int i = 0; i < dim; ++i) mu[i] = recipe.mean_scale * rng.normal();
    params.mean.push_back(mu);

    Eigen::MatrixXd w(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) w(i, j) = rng.normal();
    }
    Eigen::MatrixXd sigma =
        recipe.noise_scale * recipe.noise_scale *
        (Eigen::MatrixXd::Identity(dim, dim) +
         0.5 * (w * w.transpose()) / static_cast<double>(dim));
    params.cov.push_back(SpdMatrix(sigma));
  }
  if (num_states == 1) {
    params.transition = Eigen::MatrixXd::Ones(1, 1);
  } else {
    const double off = (1.0 - recipe.stay_prob) /
                       static_cast<double>(num_states - 1);
    params.transition =
        Eigen::MatrixXd::Constant(num_states, num_states, off);
    params.transition.diagonal().setConstant(recipe.stay_prob);
  }
  params.validate();
  return params;
}

}  // namespace msar
