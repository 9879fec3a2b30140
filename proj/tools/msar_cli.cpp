// Command-line front end: simulate synthetic corpora, fit the
// regime-switching VAR or the Gaussian-mixture baseline, draw conditional
// forecasts from partial observations, score forecasts, and inspect fitted
// parameters. Diagnostics go to stderr; data goes to the requested files
// only. Exit codes: 0 success, 2 usage/config/data problems, 3 numerical
// failures.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msar/bgmm.hpp"
#include "msar/errors.hpp"
#include "msar/forecast.hpp"
#include "msar/inference.hpp"
#include "msar/io.hpp"
#include "msar/metrics.hpp"
#include "msar/model.hpp"
#include "msar/rng.hpp"

namespace {

using nlohmann::json;

// Stream keys for per-command substreams.
constexpr std::uint64_t kRecipeTag = 0x524543u;
constexpr std::uint64_t kForecastDayTag = 0x444159u;

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string truth_out;
  std::uint64_t seed = 1;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw msar::DataError("cannot open " + path + " for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw msar::ParseError(path + ": " + e.what());
  }
  return j;
}

int require_positive_int(const json& cfg, const char* primary,
                         const char* alias, const std::string& path) {
  const char* key = cfg.contains(primary) ? primary
                    : (alias != nullptr && cfg.contains(alias)) ? alias
                                                                : nullptr;
  if (key == nullptr || !cfg[key].is_number_integer()) {
    throw msar::ConfigError(path + ": missing integer field '" +
                            std::string(primary) + "'");
  }
  const int value = cfg[key].get<int>();
  if (value < 1) {
    throw msar::ConfigError(path + ": field '" + std::string(primary) +
                            "' must be >= 1");
  }
  return value;
}

msar::RegimeParams params_from_json(const json& p, int num_links,
                                    int num_states, const std::string& where) {
  msar::RegimeParams params;
  params.transition = msar::io::detail::matrix_from_json(p.at("pi"),
                                                         where + ": pi");
  const auto& a = p.at("A");
  const auto& mu = p.at("mu");
  const auto& sigma = p.at("sigma");
  if (static_cast<int>(a.size()) != num_states ||
      static_cast<int>(mu.size()) != num_states ||
      static_cast<int>(sigma.size()) != num_states) {
    throw msar::ConfigError(where + ": per-state parameter lists must have K = " +
                            std::to_string(num_states) + " entries");
  }
  for (int s = 0; s < num_states; ++s) {
    params.coeff.push_back(
        msar::io::detail::matrix_from_json(a[s], where + ": A"));
    params.mean.push_back(
        msar::io::detail::vector_from_json(mu[s], where + ": mu"));
    params.cov.push_back(msar::SpdMatrix(
        msar::io::detail::matrix_from_json(sigma[s], where + ": sigma")));
  }
  try {
    params.validate();
  } catch (const msar::Error& e) {
    throw msar::ConfigError(where + ": " + e.what());
  }
  if (params.dim() != 2 * num_links + 1) {
    throw msar::ConfigError(where + ": parameters have dimension " +
                            std::to_string(params.dim()) + ", expected 2n+1 = " +
                            std::to_string(2 * num_links + 1));
  }
  return params;
}

void run_simulate(const SimulateArgs& args) {
  const json cfg = read_json_file(args.config);
  const int num_links = require_positive_int(cfg, "n", nullptr, args.config);
  const int num_states = require_positive_int(cfg, "K", nullptr, args.config);
  const int num_days = require_positive_int(cfg, "days", "D", args.config);
  const int runs_per_day =
      require_positive_int(cfg, "runs_per_day", "runs", args.config);

  msar::Rng rng(args.seed);
  msar::RegimeParams params;
  if (cfg.contains("params")) {
    params = params_from_json(cfg["params"], num_links, num_states,
                              args.config + ": params");
  } else {
    msar::RegimeRecipe recipe;
    if (cfg.contains("recipe")) {
      const auto& r = cfg["recipe"];
      recipe.spectral_radius = r.value("spectral_radius", recipe.spectral_radius);
      recipe.cross_coupling = r.value("cross_coupling", recipe.cross_coupling);
      recipe.mean_scale = r.value("mean_scale", recipe.mean_scale);
      recipe.noise_scale = r.value("noise_scale", recipe.noise_scale);
      recipe.stay_prob = r.value("stay_prob", recipe.stay_prob);
    }
    msar::Rng recipe_rng = rng.stream(kRecipeTag);
    params = msar::random_regime(2 * num_links + 1, num_states, recipe,
                                 recipe_rng);
  }

  const msar::SimulatedDataset data =
      msar::simulate_dataset(params, num_days, runs_per_day, rng);
  msar::io::save_link_records(args.out, data.days);

  if (!args.truth_out.empty()) {
    json truth;
    truth["format_version"] = 1;
    truth["type"] = "simulation_truth";
    truth["n"] = num_links;
    truth["K"] = num_states;
    json pj;
    pj["pi"] = msar::io::detail::matrix_json(params.transition);
    json a = json::array(), mu = json::array(), sigma = json::array();
    for (int s = 0; s < num_states; ++s) {
      a.push_back(msar::io::detail::matrix_json(params.coeff[s]));
      mu.push_back(msar::io::detail::vector_json(params.mean[s]));
      sigma.push_back(msar::io::detail::matrix_json(params.cov[s].mat()));
    }
    pj["A"] = std::move(a);
    pj["mu"] = std::move(mu);
    pj["sigma"] = std::move(sigma);
    truth["params"] = std::move(pj);
    json day_ids = json::array(), states = json::array();
    for (std::size_t d = 0; d < data.days.size(); ++d) {
      day_ids.push_back(data.days[d].day_id);
      states.push_back(data.states[d]);
    }
    truth["day_ids"] = std::move(day_ids);
    truth["states"] = std::move(states);
    std::ofstream out(args.truth_out);
    if (!out) {
      throw msar::DataError("cannot open " + args.truth_out + " for writing");
    }
    out << truth.dump(1) << "\n";
  }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string model = "msar";
  bool joint = false;
  std::string separate;
  int num_states = 0;
  int burn_in = 500;
  int samples = 200;
  int thin = 1;
  int threads = 1;
  std::uint64_t seed = 1;
  std::string out;
};

std::vector<std::vector<Eigen::VectorXd>> slice_days(
    const std::vector<msar::DaySequence>& days, const std::vector<int>& dims) {
  std::vector<std::vector<Eigen::VectorXd>> out(days.size());
  for (std::size_t d = 0; d < days.size(); ++d) {
    out[d].reserve(days[d].runs.size());
    for (const auto& run : days[d].runs) {
      Eigen::VectorXd sliced(static_cast<Eigen::Index>(dims.size()));
      for (std::size_t i = 0; i < dims.size(); ++i) {
        sliced[static_cast<Eigen::Index>(i)] = run.flat()[dims[i]];
      }
      out[d].push_back(std::move(sliced));
    }
  }
  return out;
}

void log_progress(int iteration, double log_likelihood) {
  std::fprintf(stderr, "iteration %d log-likelihood %.6f\n", iteration,
               log_likelihood);
}

void run_fit(const FitArgs& args) {
  if (args.num_states < 1) throw msar::ConfigError("--k must be >= 1");
  msar::VariableSet set = msar::VariableSet::joint;
  if (!args.separate.empty()) set = msar::io::parse_variable_set(args.separate);

  const msar::io::LinkRecordData records =
      msar::io::load_link_records(args.data);
  const int n = records.num_links;
  const std::vector<int> dims = msar::variable_set_dims(set, n);
  const msar::io::StandardizedSequences standardized =
      msar::io::standardize(slice_days(records.days, dims));
  const int dim = static_cast<int>(dims.size());

  const msar::Hyperparams hyper =
      msar::Hyperparams::defaults(dim, args.num_states);
  msar::GibbsOptions options;
  options.threads = args.threads;
  options.keep_states = false;
  options.progress = log_progress;

  msar::Rng rng(args.seed);
  msar::io::ModelMeta meta;
  meta.model_type = args.model;
  meta.variable_set = msar::io::variable_set_name(set);
  meta.num_links = n;
  meta.dim = dim;
  meta.num_states = args.num_states;
  meta.hyper = hyper;
  meta.stats = standardized.stats;

  if (args.model == "msar") {
    meta.num_periods = 1;
    const std::vector<msar::PosteriorDraw> draws =
        msar::gibbs_fit(standardized.days, hyper, args.num_states,
                        args.burn_in, args.samples, rng, args.thin, options);
    msar::io::save_model(args.out, meta, draws);
  } else {
    std::vector<Eigen::VectorXd> runs;
    std::vector<int> periods;
    for (std::size_t d = 0; d < standardized.days.size(); ++d) {
      for (std::size_t r = 0; r < standardized.days[d].size(); ++r) {
        runs.push_back(standardized.days[d][r]);
        periods.push_back(records.periods[d][r]);
      }
    }
    int num_periods = 1;
    for (int t : periods) num_periods = std::max(num_periods, t + 1);
    meta.num_periods = num_periods;
    const std::vector<msar::BgmmDraw> draws =
        msar::bgmm_gibbs_fit(runs, periods, hyper, args.num_states,
                             args.burn_in, args.samples, rng, args.thin,
                             options);
    msar::io::save_model(args.out, meta, draws);
  }
}

// ---------------------------------------------------------------------------
// forecast
// ---------------------------------------------------------------------------

struct ForecastArgs {
  std::string model;
  std::string data;
  std::string cut;
  std::string targets = "all";
  std::string samples_out;
  std::string summary_out;
  int threads = 1;
  std::uint64_t seed = 1;
};

void run_forecast(const ForecastArgs& args) {
  const msar::io::LoadedModel model = msar::io::load_model(args.model);
  const msar::io::LinkRecordData records =
      msar::io::load_link_records(args.data);
  const int n = records.num_links;
  if (n != model.meta.num_links) {
    throw msar::ConfigError("model was fitted for " +
                            std::to_string(model.meta.num_links) +
                            " links, data has " + std::to_string(n));
  }
  const msar::io::ForecastCut cut = msar::io::load_forecast_cut(args.cut);

  // Locate days and runs named by the cut; reject anything unknown.
  std::map<std::string, std::size_t> day_of;
  for (std::size_t d = 0; d < records.days.size(); ++d) {
    day_of[records.days[d].day_id] = d;
  }
  const auto find_run_pos = [&](const std::string& day_id, int run_index,
                                const std::string& what) -> std::pair<std::size_t, std::size_t> {
    const auto it = day_of.find(day_id);
    if (it == day_of.end()) {
      throw msar::ConfigError(what + " names unknown day '" + day_id + "'");
    }
    const auto& indices = records.run_indices[it->second];
    for (std::size_t r = 0; r < indices.size(); ++r) {
      if (indices[r] == run_index) return {it->second, r};
    }
    throw msar::ConfigError(what + " names unknown run " +
                            std::to_string(run_index) + " of day '" + day_id +
                            "'");
  };
  for (const auto& [key, observed] : cut) {
    find_run_pos(key.first, key.second, "cut file");
    if (observed > n) {
      throw msar::ConfigError("cut file: observed_links " +
                              std::to_string(observed) + " exceeds n = " +
                              std::to_string(n));
    }
  }

  const msar::VariableSet set =
      msar::io::parse_variable_set(model.meta.variable_set);
  const std::vector<int> dims = msar::variable_set_dims(set, n);
  const msar::io::StandardizationStats& stats = model.meta.stats;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // Model-space partial runs per day: slice to the model's coordinates,
  // standardize observed entries, blank unobserved ones.
  std::vector<std::vector<msar::PartialRun>> partial_days;
  partial_days.reserve(records.days.size());
  for (std::size_t d = 0; d < records.days.size(); ++d) {
    std::vector<msar::PartialRun> runs;
    runs.reserve(records.days[d].runs.size());
    for (std::size_t r = 0; r < records.days[d].runs.size(); ++r) {
      const auto it = cut.find({records.days[d].day_id,
                                records.run_indices[d][r]});
      const int observed = it == cut.end() ? -1 : it->second;
      const msar::PartialRun global =
          observed < 0
              ? msar::PartialRun::complete(records.days[d].runs[r].flat())
              : msar::prefix_partial(records.days[d].runs[r], observed);
      Eigen::VectorXd values(static_cast<Eigen::Index>(dims.size()));
      std::vector<bool> mask(dims.size());
      for (std::size_t i = 0; i < dims.size(); ++i) {
        mask[i] = global.observed()[static_cast<std::size_t>(dims[i])];
        values[static_cast<Eigen::Index>(i)] =
            mask[i] ? (global.values()[dims[i]] - stats.mean[static_cast<Eigen::Index>(i)]) /
                          stats.stdev[static_cast<Eigen::Index>(i)]
                    : nan;
      }
      runs.emplace_back(std::move(values), std::move(mask));
    }
    partial_days.push_back(std::move(runs));
  }

  // Targets: "all" incomplete runs, or an explicit day_id:run_index list.
  std::vector<std::vector<int>> targets_by_day(records.days.size());
  if (args.targets == "all") {
    for (std::size_t d = 0; d < partial_days.size(); ++d) {
      for (std::size_t r = 0; r < partial_days[d].size(); ++r) {
        if (!partial_days[d][r].fully_observed()) {
          targets_by_day[d].push_back(static_cast<int>(r));
        }
      }
    }
  } else {
    std::stringstream list(args.targets);
    std::string item;
    while (std::getline(list, item, ',')) {
      const auto colon = item.rfind(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 == item.size()) {
        throw msar::ConfigError(
            "--targets items must be day_id:run_index, got '" + item + "'");
      }
      const std::string day_id = item.substr(0, colon);
      int run_index = 0;
      try {
        run_index = std::stoi(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw msar::ConfigError("--targets run index in '" + item +
                                "' is not an integer");
      }
      const auto [d, r] = find_run_pos(day_id, run_index, "--targets");
      targets_by_day[d].push_back(static_cast<int>(r));
    }
  }

  const bool is_msar = model.is_msar();
  msar::Rng rng(args.seed);
  std::vector<msar::io::SampleRecord> sample_rows;
  std::ofstream summary(args.summary_out);
  if (!summary) {
    throw msar::DataError("cannot open " + args.summary_out + " for writing");
  }
  summary << "day_id,run_index,entry,mean,q05,q25,q50,q75,q95\n";
  const std::vector<double> probs{0.05, 0.25, 0.5, 0.75, 0.95};

  for (std::size_t d = 0; d < partial_days.size(); ++d) {
    std::vector<int> positions = targets_by_day[d];
    if (is_msar) {
      // The autoregression needs a predecessor: the first run of a day has
      // none, so such targets are reported and skipped.
      std::vector<int> kept;
      for (int pos : positions) {
        if (pos == 0) {
          std::fprintf(stderr,
                       "skipping target %s run %d: the first run of a day "
                       "has no predecessor to forecast from\n",
                       records.days[d].day_id.c_str(),
                       records.run_indices[d][0]);
        } else {
          kept.push_back(pos);
        }
      }
      positions = std::move(kept);
    }
    if (positions.empty()) continue;

    msar::Rng day_rng = rng.stream(kForecastDayTag,
                                   static_cast<std::uint64_t>(d));
    msar::ForecastBundle bundle;
    if (is_msar) {
      bundle = msar::rolling_forecast(partial_days[d], model.msar_draws,
                                      positions, day_rng, args.threads);
    } else {
      for (int t : records.periods[d]) {
        if (t >= model.meta.num_periods) {
          throw msar::ConfigError("day " + records.days[d].day_id +
                                  " uses period " + std::to_string(t) +
                                  ", model has " +
                                  std::to_string(model.meta.num_periods));
        }
      }
      bundle = msar::bgmm_forecast_day(partial_days[d], records.periods[d],
                                       positions, model.bgmm_draws, day_rng,
                                       args.threads);
    }
    bundle.stats_mean = stats.mean;
    bundle.stats_std = stats.stdev;

    const std::vector<msar::TargetSummary> summaries =
        msar::predictive_summary(bundle, probs);
    for (std::size_t t = 0; t < bundle.targets.size(); ++t) {
      const auto& target = bundle.targets[t];
      const int run_index = records.run_indices[d][target.run_pos];
      for (std::size_t j = 0; j < target.dims.size(); ++j) {
        const std::string entry =
            msar::flat_dim_name(dims[static_cast<std::size_t>(target.dims[j])], n);
        for (int r = 0; r < bundle.num_draws; ++r) {
          sample_rows.push_back(msar::io::SampleRecord{
              records.days[d].day_id, run_index, entry, r,
              bundle.to_data_units(
                  target.samples(r, static_cast<Eigen::Index>(j)),
                  target.dims[j])});
        }
        summary << records.days[d].day_id << ',' << run_index << ',' << entry
                << ',' << msar::io::format_double(summaries[t].mean[static_cast<Eigen::Index>(j)]);
        for (Eigen::Index q = 0; q < summaries[t].quantiles.cols(); ++q) {
          summary << ','
                  << msar::io::format_double(
                         summaries[t].quantiles(static_cast<Eigen::Index>(j), q));
        }
        summary << "\n";
      }
    }
  }
  msar::io::save_forecast_samples(args.samples_out, sample_rows);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string truth;
  std::string samples;
  std::string out;
  std::string json_out;
  std::string model_label;
  int num_states = 0;
};

void run_evaluate(const EvaluateArgs& args) {
  const msar::io::LinkRecordData truth =
      msar::io::load_link_records(args.truth);
  const std::vector<msar::io::SampleRecord> records =
      msar::io::load_forecast_samples(args.samples);
  const int n = truth.num_links;

  // (day, run) -> dim -> (draw, value), ordered for deterministic output.
  std::map<std::pair<std::string, int>,
           std::map<int, std::vector<std::pair<int, double>>>>
      grouped;
  for (const auto& record : records) {
    const int dim = msar::io::parse_dim_name(record.entry, n);
    grouped[{record.day_id, record.run_index}][dim].emplace_back(record.draw,
                                                                 record.value);
  }

  std::map<std::string, std::size_t> day_of;
  for (std::size_t d = 0; d < truth.days.size(); ++d) {
    day_of[truth.days[d].day_id] = d;
  }

  std::vector<msar::EvalTarget> targets;
  for (auto& [key, by_dim] : grouped) {
    const auto day_it = day_of.find(key.first);
    if (day_it == day_of.end()) {
      throw msar::MissingTruth("no truth for day '" + key.first + "'");
    }
    const std::size_t d = day_it->second;
    std::size_t run_pos = std::numeric_limits<std::size_t>::max();
    for (std::size_t r = 0; r < truth.run_indices[d].size(); ++r) {
      if (truth.run_indices[d][r] == key.second) {
        run_pos = r;
        break;
      }
    }
    if (run_pos == std::numeric_limits<std::size_t>::max()) {
      throw msar::MissingTruth("no truth for day '" + key.first + "', run " +
                               std::to_string(key.second));
    }
    const Eigen::VectorXd& truth_run = truth.days[d].runs[run_pos].flat();

    msar::EvalTarget target;
    target.day_id = key.first;
    target.run_index = key.second;
    int draw_count = -1;
    for (auto& [dim, draws] : by_dim) {
      std::sort(draws.begin(), draws.end());
      if (draw_count < 0) {
        draw_count = static_cast<int>(draws.size());
        target.samples.resize(draw_count, static_cast<Eigen::Index>(by_dim.size()));
      }
      if (static_cast<int>(draws.size()) != draw_count) {
        throw msar::SchemaError("entry counts disagree for day '" + key.first +
                                "', run " + std::to_string(key.second));
      }
      for (int r = 0; r < draw_count; ++r) {
        if (draws[static_cast<std::size_t>(r)].first != r) {
          throw msar::SchemaError("draw indices for day '" + key.first +
                                  "', run " + std::to_string(key.second) +
                                  " are not exactly 0.." +
                                  std::to_string(draw_count - 1));
        }
        target.samples(r, static_cast<Eigen::Index>(target.flat_dims.size())) =
            draws[static_cast<std::size_t>(r)].second;
      }
      target.flat_dims.push_back(dim);
      target.truth.push_back(truth_run[dim]);
    }
    targets.push_back(std::move(target));
  }

  const std::vector<msar::MetricsRow> rows = msar::evaluate_forecasts(
      targets, n, args.model_label, args.num_states);

  std::ofstream out(args.out);
  if (!out) throw msar::DataError("cannot open " + args.out + " for writing");
  out << "model,K,variable,horizon,rmse,mae,crps\n";
  for (const auto& row : rows) {
    out << row.model << ',' << row.num_states << ',' << row.variable << ','
        << row.horizon << ',' << msar::io::format_double(row.rmse_value) << ','
        << msar::io::format_double(row.mae_value) << ','
        << msar::io::format_double(row.crps_value) << "\n";
  }

  if (!args.json_out.empty()) {
    json j = json::array();
    for (const auto& row : rows) {
      j.push_back({{"model", row.model},
                   {"K", row.num_states},
                   {"variable", row.variable},
                   {"horizon", row.horizon},
                   {"rmse", row.rmse_value},
                   {"mae", row.mae_value},
                   {"crps", row.crps_value}});
    }
    std::ofstream jout(args.json_out);
    if (!jout) {
      throw msar::DataError("cannot open " + args.json_out + " for writing");
    }
    jout << j.dump(1) << "\n";
  }
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string model;
  std::string what;
  std::string out;
};

void run_inspect(const InspectArgs& args) {
  const msar::io::LoadedModel model = msar::io::load_model(args.model);
  const int k = model.meta.num_states;
  const int dim = model.meta.dim;
  const std::vector<int> dims = msar::variable_set_dims(
      msar::io::parse_variable_set(model.meta.variable_set),
      model.meta.num_links);

  // Posterior means of everything we may print.
  Eigen::MatrixXd mean_pi = Eigen::MatrixXd::Zero(k, k);
  std::vector<Eigen::MatrixXd> mean_coeff(
      static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(dim, dim));
  std::vector<Eigen::VectorXd> mean_mu(static_cast<std::size_t>(k),
                                       Eigen::VectorXd::Zero(dim));
  std::vector<Eigen::MatrixXd> mean_sigma(
      static_cast<std::size_t>(k), Eigen::MatrixXd::Zero(dim, dim));
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(k);

  if (model.is_msar()) {
    const double count = static_cast<double>(model.msar_draws.size());
    for (const auto& draw : model.msar_draws) {
      mean_pi += draw.regime.transition / count;
      for (int s = 0; s < k; ++s) {
        mean_coeff[static_cast<std::size_t>(s)] += draw.regime.coeff[s] / count;
        mean_mu[static_cast<std::size_t>(s)] += draw.regime.mean[s] / count;
        mean_sigma[static_cast<std::size_t>(s)] +=
            draw.regime.cov[s].mat() / count;
      }
    }
    mass = msar::stationary_distribution(mean_pi).probs.vec();
  } else {
    if (args.what == "transition" || args.what == "coefficients" ||
        args.what == "stationary") {
      throw msar::ConfigError("--what " + args.what +
                              " is not available for mixture models");
    }
    const double count = static_cast<double>(model.bgmm_draws.size());
    Eigen::MatrixXd mean_mixing =
        Eigen::MatrixXd::Zero(model.meta.num_periods, k);
    for (const auto& draw : model.bgmm_draws) {
      mean_mixing += draw.mixing / count;
      for (int s = 0; s < k; ++s) {
        mean_mu[static_cast<std::size_t>(s)] += draw.mean[s] / count;
        mean_sigma[static_cast<std::size_t>(s)] += draw.cov[s].mat() / count;
      }
    }
    mass = mean_mixing.colwise().mean().transpose();
  }

  // Deterministic presentation order: descending mass, ties by index.
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return mass[a] > mass[b]; });

  std::ofstream out(args.out);
  if (!out) throw msar::DataError("cannot open " + args.out + " for writing");

  if (args.what == "transition") {
    out << "state";
    for (int j = 1; j <= k; ++j) out << ",to_" << j;
    out << "\n";
    for (int i = 0; i < k; ++i) {
      out << (i + 1);
      for (int j = 0; j < k; ++j) {
        out << ',' << msar::io::format_double(mean_pi(order[i], order[j]));
      }
      out << "\n";
    }
  } else if (args.what == "stationary") {
    out << "state,mass\n";
    for (int i = 0; i < k; ++i) {
      out << (i + 1) << ',' << msar::io::format_double(mass[order[i]]) << "\n";
    }
  } else if (args.what == "means") {
    for (int i = 0; i < dim; ++i) {
      out << (i > 0 ? "," : "")
          << msar::flat_dim_name(dims[static_cast<std::size_t>(i)],
                                 model.meta.num_links);
    }
    out << "\n";
    for (int i = 0; i < k; ++i) {
      const auto& mu = mean_mu[static_cast<std::size_t>(order[i])];
      for (int j = 0; j < dim; ++j) {
        out << (j > 0 ? "," : "") << msar::io::format_double(mu[j]);
      }
      out << "\n";
    }
  } else if (args.what == "covariances" || args.what == "coefficients") {
    const auto& stack =
        args.what == "covariances" ? mean_sigma : mean_coeff;
    out << "state,row";
    for (int i = 0; i < dim; ++i) {
      out << ',' << msar::flat_dim_name(dims[static_cast<std::size_t>(i)],
                                        model.meta.num_links);
    }
    out << "\n";
    for (int i = 0; i < k; ++i) {
      const auto& m = stack[static_cast<std::size_t>(order[i])];
      for (int r = 0; r < dim; ++r) {
        out << (i + 1) << ',' << (r + 1);
        for (int c = 0; c < dim; ++c) {
          out << ',' << msar::io::format_double(m(r, c));
        }
        out << "\n";
      }
    }
  } else {
    throw msar::ConfigError("unknown --what '" + args.what + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Regime-switching vector-autoregression toolkit for bus link travel "
      "times, occupancy, and headway"};
  app.require_subcommand(1);

  SimulateArgs simulate_args;
  auto* simulate = app.add_subcommand(
      "simulate", "Draw a synthetic corpus from the generative model");
  simulate->add_option("--config", simulate_args.config,
                       "JSON config: n, K, days, runs_per_day, and either "
                       "explicit params or a recipe")
      ->required();
  simulate->add_option("--out", simulate_args.out, "output data CSV")
      ->required();
  simulate->add_option("--truth-out", simulate_args.truth_out,
                       "JSON with the true parameters and state paths");
  simulate->add_option("--seed", simulate_args.seed, "random seed");
  simulate->callback([&] { run_simulate(simulate_args); });

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a model by Gibbs sampling");
  fit->add_option("--data", fit_args.data, "training data CSV")->required();
  fit->add_option("--model", fit_args.model, "msar or bgmm")
      ->check(CLI::IsMember({"msar", "bgmm"}));
  auto* joint =
      fit->add_flag("--joint", fit_args.joint,
                    "model travel times and occupancy jointly (default)");
  auto* separate =
      fit->add_option("--separate", fit_args.separate,
                      "fit one variable block only: ttime or occupancy")
          ->check(CLI::IsMember({"ttime", "occupancy"}));
  joint->excludes(separate);
  separate->excludes(joint);
  fit->add_option("--k", fit_args.num_states, "number of hidden states")
      ->required();
  fit->add_option("--burn-in", fit_args.burn_in, "burn-in iterations")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--samples", fit_args.samples, "posterior draws to keep")
      ->check(CLI::PositiveNumber);
  fit->add_option("--thin", fit_args.thin, "keep every thin-th draw")
      ->check(CLI::PositiveNumber);
  fit->add_option("--threads", fit_args.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  fit->add_option("--seed", fit_args.seed, "random seed");
  fit->add_option("--out", fit_args.out, "output model JSON")->required();
  fit->callback([&] { run_fit(fit_args); });

  ForecastArgs forecast_args;
  auto* forecast = app.add_subcommand(
      "forecast", "Sample predictive distributions for partially observed runs");
  forecast->add_option("--model", forecast_args.model, "model JSON")
      ->required();
  forecast->add_option("--data", forecast_args.data, "data CSV")->required();
  forecast->add_option("--cut", forecast_args.cut,
                       "CSV day_id,run_index,observed_links")
      ->required();
  forecast->add_option("--targets", forecast_args.targets,
                       "'all' or comma-separated day_id:run_index list");
  forecast->add_option("--samples-out", forecast_args.samples_out,
                       "per-draw sample CSV")
      ->required();
  forecast->add_option("--summary-out", forecast_args.summary_out,
                       "mean and quantile CSV")
      ->required();
  forecast->add_option("--threads", forecast_args.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  forecast->add_option("--seed", forecast_args.seed, "random seed");
  forecast->callback([&] { run_forecast(forecast_args); });

  EvaluateArgs evaluate_args;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Score forecast samples against ground truth");
  evaluate->add_option("--truth", evaluate_args.truth, "ground-truth data CSV")
      ->required();
  evaluate->add_option("--samples", evaluate_args.samples,
                       "forecast sample CSV")
      ->required();
  evaluate->add_option("--out", evaluate_args.out, "metrics CSV")->required();
  evaluate->add_option("--json-out", evaluate_args.json_out,
                       "optional metrics JSON");
  evaluate->add_option("--model-label", evaluate_args.model_label,
                       "label for the model column");
  evaluate->add_option("--k", evaluate_args.num_states,
                       "value for the K column");
  evaluate->callback([&] { run_evaluate(evaluate_args); });

  InspectArgs inspect_args;
  auto* inspect = app.add_subcommand(
      "inspect", "Write posterior-mean parameters as CSV");
  inspect->add_option("--model", inspect_args.model, "model JSON")->required();
  inspect->add_option("--what", inspect_args.what,
                      "transition|means|covariances|coefficients|stationary")
      ->required();
  inspect->add_option("--out", inspect_args.out, "output CSV")->required();
  inspect->callback([&] { run_inspect(inspect_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const msar::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const msar::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
