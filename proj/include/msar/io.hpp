#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "msar/bgmm.hpp"
#include "msar/errors.hpp"
#include "msar/inference.hpp"
#include "msar/model.hpp"

namespace msar::io {

// Exact decimal round trip for doubles.
inline std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

inline long parse_long(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(text, &used);
  } catch (const std::exception&) {
    throw ParseError(where + ": '" + text + "' is not an integer");
  }
  if (used != text.size()) {
    throw ParseError(where + ": '" + text + "' is not an integer");
  }
  return value;
}

inline double parse_double(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ParseError(where + ": '" + text + "' is not a number");
  }
  if (used != text.size()) {
    throw ParseError(where + ": '" + text + "' is not a number");
  }
  return value;
}

inline std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path + " for reading");
  return in;
}

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Link record files
//
// Long CSV, one row per (day, run, link):
//   day_id,run_index,link_id,travel_time_s,occupancy,headway_s[,period]
// Every run must carry links 1..n exactly once with one consistent headway
// (and period, when the column is present).
// ---------------------------------------------------------------------------

struct LinkRecordData {
  std::vector<DaySequence> days;
  std::vector<std::vector<int>> run_indices;  // per day, ascending
  std::vector<std::vector<int>> periods;      // per day per run; 0 if absent
  int num_links = 0;
};

inline LinkRecordData load_link_records(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  const auto header = detail::split_csv_line(line);
  const std::vector<std::string> expected{"day_id",        "run_index",
                                          "link_id",       "travel_time_s",
                                          "occupancy",     "headway_s"};
  bool has_period = false;
  if (header.size() == expected.size() + 1 && header.back() == "period") {
    has_period = true;
  } else if (header.size() != expected.size()) {
    throw SchemaError(path + ": expected header " +
                      "day_id,run_index,link_id,travel_time_s,occupancy,"
                      "headway_s[,period]");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (header[i] != expected[i]) {
      throw SchemaError(path + ": header column " + std::to_string(i + 1) +
                        " is '" + header[i] + "', expected '" + expected[i] +
                        "'");
    }
  }

  struct RunBuilder {
    std::map<int, std::pair<double, double>> links;  // link -> (tt, occ)
    double headway = 0.0;
    int period = 0;
    bool seen = false;
  };
  std::vector<std::string> day_order;
  std::map<std::string, std::map<int, RunBuilder>> table;
  int max_link = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != header.size()) {
      throw SchemaError(where + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    const std::string& day_id = fields[0];
    if (day_id.empty()) throw SchemaError(where + ": empty day_id");
    const int run_index = static_cast<int>(detail::parse_long(fields[1], where));
    const int link_id = static_cast<int>(detail::parse_long(fields[2], where));
    const double tt = detail::parse_double(fields[3], where);
    const double occ = detail::parse_double(fields[4], where);
    const double headway = detail::parse_double(fields[5], where);
    if (!std::isfinite(tt) || !std::isfinite(occ) || !std::isfinite(headway)) {
      throw NonFiniteValue(where + ": non-finite value for day " + day_id +
                           ", run " + std::to_string(run_index) + ", link " +
                           std::to_string(link_id));
    }
    if (link_id < 1) throw SchemaError(where + ": link_id must be >= 1");
    max_link = std::max(max_link, link_id);

    if (table.find(day_id) == table.end()) day_order.push_back(day_id);
    RunBuilder& run = table[day_id][run_index];
    if (!run.seen) {
      run.seen = true;
      run.headway = headway;
      if (has_period) {
        run.period = static_cast<int>(detail::parse_long(fields[6], where));
        if (run.period < 0) throw SchemaError(where + ": negative period");
      }
    } else {
      if (run.headway != headway) {
        throw InconsistentHeadway(where + ": day " + day_id + ", run " +
                                  std::to_string(run_index) +
                                  " has conflicting headway values");
      }
      if (has_period &&
          run.period != static_cast<int>(detail::parse_long(fields[6], where))) {
        throw SchemaError(where + ": day " + day_id + ", run " +
                          std::to_string(run_index) +
                          " has conflicting period labels");
      }
    }
    if (!run.links.emplace(link_id, std::make_pair(tt, occ)).second) {
      throw SchemaError(where + ": duplicate link " + std::to_string(link_id) +
                        " for day " + day_id + ", run " +
                        std::to_string(run_index));
    }
  }
  if (day_order.empty()) throw SchemaError(path + ": no data rows");

  LinkRecordData data;
  data.num_links = max_link;
  for (const auto& day_id : day_order) {
    DaySequence day{day_id, {}};
    std::vector<int> indices;
    std::vector<int> periods;
    for (const auto& [run_index, run] : table[day_id]) {
      Eigen::VectorXd tt(max_link), occ(max_link);
      for (int link = 1; link <= max_link; ++link) {
        const auto it = run.links.find(link);
        if (it == run.links.end()) {
          throw MissingLink("day " + day_id + ", run " +
                            std::to_string(run_index) + " is missing link " +
                            std::to_string(link));
        }
        tt[link - 1] = it->second.first;
        occ[link - 1] = it->second.second;
      }
      day.runs.emplace_back(tt, occ, run.headway);
      indices.push_back(run_index);
      periods.push_back(run.period);
    }
    data.days.push_back(std::move(day));
    data.run_indices.push_back(std::move(indices));
    data.periods.push_back(std::move(periods));
  }
  return data;
}

inline void save_link_records(const std::string& path,
                              const std::vector<DaySequence>& days,
                              const std::vector<std::vector<int>>* periods =
                                  nullptr) {
  std::ofstream out = detail::open_for_write(path);
  out << "day_id,run_index,link_id,travel_time_s,occupancy,headway_s";
  if (periods) out << ",period";
  out << "\n";
  for (std::size_t d = 0; d < days.size(); ++d) {
    const auto& day = days[d];
    for (std::size_t r = 0; r < day.runs.size(); ++r) {
      const auto& run = day.runs[r];
      for (int link = 1; link <= run.num_links(); ++link) {
        out << day.day_id << ',' << (r + 1) << ',' << link << ','
            << format_double(run.link_times()[link - 1]) << ','
            << format_double(run.occupancies()[link - 1]) << ','
            << format_double(run.headway());
        if (periods) out << ',' << (*periods)[d][r];
        out << "\n";
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct StandardizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;  // population standard deviation, all entries > 0
};

struct StandardizedSequences {
  std::vector<std::vector<Eigen::VectorXd>> days;
  StandardizationStats stats;
};

inline std::vector<std::vector<Eigen::VectorXd>> apply_standardization(
    const std::vector<std::vector<Eigen::VectorXd>>& days,
    const StandardizationStats& stats) {
  std::vector<std::vector<Eigen::VectorXd>> out(days.size());
  for (std::size_t d = 0; d < days.size(); ++d) {
    out[d].reserve(days[d].size());
    for (const auto& run : days[d]) {
      if (run.size() != stats.mean.size()) {
        throw LengthMismatch("standardization stats cover " +
                             std::to_string(stats.mean.size()) +
                             " dims, run has " + std::to_string(run.size()));
      }
      out[d].push_back(
          ((run - stats.mean).array() / stats.stdev.array()).matrix());
    }
  }
  return out;
}

// Per-dimension z-scores with population moments pooled over every run.
inline StandardizedSequences standardize(
    const std::vector<std::vector<Eigen::VectorXd>>& days) {
  Eigen::Index dim = -1;
  double count = 0.0;
  for (const auto& day : days) {
    for (const auto& run : day) {
      if (dim < 0) dim = run.size();
      if (run.size() != dim) {
        throw LengthMismatch("runs disagree on dimension");
      }
      count += 1.0;
    }
  }
  if (dim <= 0 || count == 0.0) throw EmptyInput("standardize: no runs");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& day : days) {
    for (const auto& run : day) mean += run;
  }
  mean /= count;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& day : days) {
    for (const auto& run : day) var += (run - mean).cwiseAbs2();
  }
  var /= count;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!(var[i] > 0.0)) {
      throw ConstantColumn("dimension " + std::to_string(i) +
                           " has fewer than two distinct values");
    }
  }
  StandardizationStats stats{std::move(mean), var.cwiseSqrt()};
  return StandardizedSequences{apply_standardization(days, stats),
                               std::move(stats)};
}

struct StandardizedDataset {
  std::vector<DaySequence> days;
  StandardizationStats stats;
};

inline StandardizedDataset standardize(const std::vector<DaySequence>& days) {
  std::vector<std::vector<Eigen::VectorXd>> flat;
  flat.reserve(days.size());
  for (const auto& day : days) flat.push_back(flatten_runs(day));
  StandardizedSequences seqs = standardize(flat);
  StandardizedDataset out;
  out.stats = std::move(seqs.stats);
  out.days.reserve(days.size());
  for (std::size_t d = 0; d < days.size(); ++d) {
    if (days[d].runs.empty()) throw EmptyInput("standardize: a day has no runs");
    const int n = days[d].runs.front().num_links();
    DaySequence day{days[d].day_id, {}};
    for (const auto& run : seqs.days[d]) {
      day.runs.push_back(RunVector::from_flat(run, n));
    }
    out.days.push_back(std::move(day));
  }
  return out;
}

// Map standardized values for the given coordinates back to data units.
inline Eigen::VectorXd unstandardize(const Eigen::VectorXd& values,
                                     const std::vector<int>& dims,
                                     const StandardizationStats& stats) {
  if (static_cast<std::size_t>(values.size()) != dims.size()) {
    throw LengthMismatch("unstandardize: " + std::to_string(values.size()) +
                         " values for " + std::to_string(dims.size()) +
                         " dims");
  }
  Eigen::VectorXd out(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const int dim = dims[static_cast<std::size_t>(i)];
    if (dim < 0 || dim >= stats.mean.size()) {
      throw DimOutOfRange("unstandardize: dim " + std::to_string(dim) +
                          " outside stats");
    }
    out[i] = values[i] * stats.stdev[dim] + stats.mean[dim];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model files (versioned JSON)
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

struct ModelMeta {
  std::string model_type;    // "msar" or "bgmm"
  std::string variable_set;  // "joint", "ttime" or "occupancy"
  int num_links = 0;
  int dim = 0;
  int num_states = 0;
  int num_periods = 1;
  Hyperparams hyper = Hyperparams::defaults(1, 1);
  StandardizationStats stats;
};

inline VariableSet parse_variable_set(const std::string& name) {
  if (name == "joint") return VariableSet::joint;
  if (name == "ttime") return VariableSet::travel_time;
  if (name == "occupancy") return VariableSet::occupancy;
  throw SchemaError("unknown variable set '" + name + "'");
}

inline std::string variable_set_name(VariableSet set) {
  switch (set) {
    case VariableSet::joint: return "joint";
    case VariableSet::travel_time: return "ttime";
    case VariableSet::occupancy: return "occupancy";
  }
  throw SchemaError("unknown variable set");
}

namespace detail {

inline nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(row);
  }
  return j;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j,
                                        const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(where + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j,
                                        const std::string& where) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(where + ": expected a non-empty array of rows");
  }
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ParseError(where + ": expected non-empty rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ParseError(where + ": ragged rows");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw ParseError(where + ": expected numbers");
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          j[i][k].get<double>();
    }
  }
  return m;
}

inline nlohmann::json meta_json(const ModelMeta& meta, std::size_t num_draws) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["model_type"] = meta.model_type;
  j["variable_set"] = meta.variable_set;
  j["n"] = meta.num_links;
  j["dim"] = meta.dim;
  j["K"] = meta.num_states;
  j["n2"] = num_draws;
  j["num_periods"] = meta.num_periods;
  j["hyperparams"] = {
      {"mu0", vector_json(meta.hyper.mu0)},   {"lambda0", meta.hyper.lambda0},
      {"psi0", matrix_json(meta.hyper.psi0.mat())}, {"nu0", meta.hyper.nu0},
      {"m0", matrix_json(meta.hyper.m0)},     {"v0", matrix_json(meta.hyper.v0.mat())},
      {"alpha", vector_json(meta.hyper.alpha)}};
  j["stats"] = {{"mean", vector_json(meta.stats.mean)},
                {"std", vector_json(meta.stats.stdev)}};
  return j;
}

}  // namespace detail

inline void save_model(const std::string& path, const ModelMeta& meta,
                       const std::vector<PosteriorDraw>& draws) {
  nlohmann::json j = detail::meta_json(meta, draws.size());
  nlohmann::json draws_json = nlohmann::json::array();
  for (const auto& draw : draws) {
    nlohmann::json d;
    d["pi"] = detail::matrix_json(draw.regime.transition);
    nlohmann::json a = nlohmann::json::array();
    nlohmann::json mu = nlohmann::json::array();
    nlohmann::json sigma = nlohmann::json::array();
    for (int s = 0; s < draw.regime.num_states(); ++s) {
      a.push_back(detail::matrix_json(draw.regime.coeff[s]));
      mu.push_back(detail::vector_json(draw.regime.mean[s]));
      sigma.push_back(detail::matrix_json(draw.regime.cov[s].mat()));
    }
    d["A"] = std::move(a);
    d["mu"] = std::move(mu);
    d["sigma"] = std::move(sigma);
    draws_json.push_back(std::move(d));
  }
  j["draws"] = std::move(draws_json);
  std::ofstream out = detail::open_for_write(path);
  out << j.dump(1) << "\n";
}

inline void save_model(const std::string& path, const ModelMeta& meta,
                       const std::vector<BgmmDraw>& draws) {
  nlohmann::json j = detail::meta_json(meta, draws.size());
  nlohmann::json draws_json = nlohmann::json::array();
  for (const auto& draw : draws) {
    nlohmann::json d;
    d["mixing"] = detail::matrix_json(draw.mixing);
    nlohmann::json mu = nlohmann::json::array();
    nlohmann::json sigma = nlohmann::json::array();
    for (int s = 0; s < draw.num_states(); ++s) {
      mu.push_back(detail::vector_json(draw.mean[s]));
      sigma.push_back(detail::matrix_json(draw.cov[s].mat()));
    }
    d["mu"] = std::move(mu);
    d["sigma"] = std::move(sigma);
    draws_json.push_back(std::move(d));
  }
  j["draws"] = std::move(draws_json);
  std::ofstream out = detail::open_for_write(path);
  out << j.dump(1) << "\n";
}

struct LoadedModel {
  ModelMeta meta;
  std::vector<PosteriorDraw> msar_draws;
  std::vector<BgmmDraw> bgmm_draws;

  bool is_msar() const { return meta.model_type == "msar"; }
};

inline LoadedModel load_model(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  try {
    if (!j.contains("format_version") || !j["format_version"].is_number()) {
      throw ParseError(path + ": missing format_version");
    }
    if (j["format_version"].get<int>() != kModelFormatVersion) {
      throw VersionMismatch(path + ": format_version " +
                            j["format_version"].dump() + ", expected " +
                            std::to_string(kModelFormatVersion));
    }
    LoadedModel model;
    ModelMeta& meta = model.meta;
    meta.model_type = j.at("model_type").get<std::string>();
    if (meta.model_type != "msar" && meta.model_type != "bgmm") {
      throw SchemaError(path + ": unknown model_type '" + meta.model_type +
                        "'");
    }
    meta.variable_set = j.at("variable_set").get<std::string>();
    parse_variable_set(meta.variable_set);
    meta.num_links = j.at("n").get<int>();
    meta.dim = j.at("dim").get<int>();
    meta.num_states = j.at("K").get<int>();
    meta.num_periods = j.value("num_periods", 1);
    const int expected_dim = meta.variable_set == "joint"
                                 ? 2 * meta.num_links + 1
                                 : meta.num_links + 1;
    if (meta.num_links < 1 || meta.num_states < 1 || meta.dim != expected_dim) {
      throw InvariantViolation(path + ": n/dim/K fields are inconsistent");
    }

    const auto& h = j.at("hyperparams");
    meta.hyper = Hyperparams{
        detail::vector_from_json(h.at("mu0"), path + ": mu0"),
        h.at("lambda0").get<double>(),
        SpdMatrix(detail::matrix_from_json(h.at("psi0"), path + ": psi0")),
        h.at("nu0").get<double>(),
        detail::matrix_from_json(h.at("m0"), path + ": m0"),
        SpdMatrix(detail::matrix_from_json(h.at("v0"), path + ": v0")),
        detail::vector_from_json(h.at("alpha"), path + ": alpha")};
    meta.hyper.validate(meta.dim, meta.num_states);

    meta.stats.mean =
        detail::vector_from_json(j.at("stats").at("mean"), path + ": stats");
    meta.stats.stdev =
        detail::vector_from_json(j.at("stats").at("std"), path + ": stats");
    if (meta.stats.mean.size() != meta.dim ||
        meta.stats.stdev.size() != meta.dim) {
      throw InvariantViolation(path + ": stats do not cover dim");
    }
    for (Eigen::Index i = 0; i < meta.stats.stdev.size(); ++i) {
      if (!(meta.stats.stdev[i] > 0.0)) {
        throw InvariantViolation(path + ": non-positive std in stats");
      }
    }

    const auto& draws = j.at("draws");
    if (!draws.is_array()) throw ParseError(path + ": draws must be an array");
    if (j.at("n2").get<std::size_t>() != draws.size()) {
      throw InvariantViolation(path + ": n2 disagrees with draw count");
    }
    const auto validate_spd = [&](Eigen::MatrixXd m,
                                  const std::string& where) -> SpdMatrix {
      try {
        SpdMatrix spd(std::move(m));
        cholesky(spd.mat());
        return spd;
      } catch (const Error& e) {
        throw InvariantViolation(where + ": " + e.what());
      }
    };
    for (std::size_t r = 0; r < draws.size(); ++r) {
      const auto& d = draws[r];
      const std::string where = path + ": draw " + std::to_string(r);
      if (model.is_msar()) {
        PosteriorDraw draw;
        draw.regime.transition =
            detail::matrix_from_json(d.at("pi"), where + " pi");
        const auto& a = d.at("A");
        const auto& mu = d.at("mu");
        const auto& sigma = d.at("sigma");
        if (static_cast<int>(a.size()) != meta.num_states ||
            static_cast<int>(mu.size()) != meta.num_states ||
            static_cast<int>(sigma.size()) != meta.num_states) {
          throw InvariantViolation(where + ": per-state lists disagree with K");
        }
        for (int s = 0; s < meta.num_states; ++s) {
          draw.regime.coeff.push_back(
              detail::matrix_from_json(a[s], where + " A"));
          draw.regime.mean.push_back(
              detail::vector_from_json(mu[s], where + " mu"));
          draw.regime.cov.push_back(
              validate_spd(detail::matrix_from_json(sigma[s], where + " sigma"),
                           where + " sigma"));
        }
        try {
          draw.regime.validate();
        } catch (const Error& e) {
          throw InvariantViolation(where + ": " + e.what());
        }
        if (draw.regime.dim() != meta.dim) {
          throw InvariantViolation(where + ": draw dimension mismatch");
        }
        model.msar_draws.push_back(std::move(draw));
      } else {
        BgmmDraw draw;
        draw.mixing = detail::matrix_from_json(d.at("mixing"), where + " mixing");
        if (draw.mixing.rows() != meta.num_periods ||
            draw.mixing.cols() != meta.num_states) {
          throw InvariantViolation(where + ": mixing shape mismatch");
        }
        for (Eigen::Index t = 0; t < draw.mixing.rows(); ++t) {
          try {
            ProbVector(draw.mixing.row(t).transpose());
          } catch (const Error& e) {
            throw InvariantViolation(where + ": mixing row " +
                                     std::to_string(t) + ": " + e.what());
          }
        }
        const auto& mu = d.at("mu");
        const auto& sigma = d.at("sigma");
        if (static_cast<int>(mu.size()) != meta.num_states ||
            static_cast<int>(sigma.size()) != meta.num_states) {
          throw InvariantViolation(where + ": per-state lists disagree with K");
        }
        for (int s = 0; s < meta.num_states; ++s) {
          draw.mean.push_back(detail::vector_from_json(mu[s], where + " mu"));
          if (draw.mean.back().size() != meta.dim) {
            throw InvariantViolation(where + ": draw dimension mismatch");
          }
          draw.cov.push_back(
              validate_spd(detail::matrix_from_json(sigma[s], where + " sigma"),
                           where + " sigma"));
        }
        model.bgmm_draws.push_back(std::move(draw));
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Forecast cut files
//
// CSV day_id,run_index,observed_links with observed_links in 0..n, or -1
// for a complete run. Runs not listed are complete.
// ---------------------------------------------------------------------------

using ForecastCut = std::map<std::pair<std::string, int>, int>;

inline ForecastCut load_forecast_cut(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  if (detail::split_csv_line(line) !=
      std::vector<std::string>{"day_id", "run_index", "observed_links"}) {
    throw SchemaError(path + ": expected header day_id,run_index,observed_links");
  }
  ForecastCut cut;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != 3) throw SchemaError(where + ": expected 3 fields");
    const int run_index = static_cast<int>(detail::parse_long(fields[1], where));
    const int observed = static_cast<int>(detail::parse_long(fields[2], where));
    if (observed < -1) {
      throw SchemaError(where + ": observed_links must be >= -1");
    }
    if (!cut.emplace(std::make_pair(fields[0], run_index), observed).second) {
      throw SchemaError(where + ": duplicate cut row");
    }
  }
  return cut;
}

inline void save_forecast_cut(const std::string& path, const ForecastCut& cut) {
  std::ofstream out = detail::open_for_write(path);
  out << "day_id,run_index,observed_links\n";
  for (const auto& [key, observed] : cut) {
    out << key.first << ',' << key.second << ',' << observed << "\n";
  }
}

// ---------------------------------------------------------------------------
// Forecast sample files
//
// CSV day_id,run_index,entry,draw,value; entry names use the full-vector
// coordinate names (ltt_3, occ_1, hw) and values are in data units.
// ---------------------------------------------------------------------------

struct SampleRecord {
  std::string day_id;
  int run_index;
  std::string entry;
  int draw;
  double value;
};

inline void save_forecast_samples(const std::string& path,
                                  const std::vector<SampleRecord>& records) {
  std::ofstream out = detail::open_for_write(path);
  out << "day_id,run_index,entry,draw,value\n";
  for (const auto& record : records) {
    out << record.day_id << ',' << record.run_index << ',' << record.entry
        << ',' << record.draw << ',' << format_double(record.value) << "\n";
  }
}

inline std::vector<SampleRecord> load_forecast_samples(const std::string& path) {
  std::ifstream in = detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  if (detail::split_csv_line(line) !=
      std::vector<std::string>{"day_id", "run_index", "entry", "draw",
                               "value"}) {
    throw SchemaError(path +
                      ": expected header day_id,run_index,entry,draw,value");
  }
  std::vector<SampleRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != 5) throw SchemaError(where + ": expected 5 fields");
    records.push_back(SampleRecord{
        fields[0], static_cast<int>(detail::parse_long(fields[1], where)),
        fields[2], static_cast<int>(detail::parse_long(fields[3], where)),
        detail::parse_double(fields[4], where)});
  }
  return records;
}

// Entry-name counterpart of flat_dim_name.
inline int parse_dim_name(const std::string& name, int num_links) {
  if (name == "hw") return 2 * num_links;
  const auto parse_tail = [&](const std::string& prefix) -> std::optional<int> {
    if (name.rfind(prefix, 0) != 0) return std::nullopt;
    const std::string tail = name.substr(prefix.size());
    const long link = detail::parse_long(tail, "entry '" + name + "'");
    if (link < 1 || link > num_links) {
      throw SchemaError("entry '" + name + "' outside 1.." +
                        std::to_string(num_links));
    }
    return static_cast<int>(link);
  };
  if (const auto link = parse_tail("ltt_")) return *link - 1;
  if (const auto occ = parse_tail("occ_")) return num_links + *occ - 1;
  throw SchemaError("unrecognized entry name '" + name + "'");
}

}  // namespace msar::io
