#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "helpers.hpp"
#include "msar/errors.hpp"
#include "msar/io.hpp"
#include "msar/model.hpp"
#include "msar/rng.hpp"

namespace {

std::filesystem::path temp_path(const std::string& name) {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("msar_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir / name;
}

std::string write_file(const std::string& name, const std::string& content) {
  const auto path = temp_path(name);
  std::ofstream out(path);
  out << content;
  return path.string();
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  nlohmann::json j;
  in >> j;
  return j;
}

std::string write_json(const std::string& name, const nlohmann::json& j) {
  return write_file(name, j.dump(1) + "\n");
}

double exact_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return 1.0;
  return (a - b).cwiseAbs().maxCoeff();
}

TEST_CASE("doubles survive a text round trip") {
  for (double x : {1.0 / 3.0, 0.1, 3.141592653589793, -1e300, 1e-300,
                   12345.678901234567, 0.0, -2.5}) {
    REQUIRE(std::stod(msar::io::format_double(x)) == x);
  }
}

TEST_CASE("link records round trip through CSV") {
  msar::Rng rng(1301);
  std::vector<msar::DaySequence> days;
  for (int d = 0; d < 2; ++d) {
    msar::DaySequence day{"day_" + std::to_string(d + 1), {}};
    for (int r = 0; r < 3; ++r) {
      Eigen::VectorXd tt(2), occ(2);
      tt << 100.0 + rng.normal(), 200.0 + rng.normal();
      occ << 10.0 + rng.normal(), 20.0 + rng.normal();
      day.runs.emplace_back(tt, occ, 300.0 + rng.normal());
    }
    days.push_back(std::move(day));
  }

  const std::string path = temp_path("roundtrip.csv").string();
  msar::io::save_link_records(path, days);
  const msar::io::LinkRecordData loaded = msar::io::load_link_records(path);

  REQUIRE(loaded.num_links == 2);
  REQUIRE(loaded.days.size() == 2);
  for (std::size_t d = 0; d < 2; ++d) {
    REQUIRE(loaded.days[d].day_id == days[d].day_id);
    REQUIRE(loaded.run_indices[d] == std::vector<int>{1, 2, 3});
    REQUIRE(loaded.periods[d] == std::vector<int>{0, 0, 0});
    for (std::size_t r = 0; r < 3; ++r) {
      REQUIRE(exact_gap(loaded.days[d].runs[r].flat(),
                        days[d].runs[r].flat()) == 0.0);
    }
  }
}

TEST_CASE("link records preserve the period column") {
  Eigen::VectorXd tt(1), occ(1);
  tt << 50.0;
  occ << 5.0;
  std::vector<msar::DaySequence> days{
      {"day_001", {msar::RunVector(tt, occ, 120.0),
                   msar::RunVector(tt, occ, 240.0)}}};
  std::vector<std::vector<int>> periods{{0, 2}};
  const std::string path = temp_path("periods.csv").string();
  msar::io::save_link_records(path, days, &periods);
  const msar::io::LinkRecordData loaded = msar::io::load_link_records(path);
  REQUIRE(loaded.periods == periods);
}

TEST_CASE("link rows may arrive in any order") {
  const std::string path = write_file(
      "shuffled.csv",
      "day_id,run_index,link_id,travel_time_s,occupancy,headway_s\n"
      "day_001,2,2,22,2.2,600\n"
      "day_001,1,1,11,1.1,300\n"
      "day_001,2,1,21,2.1,600\n"
      "\n"
      "day_001,1,2,12,1.2,300\n");
  const msar::io::LinkRecordData loaded = msar::io::load_link_records(path);
  REQUIRE(loaded.days.size() == 1);
  REQUIRE(loaded.run_indices[0] == std::vector<int>{1, 2});
  REQUIRE(loaded.days[0].runs[0].link_times()[0] == 11.0);
  REQUIRE(loaded.days[0].runs[0].link_times()[1] == 12.0);
  REQUIRE(loaded.days[0].runs[1].occupancies()[0] == 2.1);
  REQUIRE(loaded.days[0].runs[1].headway() == 600.0);
}

TEST_CASE("malformed link files are rejected") {
  const std::string header =
      "day_id,run_index,link_id,travel_time_s,occupancy,headway_s\n";

  REQUIRE_THROWS_AS(msar::io::load_link_records(write_file("empty.csv", "")),
                    msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file("header_only.csv", header)),
      msar::SchemaError);
  REQUIRE_THROWS_AS(msar::io::load_link_records(write_file(
                        "bad_header.csv", "day,run,link,tt,occ,hw\n")),
                    msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "short_row.csv", header + "day_001,1,1,10,1\n")),
      msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "bad_number.csv", header + "day_001,1,1,ten,1,300\n")),
      msar::ParseError);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "nan_value.csv", header + "day_001,1,1,nan,1,300\n")),
      msar::NonFiniteValue);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "zero_link.csv", header + "day_001,1,0,10,1,300\n")),
      msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "dup_link.csv",
          header + "day_001,1,1,10,1,300\nday_001,1,1,10,1,300\n")),
      msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "headway_clash.csv",
          header + "day_001,1,1,10,1,300\nday_001,1,2,20,2,301\n")),
      msar::InconsistentHeadway);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "missing_link.csv",
          header + "day_001,1,1,10,1,300\nday_001,2,1,10,1,300\n"
                   "day_001,2,2,20,2,300\n")),
      msar::MissingLink);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "empty_day.csv", header + ",1,1,10,1,300\n")),
      msar::SchemaError);
  REQUIRE_THROWS_AS(msar::io::load_link_records(
                        temp_path("does_not_exist.csv").string()),
                    msar::DataError);

  const std::string period_header =
      "day_id,run_index,link_id,travel_time_s,occupancy,headway_s,period\n";
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "neg_period.csv", period_header + "day_001,1,1,10,1,300,-1\n")),
      msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_link_records(write_file(
          "period_clash.csv", period_header +
                                  "day_001,1,1,10,1,300,0\n"
                                  "day_001,1,2,20,2,300,1\n")),
      msar::SchemaError);
}

TEST_CASE("standardization maps a two-point column to plus and minus one") {
  Eigen::VectorXd a(1), b(1);
  a << 100.0;
  b << 120.0;
  const std::vector<std::vector<Eigen::VectorXd>> days{{a, b}};
  const msar::io::StandardizedSequences out = msar::io::standardize(days);
  REQUIRE(out.stats.mean[0] == Catch::Approx(110.0).margin(1e-12));
  REQUIRE(out.stats.stdev[0] == Catch::Approx(10.0).margin(1e-12));
  REQUIRE(out.days[0][0][0] == Catch::Approx(-1.0).margin(1e-12));
  REQUIRE(out.days[0][1][0] == Catch::Approx(1.0).margin(1e-12));

  // Inverse transform recovers the original values.
  Eigen::VectorXd z(2);
  z << out.days[0][0][0], out.days[0][1][0];
  const Eigen::VectorXd back = msar::io::unstandardize(z, {0, 0}, out.stats);
  REQUIRE(back[0] == Catch::Approx(100.0).margin(1e-10));
  REQUIRE(back[1] == Catch::Approx(120.0).margin(1e-10));
}

TEST_CASE("standardization failure modes") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 5.0;
  b << 2.0, 5.0;  // second dimension constant
  REQUIRE_THROWS_AS(
      msar::io::standardize(std::vector<std::vector<Eigen::VectorXd>>{{a, b}}),
      msar::ConstantColumn);
  REQUIRE_THROWS_AS(
      msar::io::standardize(std::vector<std::vector<Eigen::VectorXd>>{}),
      msar::EmptyInput);
  Eigen::VectorXd c(3);
  c << 1.0, 2.0, 3.0;
  REQUIRE_THROWS_AS(
      msar::io::standardize(std::vector<std::vector<Eigen::VectorXd>>{{a, c}}),
      msar::LengthMismatch);

  msar::io::StandardizationStats stats;
  stats.mean = Eigen::VectorXd::Zero(2);
  stats.stdev = Eigen::VectorXd::Ones(2);
  REQUIRE_THROWS_AS(
      msar::io::apply_standardization({{c}}, stats), msar::LengthMismatch);
  REQUIRE_THROWS_AS(
      msar::io::unstandardize(Eigen::VectorXd::Zero(2), {0}, stats),
      msar::LengthMismatch);
  REQUIRE_THROWS_AS(
      msar::io::unstandardize(Eigen::VectorXd::Zero(1), {5}, stats),
      msar::DimOutOfRange);
}

TEST_CASE("day sequences standardize through run vectors") {
  msar::Rng rng(1303);
  std::vector<msar::DaySequence> days;
  for (int d = 0; d < 3; ++d) {
    msar::DaySequence day{"day_" + std::to_string(d), {}};
    for (int r = 0; r < 4; ++r) {
      Eigen::VectorXd tt(2), occ(2);
      tt << 100.0 + 10.0 * rng.normal(), 200.0 + 10.0 * rng.normal();
      occ << 10.0 + rng.normal(), 20.0 + rng.normal();
      day.runs.emplace_back(tt, occ, 300.0 + 30.0 * rng.normal());
    }
    days.push_back(std::move(day));
  }
  const msar::io::StandardizedDataset out = msar::io::standardize(days);
  REQUIRE(out.days.size() == 3);
  REQUIRE(out.days[1].day_id == "day_1");
  // Pooled moments of the standardized data are exactly zero and one.
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(5);
  double count = 0.0;
  for (const auto& day : out.days) {
    for (const auto& run : day.runs) {
      sum += run.flat();
      sq += run.flat().cwiseAbs2();
      count += 1.0;
    }
  }
  REQUIRE((sum / count).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((sq / count - Eigen::VectorXd::Ones(5)).cwiseAbs().maxCoeff() <
          1e-12);
  // Standardization then inversion is the identity on each coordinate.
  const Eigen::VectorXd z = out.days[0].runs[0].flat();
  const Eigen::VectorXd back =
      msar::io::unstandardize(z, {0, 1, 2, 3, 4}, out.stats);
  REQUIRE(exact_gap(back, days[0].runs[0].flat()) < 1e-10);
}

msar::io::ModelMeta sample_meta(const std::string& type, int num_links,
                                int dim, int k, msar::Rng& rng,
                                int num_periods = 1) {
  msar::io::ModelMeta meta;
  meta.model_type = type;
  meta.variable_set = dim == 2 * num_links + 1 ? "joint" : "ttime";
  meta.num_links = num_links;
  meta.dim = dim;
  meta.num_states = k;
  meta.num_periods = num_periods;
  meta.hyper = msar::Hyperparams::defaults(dim, k);
  meta.hyper.lambda0 = 2.5;
  meta.hyper.nu0 = dim + 4.25;
  meta.hyper.m0 = Eigen::MatrixXd::Constant(dim, dim, 0.01);
  meta.hyper.psi0 = msar::SpdMatrix(testutil::random_spd(dim, rng));
  meta.hyper.v0 = msar::SpdMatrix(testutil::random_spd(dim, rng));
  meta.stats.mean = Eigen::VectorXd::Zero(dim);
  meta.stats.stdev = Eigen::VectorXd::Ones(dim);
  for (int i = 0; i < dim; ++i) {
    meta.stats.mean[i] = rng.normal();
    meta.stats.stdev[i] = 1.0 + 0.1 * i;
  }
  return meta;
}

TEST_CASE("regime-switching models round trip through JSON") {
  msar::Rng rng(1307);
  const int dim = 5, k = 2;
  const msar::io::ModelMeta meta = sample_meta("msar", 2, dim, k, rng);
  std::vector<msar::PosteriorDraw> draws;
  for (int r = 0; r < 3; ++r) {
    draws.push_back(
        msar::PosteriorDraw{testutil::random_params(dim, k, rng, 0.6), {}});
  }

  const std::string path = temp_path("model_msar.json").string();
  msar::io::save_model(path, meta, draws);
  const msar::io::LoadedModel loaded = msar::io::load_model(path);

  REQUIRE(loaded.is_msar());
  REQUIRE(loaded.meta.model_type == "msar");
  REQUIRE(loaded.meta.variable_set == "joint");
  REQUIRE(loaded.meta.num_links == 2);
  REQUIRE(loaded.meta.dim == dim);
  REQUIRE(loaded.meta.num_states == k);
  REQUIRE(loaded.meta.num_periods == 1);
  REQUIRE(exact_gap(loaded.meta.hyper.mu0, meta.hyper.mu0) == 0.0);
  REQUIRE(loaded.meta.hyper.lambda0 == meta.hyper.lambda0);
  REQUIRE(loaded.meta.hyper.nu0 == meta.hyper.nu0);
  REQUIRE(exact_gap(loaded.meta.hyper.psi0.mat(), meta.hyper.psi0.mat()) ==
          0.0);
  REQUIRE(exact_gap(loaded.meta.hyper.m0, meta.hyper.m0) == 0.0);
  REQUIRE(exact_gap(loaded.meta.hyper.v0.mat(), meta.hyper.v0.mat()) == 0.0);
  REQUIRE(exact_gap(loaded.meta.hyper.alpha, meta.hyper.alpha) == 0.0);
  REQUIRE(exact_gap(loaded.meta.stats.mean, meta.stats.mean) == 0.0);
  REQUIRE(exact_gap(loaded.meta.stats.stdev, meta.stats.stdev) == 0.0);

  REQUIRE(loaded.msar_draws.size() == draws.size());
  REQUIRE(loaded.bgmm_draws.empty());
  for (std::size_t r = 0; r < draws.size(); ++r) {
    const auto& a = loaded.msar_draws[r].regime;
    const auto& b = draws[r].regime;
    REQUIRE(exact_gap(a.transition, b.transition) == 0.0);
    for (int s = 0; s < k; ++s) {
      REQUIRE(exact_gap(a.coeff[s], b.coeff[s]) == 0.0);
      REQUIRE(exact_gap(a.mean[s], b.mean[s]) == 0.0);
      REQUIRE(exact_gap(a.cov[s].mat(), b.cov[s].mat()) == 0.0);
    }
  }
}

TEST_CASE("mixture models round trip through JSON") {
  msar::Rng rng(1309);
  const int dim = 3, k = 2, periods = 2;
  const msar::io::ModelMeta meta = sample_meta("bgmm", 2, dim, k, rng, periods);
  std::vector<msar::BgmmDraw> draws;
  for (int r = 0; r < 2; ++r) {
    msar::BgmmDraw draw;
    draw.mixing = testutil::random_stochastic(periods, k, rng);
    const msar::RegimeParams params = testutil::random_params(dim, k, rng);
    draw.mean = params.mean;
    draw.cov = params.cov;
    draws.push_back(std::move(draw));
  }

  const std::string path = temp_path("model_bgmm.json").string();
  msar::io::save_model(path, meta, draws);
  const msar::io::LoadedModel loaded = msar::io::load_model(path);

  REQUIRE(!loaded.is_msar());
  REQUIRE(loaded.meta.num_periods == periods);
  REQUIRE(loaded.meta.variable_set == "ttime");
  REQUIRE(loaded.bgmm_draws.size() == draws.size());
  REQUIRE(loaded.msar_draws.empty());
  for (std::size_t r = 0; r < draws.size(); ++r) {
    REQUIRE(exact_gap(loaded.bgmm_draws[r].mixing, draws[r].mixing) == 0.0);
    for (int s = 0; s < k; ++s) {
      REQUIRE(exact_gap(loaded.bgmm_draws[r].mean[s], draws[r].mean[s]) ==
              0.0);
      REQUIRE(exact_gap(loaded.bgmm_draws[r].cov[s].mat(),
                        draws[r].cov[s].mat()) == 0.0);
    }
  }
}

TEST_CASE("tampered model files are rejected") {
  msar::Rng rng(1311);
  const msar::io::ModelMeta meta = sample_meta("msar", 2, 5, 2, rng);
  std::vector<msar::PosteriorDraw> draws{
      msar::PosteriorDraw{testutil::random_params(5, 2, rng, 0.6), {}}};
  const std::string path = temp_path("model_base.json").string();
  msar::io::save_model(path, meta, draws);
  const nlohmann::json base = read_json(path);

  {
    nlohmann::json j = base;
    j["format_version"] = 2;
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_version.json", j)),
                      msar::VersionMismatch);
  }
  {
    nlohmann::json j = base;
    j.erase("format_version");
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_noversion.json", j)),
                      msar::ParseError);
  }
  {
    nlohmann::json j = base;
    j["n2"] = 99;
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_count.json", j)),
                      msar::InvariantViolation);
  }
  {
    nlohmann::json j = base;
    j["model_type"] = "mystery";
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_type.json", j)),
                      msar::SchemaError);
  }
  {
    nlohmann::json j = base;
    j["dim"] = 4;  // joint with n = 2 must have dim 5
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_dim.json", j)),
                      msar::InvariantViolation);
  }
  {
    nlohmann::json j = base;
    j["draws"][0]["sigma"][0][0][0] = -50.0;
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_spd.json", j)),
                      msar::InvariantViolation);
  }
  {
    nlohmann::json j = base;
    j["draws"][0]["pi"][0][0] = 5.0;  // row no longer sums to one
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_pi.json", j)),
                      msar::InvariantViolation);
  }
  {
    nlohmann::json j = base;
    j["draws"][0].erase("mu");
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_missing.json", j)),
                      msar::ParseError);
  }
  {
    nlohmann::json j = base;
    j["stats"]["std"][2] = 0.0;
    REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_stats.json", j)),
                      msar::InvariantViolation);
  }
  REQUIRE_THROWS_AS(
      msar::io::load_model(write_file("truncated.json",
                                      "{\"format_version\": 1,")),
      msar::ParseError);
  REQUIRE_THROWS_AS(
      msar::io::load_model(temp_path("missing_model.json").string()),
      msar::DataError);
}

TEST_CASE("tampered mixture files are rejected") {
  msar::Rng rng(1313);
  const msar::io::ModelMeta meta = sample_meta("bgmm", 2, 3, 2, rng, 1);
  msar::BgmmDraw draw;
  draw.mixing = testutil::random_stochastic(1, 2, rng);
  const msar::RegimeParams params = testutil::random_params(3, 2, rng);
  draw.mean = params.mean;
  draw.cov = params.cov;
  const std::string path = temp_path("bgmm_base.json").string();
  msar::io::save_model(path, meta, {draw});
  nlohmann::json j = read_json(path);
  j["draws"][0]["mixing"][0][0] =
      j["draws"][0]["mixing"][0][0].get<double>() + 0.5;
  REQUIRE_THROWS_AS(msar::io::load_model(write_json("tamper_mixing.json", j)),
                    msar::InvariantViolation);
}

TEST_CASE("variable set names parse both ways") {
  REQUIRE(msar::io::parse_variable_set("joint") == msar::VariableSet::joint);
  REQUIRE(msar::io::parse_variable_set("ttime") ==
          msar::VariableSet::travel_time);
  REQUIRE(msar::io::parse_variable_set("occupancy") ==
          msar::VariableSet::occupancy);
  REQUIRE_THROWS_AS(msar::io::parse_variable_set("everything"),
                    msar::SchemaError);
  REQUIRE(msar::io::variable_set_name(msar::VariableSet::joint) == "joint");
  REQUIRE(msar::io::variable_set_name(msar::VariableSet::travel_time) ==
          "ttime");
  REQUIRE(msar::io::variable_set_name(msar::VariableSet::occupancy) ==
          "occupancy");
}

TEST_CASE("forecast cuts round trip") {
  msar::io::ForecastCut cut;
  cut[{"day_001", 2}] = 1;
  cut[{"day_001", 3}] = 0;
  cut[{"day_002", 5}] = -1;
  const std::string path = temp_path("cut.csv").string();
  msar::io::save_forecast_cut(path, cut);
  REQUIRE(msar::io::load_forecast_cut(path) == cut);

  REQUIRE_THROWS_AS(
      msar::io::load_forecast_cut(write_file("cut_header.csv", "a,b,c\n")),
      msar::SchemaError);
  const std::string header = "day_id,run_index,observed_links\n";
  REQUIRE_THROWS_AS(msar::io::load_forecast_cut(write_file(
                        "cut_fields.csv", header + "day_001,2\n")),
                    msar::SchemaError);
  REQUIRE_THROWS_AS(msar::io::load_forecast_cut(write_file(
                        "cut_negative.csv", header + "day_001,2,-2\n")),
                    msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_forecast_cut(write_file(
          "cut_duplicate.csv",
          header + "day_001,2,1\nday_001,2,0\n")),
      msar::SchemaError);
}

TEST_CASE("forecast samples round trip") {
  std::vector<msar::io::SampleRecord> records{
      {"day_001", 2, "ltt_2", 0, 1.0 / 3.0},
      {"day_001", 2, "ltt_2", 1, -42.5},
      {"day_002", 7, "hw", 0, 301.25}};
  const std::string path = temp_path("samples.csv").string();
  msar::io::save_forecast_samples(path, records);
  const std::vector<msar::io::SampleRecord> loaded =
      msar::io::load_forecast_samples(path);
  REQUIRE(loaded.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    REQUIRE(loaded[i].day_id == records[i].day_id);
    REQUIRE(loaded[i].run_index == records[i].run_index);
    REQUIRE(loaded[i].entry == records[i].entry);
    REQUIRE(loaded[i].draw == records[i].draw);
    REQUIRE(loaded[i].value == records[i].value);
  }

  REQUIRE_THROWS_AS(msar::io::load_forecast_samples(
                        write_file("samples_header.csv", "a,b,c,d,e\n")),
                    msar::SchemaError);
  REQUIRE_THROWS_AS(
      msar::io::load_forecast_samples(write_file(
          "samples_fields.csv",
          "day_id,run_index,entry,draw,value\nday_001,1,ltt_1,0\n")),
      msar::SchemaError);
}

TEST_CASE("entry names map to run-vector coordinates") {
  REQUIRE(msar::io::parse_dim_name("ltt_1", 3) == 0);
  REQUIRE(msar::io::parse_dim_name("ltt_3", 3) == 2);
  REQUIRE(msar::io::parse_dim_name("occ_1", 3) == 3);
  REQUIRE(msar::io::parse_dim_name("occ_3", 3) == 5);
  REQUIRE(msar::io::parse_dim_name("hw", 3) == 6);
  // Inverse of the name formatter on every coordinate.
  for (int dim = 0; dim < 7; ++dim) {
    REQUIRE(msar::io::parse_dim_name(msar::flat_dim_name(dim, 3), 3) == dim);
  }
  REQUIRE_THROWS_AS(msar::io::parse_dim_name("ltt_0", 3), msar::SchemaError);
  REQUIRE_THROWS_AS(msar::io::parse_dim_name("ltt_4", 3), msar::SchemaError);
  REQUIRE_THROWS_AS(msar::io::parse_dim_name("speed_1", 3), msar::SchemaError);
  REQUIRE_THROWS_AS(msar::io::parse_dim_name("ltt_x", 3), msar::ParseError);
}

}  // namespace
