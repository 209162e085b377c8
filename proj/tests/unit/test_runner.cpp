#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include <gtest/gtest.h>

#include "fbsense/runner/config.hpp"
#include "fbsense/runner/defaults.hpp"
#include "fbsense/runner/experiments.hpp"
#include "fbsense/runner/io.hpp"

using namespace fbsense;
using namespace fbsense::runner;
namespace fs = std::filesystem;

namespace {

const char* kFeedback = R"({
  "name": "unit",
  "frequency_unit": "rad_s",
  "oscillator": {"mass": 1.0, "gamma": 0.01, "omega_m": 1.0},
  "grid": {"dt": 0.1, "n_samples": 4096},
  "noise": {"thermal_force_psd": 1.0, "measurement_noise_psd": 0.1},
  "mode": "feedback",
  "gain": 8.0,
  "master_seed": 5
})";

class Scratch : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("fbsense_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string error_of(const std::string& text) {
  try {
    (void)parse_config_text(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

json base_json() { return json::parse(kFeedback); }

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, CanonicalFormRoundTrips) {
  const ScenarioConfig a = parse_config_text(kFeedback);
  const std::string text = canonical_text(a);
  const ScenarioConfig b = parse_config_text(text);
  EXPECT_EQ(canonical_text(b), text);
  EXPECT_EQ(scenario_hash(a), scenario_hash(b));
  EXPECT_EQ(b.mode, Mode::feedback);
  EXPECT_EQ(b.gain, 8.0);
  EXPECT_EQ(*b.n_samples, 4096u);
}

TEST(Config, ErrorsNameTheField) {
  auto j = base_json();
  j["oscillator"]["gamma"] = -1.0;
  EXPECT_NE(error_of(j.dump()).find("oscillator.gamma"), std::string::npos);
  j = base_json();
  j["grid"]["dt"] = "fast";
  EXPECT_NE(error_of(j.dump()).find("grid.dt"), std::string::npos);
  j = base_json();
  j.erase("grid");
  EXPECT_NE(error_of(j.dump()).find("'grid'"), std::string::npos);
  j = base_json();
  j["noise"]["backaction_measurement_correlation"] = 2.0;
  EXPECT_NE(error_of(j.dump()).find("backaction_measurement_correlation"), std::string::npos);
  j = base_json();
  j["mode"] = "sideways";
  EXPECT_NE(error_of(j.dump()).find("mode"), std::string::npos);
  j = base_json();
  j["gain"] = -3.0;
  EXPECT_NE(error_of(j.dump()).find("gain"), std::string::npos);
  EXPECT_FALSE(error_of("{not json").empty());
}

TEST(Config, UnknownFieldsAreRejected) {
  auto j = base_json();
  j["oscillator"]["masss"] = 2.0;
  const std::string msg = error_of(j.dump());
  EXPECT_NE(msg.find("oscillator.masss"), std::string::npos);
  EXPECT_NE(msg.find("is not a recognised field"), std::string::npos);
  j = base_json();
  j["seed"] = 3;
  EXPECT_NE(error_of(j.dump()).find("'seed'"), std::string::npos);
}

TEST(Config, HertzInputIsConvertedToAngular) {
  auto j = base_json();
  j["frequency_unit"] = "hz";
  j["oscillator"]["gamma"] = 1.0;
  j["oscillator"]["omega_m"] = 0.5;
  j["grid"]["dt"] = 0.01;
  j["noise"]["signal_band"] = {{"center", 0.5}, {"halfwidth", 0.02}};
  j["noise"]["signal_force_psd"] = 0.1;
  const ScenarioConfig c = parse_config(j);
  EXPECT_DOUBLE_EQ(c.oscillator_si().gamma, 2.0 * std::numbers::pi);
  EXPECT_DOUBLE_EQ(c.oscillator_si().omega_m, std::numbers::pi);
  EXPECT_DOUBLE_EQ(c.noise_si().signal_band->halfwidth, 0.04 * std::numbers::pi);
}

TEST(Config, HashIgnoresOutputSection) {
  auto j = base_json();
  const auto h0 = scenario_hash(parse_config(j));
  j["output"] = {{"dir", "/somewhere/else"}, {"csv_records", true}};
  EXPECT_EQ(scenario_hash(parse_config(j)), h0);
  j["gain"] = 8.5;
  EXPECT_NE(scenario_hash(parse_config(j)), h0);
  j = base_json();
  j["master_seed"] = 6;
  EXPECT_NE(scenario_hash(parse_config(j)), h0);
  EXPECT_EQ(hash_hex(h0).size(), 16u);
}

TEST(Config, GainScheduleExpansion) {
  GainScheduleSpec step{GainScheduleSpec::Kind::step, 1.0, 8.0, 0.25, {}};
  const auto s = step.expand(8);
  EXPECT_EQ(s, (std::vector<double>{1, 1, 8, 8, 8, 8, 8, 8}));
  GainScheduleSpec ramp{GainScheduleSpec::Kind::ramp, 0.0, 10.0, 0.5, {}};
  const auto r = ramp.expand(11);
  for (std::size_t k = 0; k < r.size(); ++k) EXPECT_NEAR(r[k], static_cast<double>(k), 1e-12);
  GainScheduleSpec vals{GainScheduleSpec::Kind::values, 0, 0, 0, {1.0, 2.0}};
  EXPECT_THROW(vals.expand(3), ValidationError);
}

TEST(Config, GeometricTauGrid) {
  const auto taus = desk_config("fig2b").estimation.taus.values();
  ASSERT_EQ(taus.size(), 9u);
  EXPECT_DOUBLE_EQ(taus.front(), 3000.0);
  EXPECT_NEAR(taus.back(), 60000.0, 1e-9);
  for (std::size_t k = 2; k < taus.size(); ++k)
    EXPECT_NEAR(taus[k] / taus[k - 1], taus[1] / taus[0], 1e-12);
  EXPECT_EQ(ensemble_taus(desk_config("fig2b")).size(), 10u);
}

TEST(Config, DeskFiguresUseTheReportedGains) {
  // Gain lists as printed alongside the measured figures.
  EXPECT_EQ(desk_config("fig2a").spectra.gains, (std::vector<double>{0, 2, 8, 34, 72, 150}));
  EXPECT_EQ(desk_config("fig2b").estimation.gains, (std::vector<double>{0, 1, 2.4, 5, 10}));
  EXPECT_THROW(desk_config("fig9"), ValidationError);
  // Measurement floor 25 dB below the thermal peak.
  const auto c = desk_config("fig2c");
  const double peak = std::norm(susceptibility(1.0, c.oscillator_si())) * c.noise.thermal_force_psd;
  EXPECT_NEAR(10.0 * std::log10(peak / c.noise.measurement_noise_psd), 25.0, 1e-9);
}

TEST(Config, ShippedConfigsMatchDeskDefaults) {
  const fs::path dir = FBSENSE_CONFIG_DIR;
  const std::pair<const char*, const char*> pairs[] = {
      {"fig2a.json", "fig2a"}, {"fig2b.json", "fig2b"}, {"fig2c.json", "fig2c"}, {"fig3.json", "fig3b"}};
  for (const auto& [file, fig] : pairs) {
    const ScenarioConfig c = load_config((dir / file).string());
    EXPECT_EQ(scenario_hash(c), scenario_hash(desk_config(fig))) << file;
  }
  for (const char* file : {"feedback_g8.json", "filter_g8.json", "fredholm_step.json"})
    EXPECT_NO_THROW((void)load_config((dir / file).string())) << file;
  EXPECT_THROW((void)load_config((dir / "missing.json").string()), IoError);
}

// ---------------------------------------------------------------- io

TEST_F(Scratch, RecordFileRoundTrip) {
  MeasurementRecord r;
  r.grid = {0.125, 5};
  r.samples = {0.0, -1.5, 1e-300, 3.141592653589793, -0.0};
  r.seed = 0xFEEDFACECAFEBEEFull;
  r.scenario_id = "unit";
  write_record(dir_ / "r.bin", r, "00ff");
  const LoadedRecord back = read_record(dir_ / "r.bin");
  EXPECT_EQ(back.record.samples, r.samples);
  EXPECT_EQ(back.record.grid, r.grid);
  EXPECT_EQ(back.record.seed, r.seed);
  EXPECT_EQ(back.record.scenario_id, "unit");
  EXPECT_EQ(back.scenario_hash, "00ff");
}

TEST_F(Scratch, CorruptRecordsAreRejected) {
  write_text(dir_ / "bad.bin", "NOTAREC!\x04\x00\x00\x00{}{}");
  EXPECT_THROW(read_record(dir_ / "bad.bin"), IoError);
  MeasurementRecord r;
  r.grid = {0.1, 4};
  r.samples = {1, 2, 3, 4};
  write_record(dir_ / "ok.bin", r, "h");
  std::string bytes = slurp(dir_ / "ok.bin");
  write_text(dir_ / "short.bin", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_record(dir_ / "short.bin"), IoError);
  EXPECT_THROW(read_record(dir_ / "absent.bin"), IoError);
}

TEST_F(Scratch, CsvPreservesDoublesExactly) {
  Table t({"name", "value"});
  const double vals[] = {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-310, 1e300};
  for (double v : vals) t.add({std::string("x"), v});
  t.write(dir_ / "t.csv");
  const Table back = Table::read(dir_ / "t.csv");
  ASSERT_EQ(back.size(), std::size(vals));
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back.number(i, "value"), vals[i]);
  EXPECT_EQ(back.text(0, "name"), "x");
  EXPECT_THROW(back.column("nope"), ValidationError);
  EXPECT_THROW(t.add({1.0}), ValidationError);
}

// ---------------------------------------------------------------- single-record runs

TEST_F(Scratch, ZeroNoiseOpenLoopIsAllZeros) {
  auto j = base_json();
  j["mode"] = "open_loop";
  j["noise"] = json::object();
  j["output"] = {{"csv_records", true}};
  const auto m = run_scenario(parse_config(j), dir_);
  const auto rec = read_record(dir_ / "open_loop.bin").record;
  ASSERT_EQ(rec.samples.size(), 4096u);
  for (double v : rec.samples) ASSERT_EQ(v, 0.0);
  EXPECT_TRUE(fs::exists(dir_ / "open_loop.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "config_open_loop.json"));
  EXPECT_TRUE(m.runs.count("open_loop"));
}

TEST_F(Scratch, FeedbackAndFilterFilesAgree) {
  auto j = base_json();
  run_scenario(parse_config(j), dir_);
  j["mode"] = "filter";
  const auto m = run_scenario(parse_config(j), dir_);
  EXPECT_TRUE(m.runs.count("feedback"));
  EXPECT_TRUE(m.runs.count("filter"));
  const auto rep = compare(dir_ / "feedback.bin", dir_ / "filter.bin");
  EXPECT_LE(rep.relative_l2_error, 1e-8);
  EXPECT_TRUE(report_json(rep, 1e-8)["equivalent"].get<bool>());
  // Both configs survive side by side.
  EXPECT_EQ(load_config((dir_ / "config_feedback.json").string()).mode, Mode::feedback);
  EXPECT_EQ(load_config((dir_ / "config_filter.json").string()).mode, Mode::filter);
  const RunManifest back = load_manifest(dir_);
  EXPECT_EQ(back.runs.size(), 2u);
  EXPECT_EQ(back.seed, 5u);
}

TEST_F(Scratch, FredholmStepScheduleMatchesFeedback) {
  ScenarioConfig c = load_config((fs::path(FBSENSE_CONFIG_DIR) / "fredholm_step.json").string());
  run_scenario(c, dir_);
  c.mode = Mode::feedback;
  run_scenario(c, dir_);
  EXPECT_LE(compare(dir_ / "feedback.bin", dir_ / "fredholm.bin").relative_l2_error, 1e-8);
}

TEST_F(Scratch, OversizedFredholmIsRefusedUpFront) {
  ScenarioConfig c = load_config((fs::path(FBSENSE_CONFIG_DIR) / "fredholm_step.json").string());
  c.n_samples = 30000;
  try {
    run_scenario(c, dir_);
    FAIL() << "dense kernel not guarded";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("grid.n_samples"), std::string::npos);
  }
}

TEST_F(Scratch, RecordsAreByteReproducible) {
  const ScenarioConfig c = parse_config_text(kFeedback);
  run_scenario(c, dir_ / "a");
  run_scenario(c, dir_ / "b");
  EXPECT_EQ(slurp(dir_ / "a" / "feedback.bin"), slurp(dir_ / "b" / "feedback.bin"));
}

// ---------------------------------------------------------------- named runs and figures

TEST_F(Scratch, FigureWithoutRunsNamesWhatIsMissing) {
  try {
    emit_figure_data(RunManifest{}, "fig2b", dir_);
    FAIL() << "no error";
  } catch (const MissingRunsError& e) {
    EXPECT_EQ(e.missing(), (std::vector<std::string>{"sweep_tau"}));
    EXPECT_NE(std::string(e.what()).find("sweep_tau"), std::string::npos);
  }
  EXPECT_THROW(figure_dependencies("fig7"), ValidationError);
  EXPECT_EQ(figure_dependencies("fig3a"), (std::vector<std::string>{"resolve"}));
}

TEST_F(Scratch, SmallTauSweepEndToEnd) {
  ScenarioConfig c = desk_estimation("tiny", {0.0, 2.0});
  c.estimation.taus = {};
  c.estimation.taus.list = {3000.0, 4000.0, 5000.0, 6000.0, 8000.0};
  c.estimation.tau_fixed = 8000.0;
  c.estimation.n_trials = 4;
  c.validate();
  run_named(c, "sweep_tau", dir_ / "one", 1);
  const RunManifest m = run_named(c, "sweep_tau", dir_ / "two", 2);
  EXPECT_TRUE(m.has_run("sweep_tau", hash_hex(scenario_hash(c))));
  EXPECT_EQ(slurp(dir_ / "one" / "sweep_tau.csv"), slurp(dir_ / "two" / "sweep_tau.csv"));

  const auto files = emit_figure_data(load_manifest(dir_ / "one"), "fig2b", dir_ / "one");
  EXPECT_EQ(files, (std::vector<std::string>{"fig2b.csv", "fig2b_fits.csv"}));
  const Table fig = Table::read(dir_ / "one" / "fig2b.csv");
  EXPECT_EQ(fig.columns(), (std::vector<std::string>{"tau_s", "delta_f", "gain", "mode"}));
  EXPECT_EQ(fig.size(), 10u);
  const Table fits = Table::read(dir_ / "one" / "fig2b_fits.csv");
  EXPECT_EQ(fits.size(), 2u);
  EXPECT_THROW(run_named(c, "sweep_sideways", dir_, 1), ValidationError);
}

TEST(Experiments, InteriorMinimum) {
  std::size_t at = 99;
  EXPECT_TRUE(interior_minimum({3, 2, 1, 2}, &at));
  EXPECT_EQ(at, 2u);
  EXPECT_FALSE(interior_minimum({1, 2, 3}, &at));
  EXPECT_FALSE(interior_minimum({3, 2, 1}));
  EXPECT_FALSE(interior_minimum({1, 0}));
}

TEST(Experiments, ProcessingsMapZeroGainToOpenLoop) {
  const auto procs = ensemble_processings(desk_config("fig2b"));
  ASSERT_EQ(procs.size(), 5u);
  EXPECT_EQ(procs[0].mode, Processing::Mode::open_loop);
  for (std::size_t i = 1; i < procs.size(); ++i) EXPECT_EQ(procs[i].mode, Processing::Mode::filter);
}

TEST(Experiments, SignalEnsembleUsesCalibratedBand) {
  const auto c = desk_config("fig3b");
  const NoiseConfig th = ensemble_noise(c, EnsembleKind::thermal);
  EXPECT_EQ(th.signal_force_psd, 0.0);
  EXPECT_FALSE(th.signal_band.has_value());
  const NoiseConfig sg = ensemble_noise(c, EnsembleKind::signal);
  const auto p = c.oscillator_si();
  EXPECT_DOUBLE_EQ(sg.signal_force_psd, calibrate_signal_psd(p, 1.0, 0.07, 10.0 * p.gamma));
  EXPECT_DOUBLE_EQ(sg.signal_band->center, p.omega_m);
  EXPECT_EQ(sg.thermal_force_psd, th.thermal_force_psd);
}
