#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbsense/error.hpp"
#include "fbsense/estimation.hpp"
#include "fbsense/noise.hpp"
#include "fbsense/oscillator.hpp"

namespace fbsense::runner {

using json = nlohmann::json;

enum class FrequencyUnit { hz, rad_s };
enum class Mode { open_loop, feedback, filter, fredholm };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::open_loop:
      return "open_loop";
    case Mode::feedback:
      return "feedback";
    case Mode::filter:
      return "filter";
    case Mode::fredholm:
      return "fredholm";
  }
  return "?";
}

/// Time-varying cold-damping gain, expanded onto the grid by `expand`.
struct GainScheduleSpec {
  enum class Kind { step, ramp, values };
  Kind kind = Kind::step;
  double start = 0.0;        // step: gain before the switch; ramp: first gain
  double end = 0.0;          // step: gain after; ramp: last gain
  double at_fraction = 0.5;  // step position as a fraction of the record
  std::vector<double> values;

  std::vector<double> expand(std::size_t n) const {
    std::vector<double> g(n);
    switch (kind) {
      case Kind::step: {
        const auto k0 = static_cast<std::size_t>(std::floor(at_fraction * static_cast<double>(n)));
        for (std::size_t k = 0; k < n; ++k) g[k] = k < k0 ? start : end;
        break;
      }
      case Kind::ramp:
        for (std::size_t k = 0; k < n; ++k)
          g[k] = n > 1 ? start + (end - start) * static_cast<double>(k) / static_cast<double>(n - 1) : start;
        break;
      case Kind::values:
        if (values.size() != n) throw ValidationError("gain_schedule.values length differs from grid.n_samples");
        g = values;
        break;
    }
    return g;
  }
};

/// Either an explicit list or `count` geometric points in [min, max].
struct TauSpec {
  std::vector<double> list;
  std::optional<double> min, max;
  std::size_t count = 0;

  std::vector<double> values() const {
    if (!list.empty()) return list;
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double f = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
      out[k] = *min * std::pow(*max / *min, f);
    }
    return out;
  }
};

struct EstimationConfig {
  Processing::Mode processing = Processing::Mode::filter;
  std::vector<double> gains{0.0};
  TauSpec taus;
  std::optional<double> tau_fixed;
  std::size_t n_trials = 200;
  std::optional<std::size_t> burn_in_samples;
  std::optional<double> demod_omega_ref;
  std::optional<double> demod_cutoff;
  std::optional<std::size_t> decimation;
  double signal_fraction = 0.07;
  std::optional<double> signal_halfwidth;  // default 10 gamma
};

struct SpectraConfig {
  std::vector<double> gains;
  double inset_gain = 1.0;
  std::size_t segment_len = 1u << 16;
  double overlap = 0.5;
  std::optional<double> band_lo, band_hi;
};

struct OutputConfig {
  std::string dir;
  bool csv_records = false;
};

/// One declarative scenario. Frequency-valued fields are stored in
/// `unit`; the *_si accessors return rad/s.
struct ScenarioConfig {
  std::string name = "scenario";
  FrequencyUnit unit = FrequencyUnit::hz;
  double mass = 1.0;
  double gamma = 1e-3;
  double omega_m = 1.0;
  double dt = 0.1;
  std::optional<std::size_t> n_samples;
  NoiseConfig noise;  // signal_band in `unit`
  Mode mode = Mode::open_loop;
  double gain = 0.0;
  std::optional<GainScheduleSpec> gain_schedule;
  std::size_t delay_steps = 0;
  EstimationConfig estimation;
  SpectraConfig spectra;
  std::uint64_t master_seed = 1;
  OutputConfig output;

  double to_rad(double v) const { return unit == FrequencyUnit::hz ? 2.0 * std::numbers::pi * v : v; }

  OscillatorParams oscillator_si() const { return {mass, to_rad(gamma), to_rad(omega_m)}; }

  NoiseConfig noise_si() const {
    NoiseConfig n = noise;
    if (n.signal_band) n.signal_band = SignalBand{to_rad(n.signal_band->center), to_rad(n.signal_band->halfwidth)};
    return n;
  }

  SimGrid grid() const {
    if (!n_samples) throw ValidationError("grid.n_samples is required for single-record runs");
    return {dt, *n_samples};
  }

  double max_gain() const {
    double g = std::max(0.0, gain);
    for (double v : estimation.gains) g = std::max(g, v);
    for (double v : spectra.gains) g = std::max(g, v);
    return g;
  }

  DemodSettings demod_si() const {
    const OscillatorParams p = oscillator_si();
    DemodSettings d;
    d.omega_ref = estimation.demod_omega_ref ? to_rad(*estimation.demod_omega_ref) : p.omega_m;
    double gmax = 0.0;
    for (double v : estimation.gains) gmax = std::max(gmax, v);
    d.lowpass_cutoff = estimation.demod_cutoff ? to_rad(*estimation.demod_cutoff)
                                               : std::min(10.0 * p.gamma * (1.0 + gmax), 0.5 * p.omega_m);
    d.decimation = estimation.decimation ? *estimation.decimation : DemodSettings::default_decimation(d.lowpass_cutoff, dt);
    return d;
  }

  double signal_halfwidth_si() const {
    return estimation.signal_halfwidth ? to_rad(*estimation.signal_halfwidth) : 10.0 * oscillator_si().gamma;
  }

  /// Ensemble scenario long enough for the largest tau after burn-in.
  EnsembleScenario ensemble_scenario() const {
    EnsembleScenario s;
    s.params = oscillator_si();
    s.noise = noise_si();
    s.demod = demod_si();
    s.burn_in = estimation.burn_in_samples ? *estimation.burn_in_samples
                                           : EnsembleScenario::default_burn_in(s.params, dt);
    const auto taus = estimation.taus.values();
    double tmax = 0.0;
    for (double t : taus) tmax = std::max(tmax, t);
    if (estimation.tau_fixed) tmax = std::max(tmax, *estimation.tau_fixed);
    const auto need = s.burn_in + static_cast<std::size_t>(std::ceil(tmax / dt)) + 2 * s.demod.decimation;
    s.grid = {dt, n_samples ? std::max(*n_samples, need) : need};
    return s;
  }

  double tau_fixed() const {
    if (estimation.tau_fixed) return *estimation.tau_fixed;
    const auto taus = estimation.taus.values();
    if (taus.empty()) throw ValidationError("estimation.tau_list is empty");
    return taus.back();
  }

  void validate() const;
};

namespace detail {

/// Reads a JSON object, reporting the dotted path of any bad or unknown field.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail("", "must be an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError("config field '" + join(key) + "' " + what);
  }

  std::string join(const std::string& key) const {
    if (path_.empty()) return key;
    return key.empty() ? path_ : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(key, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    return d;
  }

  std::optional<double> opt_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key, 0.0);
  }

  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(key, "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::optional<std::size_t> opt_size(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return static_cast<std::size_t>(u64(key, 0));
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) fail(key, "must be true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) fail(key, "must be a string");
    return j_.at(key).get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = j_.at(key);
    if (!v.is_array()) fail(key, "must be an array of numbers");
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Fields child(const std::string& key) {
    seen_.insert(key);
    return Fields(j_.at(key), join(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(it.key(), "is not a recognised field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Parses and validates; every message names the offending field.
inline ScenarioConfig parse_config(const json& j) {
  ScenarioConfig c;
  detail::Fields root(j, "");
  c.name = root.string("name", c.name);
  const std::string unit = root.string("frequency_unit", "hz");
  if (unit == "hz") {
    c.unit = FrequencyUnit::hz;
  } else if (unit == "rad_s") {
    c.unit = FrequencyUnit::rad_s;
  } else {
    root.fail("frequency_unit", "must be \"hz\" or \"rad_s\"");
  }

  if (!root.has("oscillator")) root.fail("oscillator", "is required");
  {
    auto o = root.child("oscillator");
    c.mass = o.number("mass", c.mass);
    if (!o.has("gamma")) o.fail("gamma", "is required");
    if (!o.has("omega_m")) o.fail("omega_m", "is required");
    c.gamma = o.number("gamma", 0.0);
    c.omega_m = o.number("omega_m", 0.0);
    o.finish();
  }
  if (!root.has("grid")) root.fail("grid", "is required");
  {
    auto g = root.child("grid");
    if (!g.has("dt")) g.fail("dt", "is required");
    c.dt = g.number("dt", 0.0);
    c.n_samples = g.opt_size("n_samples");
    g.finish();
  }
  if (root.has("noise")) {
    auto n = root.child("noise");
    c.noise.thermal_force_psd = n.number("thermal_force_psd", 0.0);
    c.noise.measurement_noise_psd = n.number("measurement_noise_psd", 0.0);
    c.noise.backaction_force_psd = n.number("backaction_force_psd", 0.0);
    c.noise.backaction_measurement_correlation = n.number("backaction_measurement_correlation", 0.0);
    c.noise.signal_force_psd = n.number("signal_force_psd", 0.0);
    c.noise.static_force = n.number("static_force", 0.0);
    const std::string law = n.string("law", "gaussian");
    if (law == "gaussian") {
      c.noise.noise_law = NoiseLaw::gaussian();
      if (n.has("dof")) n.fail("dof", "only applies to law \"student_t\"");
    } else if (law == "student_t") {
      c.noise.noise_law = NoiseLaw::heavy_tailed(n.number("dof", 3.0));
    } else {
      n.fail("law", "must be \"gaussian\" or \"student_t\"");
    }
    if (n.has("signal_band")) {
      auto b = n.child("signal_band");
      c.noise.signal_band = SignalBand{b.number("center", 0.0), b.number("halfwidth", 0.0)};
      b.finish();
    }
    n.finish();
  }

  const std::string mode = root.string("mode", "open_loop");
  if (mode == "open_loop") {
    c.mode = Mode::open_loop;
  } else if (mode == "feedback") {
    c.mode = Mode::feedback;
  } else if (mode == "filter") {
    c.mode = Mode::filter;
  } else if (mode == "fredholm") {
    c.mode = Mode::fredholm;
  } else {
    root.fail("mode", "must be one of open_loop, feedback, filter, fredholm");
  }
  c.gain = root.number("gain", 0.0);
  c.delay_steps = root.opt_size("delay_steps").value_or(0);
  if (root.has("gain_schedule")) {
    auto s = root.child("gain_schedule");
    GainScheduleSpec spec;
    const std::string kind = s.string("kind", "");
    if (kind == "step") {
      spec.kind = GainScheduleSpec::Kind::step;
      spec.start = s.number("before", 0.0);
      spec.end = s.number("after", 0.0);
      spec.at_fraction = s.number("at_fraction", 0.5);
    } else if (kind == "ramp") {
      spec.kind = GainScheduleSpec::Kind::ramp;
      spec.start = s.number("start", 0.0);
      spec.end = s.number("end", 0.0);
    } else if (kind == "values") {
      spec.kind = GainScheduleSpec::Kind::values;
      spec.values = s.numbers("values");
    } else {
      s.fail("kind", "must be one of step, ramp, values");
    }
    s.finish();
    c.gain_schedule = spec;
  }

  if (root.has("estimation")) {
    auto e = root.child("estimation");
    const std::string proc = e.string("processing", "filter");
    if (proc == "filter") {
      c.estimation.processing = Processing::Mode::filter;
    } else if (proc == "feedback") {
      c.estimation.processing = Processing::Mode::feedback;
    } else {
      e.fail("processing", "must be \"filter\" or \"feedback\"");
    }
    if (e.has("gains")) c.estimation.gains = e.numbers("gains");
    if (e.has("tau_list")) c.estimation.taus.list = e.numbers("tau_list");
    if (e.has("tau_range")) {
      if (!c.estimation.taus.list.empty()) e.fail("tau_range", "conflicts with tau_list");
      auto r = e.child("tau_range");
      c.estimation.taus.min = r.number("min", 0.0);
      c.estimation.taus.max = r.number("max", 0.0);
      c.estimation.taus.count = r.opt_size("count").value_or(0);
      r.finish();
    }
    c.estimation.tau_fixed = e.opt_number("tau_fixed");
    c.estimation.n_trials = e.opt_size("n_trials").value_or(c.estimation.n_trials);
    c.estimation.burn_in_samples = e.opt_size("burn_in_samples");
    c.estimation.signal_fraction = e.number("signal_fraction", c.estimation.signal_fraction);
    c.estimation.signal_halfwidth = e.opt_number("signal_halfwidth");
    if (e.has("demod")) {
      auto d = e.child("demod");
      c.estimation.demod_omega_ref = d.opt_number("omega_ref");
      c.estimation.demod_cutoff = d.opt_number("cutoff");
      c.estimation.decimation = d.opt_size("decimation");
      d.finish();
    }
    e.finish();
  }
  if (root.has("spectra")) {
    auto s = root.child("spectra");
    c.spectra.gains = s.numbers("gains");
    c.spectra.inset_gain = s.number("inset_gain", c.spectra.inset_gain);
    c.spectra.segment_len = s.opt_size("segment_len").value_or(c.spectra.segment_len);
    c.spectra.overlap = s.number("overlap", c.spectra.overlap);
    c.spectra.band_lo = s.opt_number("band_lo");
    c.spectra.band_hi = s.opt_number("band_hi");
    s.finish();
  }
  c.master_seed = root.u64("master_seed", c.master_seed);
  if (root.has("output")) {
    auto o = root.child("output");
    c.output.dir = o.string("dir", "");
    c.output.csv_records = o.boolean("csv_records", false);
    o.finish();
  }
  root.finish();
  c.validate();
  return c;
}

inline ScenarioConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Canonical JSON: every field present with its effective value, keys sorted.
inline json to_json(const ScenarioConfig& c, bool include_output = true) {
  json j;
  j["name"] = c.name;
  j["frequency_unit"] = c.unit == FrequencyUnit::hz ? "hz" : "rad_s";
  j["oscillator"] = {{"mass", c.mass}, {"gamma", c.gamma}, {"omega_m", c.omega_m}};
  j["grid"] = {{"dt", c.dt}};
  if (c.n_samples) j["grid"]["n_samples"] = *c.n_samples;
  json n = {{"thermal_force_psd", c.noise.thermal_force_psd},
            {"measurement_noise_psd", c.noise.measurement_noise_psd},
            {"backaction_force_psd", c.noise.backaction_force_psd},
            {"backaction_measurement_correlation", c.noise.backaction_measurement_correlation},
            {"signal_force_psd", c.noise.signal_force_psd},
            {"static_force", c.noise.static_force}};
  if (c.noise.noise_law.kind == NoiseLaw::Kind::gaussian) {
    n["law"] = "gaussian";
  } else {
    n["law"] = "student_t";
    n["dof"] = c.noise.noise_law.dof;
  }
  if (c.noise.signal_band)
    n["signal_band"] = {{"center", c.noise.signal_band->center}, {"halfwidth", c.noise.signal_band->halfwidth}};
  j["noise"] = n;
  j["mode"] = to_string(c.mode);
  j["gain"] = c.gain;
  j["delay_steps"] = c.delay_steps;
  if (c.gain_schedule) {
    const auto& s = *c.gain_schedule;
    switch (s.kind) {
      case GainScheduleSpec::Kind::step:
        j["gain_schedule"] = {{"kind", "step"}, {"before", s.start}, {"after", s.end}, {"at_fraction", s.at_fraction}};
        break;
      case GainScheduleSpec::Kind::ramp:
        j["gain_schedule"] = {{"kind", "ramp"}, {"start", s.start}, {"end", s.end}};
        break;
      case GainScheduleSpec::Kind::values:
        j["gain_schedule"] = {{"kind", "values"}, {"values", s.values}};
        break;
    }
  }
  json e;
  e["processing"] = to_string(c.estimation.processing);
  e["gains"] = c.estimation.gains;
  if (!c.estimation.taus.list.empty()) {
    e["tau_list"] = c.estimation.taus.list;
  } else if (c.estimation.taus.count > 0) {
    e["tau_range"] = {{"min", *c.estimation.taus.min}, {"max", *c.estimation.taus.max}, {"count", c.estimation.taus.count}};
  }
  if (c.estimation.tau_fixed) e["tau_fixed"] = *c.estimation.tau_fixed;
  e["n_trials"] = c.estimation.n_trials;
  if (c.estimation.burn_in_samples) e["burn_in_samples"] = *c.estimation.burn_in_samples;
  e["signal_fraction"] = c.estimation.signal_fraction;
  if (c.estimation.signal_halfwidth) e["signal_halfwidth"] = *c.estimation.signal_halfwidth;
  json d = json::object();
  if (c.estimation.demod_omega_ref) d["omega_ref"] = *c.estimation.demod_omega_ref;
  if (c.estimation.demod_cutoff) d["cutoff"] = *c.estimation.demod_cutoff;
  if (c.estimation.decimation) d["decimation"] = *c.estimation.decimation;
  e["demod"] = d;
  j["estimation"] = e;
  json s = {{"gains", c.spectra.gains},
            {"inset_gain", c.spectra.inset_gain},
            {"segment_len", c.spectra.segment_len},
            {"overlap", c.spectra.overlap}};
  if (c.spectra.band_lo) s["band_lo"] = *c.spectra.band_lo;
  if (c.spectra.band_hi) s["band_hi"] = *c.spectra.band_hi;
  j["spectra"] = s;
  j["master_seed"] = c.master_seed;
  if (include_output) j["output"] = {{"dir", c.output.dir}, {"csv_records", c.output.csv_records}};
  return j;
}

inline std::string canonical_text(const ScenarioConfig& c) { return to_json(c).dump(2) + "\n"; }

/// FNV-1a 64 over the canonical JSON without the output section.
inline std::uint64_t scenario_hash(const ScenarioConfig& c) {
  const std::string text = to_json(c, false).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void ScenarioConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& what) {
    throw ValidationError("config field '" + field + "' " + what);
  };
  if (!(mass > 0.0)) bad("oscillator.mass", "must be > 0");
  if (!(gamma > 0.0)) bad("oscillator.gamma", "must be > 0");
  if (!(omega_m > 0.0)) bad("oscillator.omega_m", "must be > 0");
  if (!(dt > 0.0)) bad("grid.dt", "must be > 0");
  if (n_samples && *n_samples < 2) bad("grid.n_samples", "must be >= 2");
  const OscillatorParams p = oscillator_si();
  if (p.omega_m * dt > 0.5) bad("grid.dt", "is too coarse: omega_m*dt exceeds 0.5");
  try {
    noise_si().validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config ") + e.what());
  }
  if (!(gain > -1.0)) bad("gain", "must exceed -1 (anti-damping instability)");
  if (mode == Mode::fredholm && !gain_schedule && !(gain > -1.0)) bad("gain", "must exceed -1");
  if (gain_schedule) {
    const auto& s = *gain_schedule;
    if (s.kind == GainScheduleSpec::Kind::values) {
      if (s.values.empty()) bad("gain_schedule.values", "must not be empty");
      for (double v : s.values)
        if (!(v > -1.0)) bad("gain_schedule.values", "entries must exceed -1");
      if (n_samples && s.values.size() != *n_samples) bad("gain_schedule.values", "length must equal grid.n_samples");
    } else {
      if (!(s.start > -1.0) || !(s.end > -1.0)) bad("gain_schedule", "gains must exceed -1");
      if (!(s.at_fraction >= 0.0 && s.at_fraction <= 1.0)) bad("gain_schedule.at_fraction", "must lie in [0, 1]");
    }
    if (mode == Mode::filter) bad("gain_schedule", "needs mode feedback or fredholm (the recursive filter is stationary)");
  }
  if ((mode == Mode::filter || mode == Mode::fredholm) && delay_steps > 0 && gain_schedule)
    bad("delay_steps", "is not supported together with gain_schedule");
  for (double g : estimation.gains)
    if (!(g >= 0.0)) bad("estimation.gains", "entries must be >= 0");
  for (std::size_t k = 1; k < estimation.gains.size(); ++k)
    if (!(estimation.gains[k] > estimation.gains[k - 1])) bad("estimation.gains", "must be strictly increasing");
  if (estimation.taus.list.empty() && estimation.taus.count > 0) {
    if (!(*estimation.taus.min > 0.0) || !(*estimation.taus.max > *estimation.taus.min))
      bad("estimation.tau_range", "needs 0 < min < max");
    if (estimation.taus.count < 2) bad("estimation.tau_range.count", "must be >= 2");
  }
  const auto taus = estimation.taus.values();
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (!(taus[k] > 0.0)) bad("estimation.tau_list", "entries must be > 0");
    if (k > 0 && !(taus[k] > taus[k - 1])) bad("estimation.tau_list", "must be strictly increasing");
  }
  if (estimation.tau_fixed && !(*estimation.tau_fixed > 0.0)) bad("estimation.tau_fixed", "must be > 0");
  if (estimation.n_trials < 2) bad("estimation.n_trials", "must be >= 2");
  if (!(estimation.signal_fraction >= 0.0)) bad("estimation.signal_fraction", "must be >= 0");
  if (estimation.signal_halfwidth && !(*estimation.signal_halfwidth > 0.0))
    bad("estimation.signal_halfwidth", "must be > 0");
  if (estimation.decimation && *estimation.decimation < 1) bad("estimation.demod.decimation", "must be >= 1");
  if (!taus.empty()) {
    try {
      demod_si().validate(dt);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("config field 'estimation.demod': ") + e.what());
    }
  }
  for (double g : spectra.gains)
    if (!(g > -1.0)) bad("spectra.gains", "entries must exceed -1");
  if (spectra.segment_len < 8) bad("spectra.segment_len", "must be >= 8");
  if (!(spectra.overlap >= 0.0 && spectra.overlap < 1.0)) bad("spectra.overlap", "must lie in [0, 1)");
}

}  // namespace fbsense::runner
