// mpspec: simulate the SPAD-array spectrometer and analyse time-tag streams.
//
//   mpspec simulate  --source spdc --temp 50 --duration 3600 --seed 7 -o run.ttag
//   mpspec correlate run.ttag --delay-ps 150000 --window-ps 500 -o joint.csv
//   mpspec spectrum  run.ttag [--dark dark.ttag] -o spectrum.json
//   mpspec tau-hist  run.ttag --ch-a 5 --ch-b 10 --range-ps 145000:155000 --bin-ps 156 -o tau.csv
//   mpspec saturate  --rates 1e4,1e5,1e6,1e7 --duration 10 --seed 1 -o sat.csv
//
// Exit codes: 0 success, 2 validation, 3 I/O, 4 data integrity.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mpspec/mpspec.hpp"

namespace {

using namespace mpspec;

constexpr int kExitValidation = 2;

struct SimulateArgs {
  std::string config;
  std::string source;
  std::optional<double> temp;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct CorrelateArgs {
  std::string in;
  double delay_ps = 150000;
  double window_ps = 500;
  std::size_t channels = 16;
  bool no_same_channel = false;
  std::string accidentals;
  double offset_ps = kDefaultAccidentalOffsetPs;
  std::string out;
};

struct SpectrumArgs {
  std::string in;
  std::string dark;
  std::optional<double> duration;
  std::size_t channels = 16;
  std::string out;
};

struct TauArgs {
  std::string in;
  unsigned ch_a = 0;
  unsigned ch_b = 0;
  std::string range = "145000:155000";
  double bin_ps = kDefaultTickPs;
  std::string out;
};

struct SaturateArgs {
  std::string config;
  std::string rates = "1e4,1e5,1e6,1e7";
  double duration = 10;
  std::uint64_t seed = 1;
  std::string out;
};

MasterConfig config_or_default(const std::string& path) {
  if (path.empty()) return MasterConfig{};
  return load_config(path);
}

// Exposure of a stream without side information: from t = 0 to the end of
// the last tick.
double stream_exposure_s(const TagStream& s) {
  if (s.tags.empty()) return 0.0;
  return static_cast<double>(s.tags.back().ticks + 1) * s.header.tick_ps / kPsPerSecond;
}

int run_simulate(const SimulateArgs& a) {
  MasterConfig cfg = config_or_default(a.config);
  const SourceKind source = parse_source(a.source);
  if (a.temp) cfg.spdc.temperature = *a.temp;
  if (a.duration) cfg.duration_s = *a.duration;
  if (a.seed) cfg.seed = *a.seed;
  if (!cfg.seed) throw ConfigError("seed: required for simulation (--seed or config \"seed\")");
  cfg.validate();

  const SimulationResult r = simulate(cfg, source, cfg.duration_s, *cfg.seed);
  write_stream_file(a.out, r.header, r.tags);

  std::vector<std::uint64_t> per_channel(cfg.pixel_map.pixel_count, 0);
  nlohmann::json causes = {{"photon", 0}, {"dark", 0}, {"afterpulse", 0}, {"crosstalk", 0}};
  for (const auto& e : r.events) {
    if (e.pixel < per_channel.size()) ++per_channel[e.pixel];
    causes[to_string(e.cause)] = causes[to_string(e.cause)].get<std::uint64_t>() + 1;
  }
  std::vector<double> rates;
  for (auto c : per_channel) rates.push_back(static_cast<double>(c) / cfg.duration_s);
  nlohmann::json summary = {{"source", a.source},
                            {"duration_s", cfg.duration_s},
                            {"seed", *cfg.seed},
                            {"tick_ps", r.header.tick_ps},
                            {"channel_count", r.header.channel_count},
                            {"photons_at_fiber", r.photons_at_fiber},
                            {"events", r.tags.size()},
                            {"causes", causes},
                            {"per_channel_rate_hz", rates}};
  if (source == SourceKind::spdc) summary["temperature_c"] = cfg.spdc.temperature;
  (a.out == "-" ? std::cerr : std::cout) << summary.dump() << '\n';
  return 0;
}

int run_correlate(const CorrelateArgs& a) {
  const TagStream s = read_stream_file(a.in);
  CoincidenceSpec spec{a.delay_ps, a.window_ps, !a.no_same_channel};
  Histogram2D h = correlate(s.tags, spec, s.header.tick_ps, a.channels);
  h.exposure_s = stream_exposure_s(s);
  nlohmann::json settings = to_json(spec);
  settings["tick_ps"] = s.header.tick_ps;
  write_histogram(a.out, h, settings);
  if (!a.accidentals.empty()) {
    Histogram2D acc = estimate_accidentals(s.tags, spec, a.offset_ps, s.header.tick_ps, a.channels);
    acc.exposure_s = h.exposure_s;
    settings["offset_ps"] = a.offset_ps;
    write_histogram(a.accidentals, acc, settings);
  }
  return 0;
}

int run_spectrum(const SpectrumArgs& a) {
  const TagStream s = read_stream_file(a.in);
  const double exposure = a.duration ? *a.duration : stream_exposure_s(s);
  if (!(exposure > 0)) throw ConfigError("duration: exposure must be > 0 s (empty stream needs --duration)");
  std::optional<Histogram1D> dark;
  if (!a.dark.empty()) {
    if (wants_json(a.dark)) {
      dark = read_histogram1d(a.dark);
    } else {
      const TagStream d = read_stream_file(a.dark);
      dark = spectrum(d.tags, std::max(stream_exposure_s(d), 1e-12), a.channels);
      dark->exposure_s = stream_exposure_s(d);
    }
  }
  const Histogram1D h = spectrum(s.tags, exposure, a.channels, dark ? &*dark : nullptr);
  nlohmann::json settings = {{"tick_ps", s.header.tick_ps}, {"dark", a.dark}};
  write_histogram(a.out, h, settings);
  return 0;
}

std::pair<double, double> parse_range(const std::string& r) {
  const auto colon = r.find(':');
  if (colon == std::string::npos) throw ConfigError("range-ps: expected \"LO:HI\"");
  try {
    const double lo = std::stod(r.substr(0, colon));
    const double hi = std::stod(r.substr(colon + 1));
    return {lo, hi};
  } catch (const std::exception&) {
    throw ConfigError("range-ps: expected \"LO:HI\" with numeric bounds");
  }
}

int run_tau(const TauArgs& a) {
  const auto [lo, hi] = parse_range(a.range);
  if (a.ch_a > 255 || a.ch_b > 255) throw ConfigError("ch-a/ch-b: channel must be < 256");
  const TagStream s = read_stream_file(a.in);
  Histogram1D h = tau_histogram(s.tags, static_cast<std::uint8_t>(a.ch_a), static_cast<std::uint8_t>(a.ch_b),
                                lo, hi, a.bin_ps, s.header.tick_ps);
  h.exposure_s = stream_exposure_s(s);
  nlohmann::json settings = {{"ch_a", a.ch_a}, {"ch_b", a.ch_b}, {"range_ps", {lo, hi}},
                             {"bin_ps", a.bin_ps}, {"tick_ps", s.header.tick_ps}};
  write_histogram(a.out, h, settings);
  return 0;
}

int run_saturate(const SaturateArgs& a) {
  const MasterConfig cfg = config_or_default(a.config);
  std::vector<double> rates;
  std::stringstream ss(a.rates);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      rates.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("rates: \"" + item + "\" is not a number");
    }
    if (!(rates.back() > 0)) throw ConfigError("rates: every rate must be > 0 Hz");
  }
  if (rates.empty()) throw ConfigError("rates: at least one rate required");
  const auto curve = saturation_curve(rates, cfg.detector, a.duration, a.seed);
  std::ostringstream os;
  os.precision(10);
  os << "true_rate_hz,detected_rate_hz\n";
  for (const auto& p : curve) os << p.true_rate_hz << ',' << p.detected_rate_hz << '\n';
  write_text_file(a.out, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPAD-array multi-photon spectrometer: simulation and time-tag analysis"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate a source through the detector into a time-tag file");
  cmd_sim->add_option("--config", sim.config, "Master JSON config");
  cmd_sim->add_option("--source", sim.source, "spdc | pulsed | none")->required();
  cmd_sim->add_option("--temp", sim.temp, "SPDC crystal temperature in C");
  cmd_sim->add_option("--duration", sim.duration, "Acquisition time in s");
  cmd_sim->add_option("--seed", sim.seed, "RNG seed");
  cmd_sim->add_option("-o,--out", sim.out, "Output time-tag file, - for stdout")->required();

  CorrelateArgs cor;
  auto* cmd_cor = app.add_subcommand("correlate", "Joint channel histogram of delayed coincidences");
  cmd_cor->add_option("input", cor.in, "Time-tag file, - for stdin")->required();
  cmd_cor->add_option("--delay-ps", cor.delay_ps, "Expected delay between photons");
  cmd_cor->add_option("--window-ps", cor.window_ps, "Full coincidence window width");
  cmd_cor->add_option("--channels", cor.channels, "Histogram size per axis");
  cmd_cor->add_flag("--no-same-channel", cor.no_same_channel, "Drop pairs on a single channel");
  cmd_cor->add_option("--accidentals", cor.accidentals, "Also write the offset-window accidental estimate");
  cmd_cor->add_option("--offset-ps", cor.offset_ps, "Delay offset for the accidental estimate");
  cmd_cor->add_option("-o,--out", cor.out, "Output .csv or .json, - for stdout")->required();

  SpectrumArgs spe;
  auto* cmd_spe = app.add_subcommand("spectrum", "Per-channel counts with optional dark subtraction");
  cmd_spe->add_option("input", spe.in, "Time-tag file, - for stdin")->required();
  cmd_spe->add_option("--dark", spe.dark, "Dark reference: time-tag file or spectrum .json");
  cmd_spe->add_option("--duration", spe.duration, "Exposure in s (default: from the stream)");
  cmd_spe->add_option("--channels", spe.channels, "Number of channels");
  cmd_spe->add_option("-o,--out", spe.out, "Output .csv or .json, - for stdout")->required();

  TauArgs tau;
  auto* cmd_tau = app.add_subcommand("tau-hist", "Histogram of t(chB) - t(chA)");
  cmd_tau->add_option("input", tau.in, "Time-tag file, - for stdin")->required();
  cmd_tau->add_option("--ch-a", tau.ch_a, "Reference channel")->required();
  cmd_tau->add_option("--ch-b", tau.ch_b, "Delayed channel")->required();
  cmd_tau->add_option("--range-ps", tau.range, "LO:HI in ps");
  cmd_tau->add_option("--bin-ps", tau.bin_ps, "Bin width in ps (>= one tick)");
  cmd_tau->add_option("-o,--out", tau.out, "Output .csv or .json, - for stdout")->required();

  SaturateArgs sat;
  auto* cmd_sat = app.add_subcommand("saturate", "Detected vs impinging rate for one pixel");
  cmd_sat->add_option("--config", sat.config, "Master JSON config (detector section)");
  cmd_sat->add_option("--rates", sat.rates, "Comma-separated true rates in Hz");
  cmd_sat->add_option("--duration", sat.duration, "Exposure per rate in s");
  cmd_sat->add_option("--seed", sat.seed, "RNG seed");
  cmd_sat->add_option("-o,--out", sat.out, "Output CSV, - for stdout")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    if (*cmd_sim) return run_simulate(sim);
    if (*cmd_cor) return run_correlate(cor);
    if (*cmd_spe) return run_spectrum(spe);
    if (*cmd_tau) return run_tau(tau);
    if (*cmd_sat) return run_saturate(sat);
  } catch (const mpspec::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
