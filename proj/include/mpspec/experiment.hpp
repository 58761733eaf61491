#pragma once

// End-to-end recipe: source -> detector -> quantized time tags.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mpspec/config.hpp"
#include "mpspec/detector.hpp"
#include "mpspec/error.hpp"
#include "mpspec/sources.hpp"
#include "mpspec/tagio.hpp"

namespace mpspec {

enum class SourceKind { spdc, pulsed, none };

inline SourceKind parse_source(const std::string& s) {
  if (s == "spdc") return SourceKind::spdc;
  if (s == "pulsed") return SourceKind::pulsed;
  if (s == "none" || s == "dark") return SourceKind::none;
  throw ConfigError("source: expected spdc, pulsed or none, got \"" + s + "\"");
}

struct SimulationResult {
  StreamHeader header;
  std::vector<AvalancheEvent> events;
  std::vector<TimeTag> tags;
  std::uint64_t photons_at_fiber = 0;
};

// Runs the full pipeline. The source seed and the detector seed are derived
// from one user seed.
inline SimulationResult simulate(const MasterConfig& cfg, SourceKind source, double duration_s,
                                 std::uint64_t seed) {
  cfg.validate();
  if (!(duration_s > 0) || !std::isfinite(duration_s))
    throw ConfigError("duration must be a positive number of seconds");
  const std::uint64_t source_seed = seed * 2 + 0;
  const std::uint64_t detector_seed = seed * 2 + 1;

  SimulationResult r;
  r.header.channel_count = static_cast<std::uint8_t>(cfg.detector.physical_pixels);
  r.header.tick_ps = kDefaultTickPs;
  switch (source) {
    case SourceKind::spdc: {
      auto photons = generate_spdc(cfg.spdc, duration_s, source_seed);
      r.photons_at_fiber = photons.size();
      r.events = detect(photons, cfg.detector, cfg.pixel_map, duration_s, detector_seed);
      break;
    }
    case SourceKind::pulsed: {
      auto stream = generate_pulsed(cfg.pulsed, duration_s, source_seed);
      r.events = detect(stream, cfg.detector, cfg.pixel_map, duration_s, detector_seed);
      r.photons_at_fiber = stream.emitted();
      break;
    }
    case SourceKind::none: {
      std::vector<PhotonArrival> none;
      r.events = detect(none, cfg.detector, cfg.pixel_map, duration_s, detector_seed);
      break;
    }
  }
  r.tags = to_time_tags(r.events, r.header.tick_ps);
  r.header.record_count = r.tags.size();
  return r;
}

}  // namespace mpspec
