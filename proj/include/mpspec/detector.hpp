#pragma once

// SPAD-array response: optics transmission, detection efficiency, pixel
// mapping, timing jitter, non-paralyzable hold-off, dark counts,
// afterpulsing and nearest-neighbour crosstalk.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <ranges>
#include <string>
#include <vector>

#include "mpspec/error.hpp"
#include "mpspec/sources.hpp"
#include "mpspec/spectral_map.hpp"

namespace mpspec {

struct PdeAnchor {
  double wavelength_nm;
  double efficiency;
};

struct DetectorConfig {
  std::size_t physical_pixels = 32;
  std::vector<PdeAnchor> pde_anchors{{450.0, 0.50}, {810.0, 0.05}};
  double optics_transmission = 0.5;
  double jitter_fwhm = 110.0;        // ps
  double holdoff = 140000.0;         // ps
  double dark_rate_per_pixel = 100.0;  // counts/s
  double afterpulse_hazard = 1.0e-6;   // probability per ns
  double afterpulse_window = 1000.0;   // ns, starts at hold-off expiry
  double crosstalk_prob = 1.0e-3;      // per neighbour
  double crosstalk_window = 1.5;       // ns

  static constexpr double kDetectableMin = 300.0;
  static constexpr double kDetectableMax = 900.0;

  void validate() const {
    auto prob = [](double p, const char* key) {
      if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError(std::string("detector: ") + key + " must be within [0, 1]");
    };
    if (physical_pixels < 1 || physical_pixels > 255)
      throw ConfigError("detector: pixel_count must be within [1, 255]");
    if (pde_anchors.empty()) throw ConfigError("detector: pde_anchors must not be empty");
    for (std::size_t i = 0; i < pde_anchors.size(); ++i) {
      prob(pde_anchors[i].efficiency, "pde_anchors efficiency");
      if (i > 0 && !(pde_anchors[i].wavelength_nm > pde_anchors[i - 1].wavelength_nm))
        throw ConfigError("detector: pde_anchors must be sorted by wavelength");
    }
    prob(optics_transmission, "t_optics");
    prob(crosstalk_prob, "ct_prob");
    if (!(afterpulse_hazard >= 0.0 && afterpulse_hazard <= 1.0))
      throw ConfigError("detector: ap_hazard_per_ns must be within [0, 1]");
    if (!(jitter_fwhm >= 0)) throw ConfigError("detector: jitter_fwhm_ps must be >= 0");
    if (!(holdoff > 0)) throw ConfigError("detector: holdoff_ps must be > 0");
    if (!(dark_rate_per_pixel >= 0)) throw ConfigError("detector: dark_cps must be >= 0");
    if (!(afterpulse_window > 0)) throw ConfigError("detector: ap_window_ns must be > 0");
    if (!(crosstalk_window > 0)) throw ConfigError("detector: ct_window_ns must be > 0");
  }

  DetectorConfig& without_noise() {
    dark_rate_per_pixel = 0;
    afterpulse_hazard = 0;
    crosstalk_prob = 0;
    return *this;
  }
};

enum class AvalancheCause : std::uint8_t { photon, dark, afterpulse, crosstalk };

inline const char* to_string(AvalancheCause c) {
  switch (c) {
    case AvalancheCause::photon: return "photon";
    case AvalancheCause::dark: return "dark";
    case AvalancheCause::afterpulse: return "afterpulse";
    case AvalancheCause::crosstalk: return "crosstalk";
  }
  return "?";
}

struct AvalancheEvent {
  double time_ps;
  std::uint32_t pixel;
  AvalancheCause cause;

  friend bool operator==(const AvalancheEvent&, const AvalancheEvent&) = default;
};

// Piecewise-linear PDE, clamped outside the anchor span, zero outside the
// SPAD's detectable range.
inline double pde(const DetectorConfig& cfg, double lambda_nm) {
  if (!(lambda_nm >= DetectorConfig::kDetectableMin && lambda_nm <= DetectorConfig::kDetectableMax))
    return 0.0;
  const auto& a = cfg.pde_anchors;
  if (a.empty()) return 0.0;
  if (lambda_nm <= a.front().wavelength_nm) return a.front().efficiency;
  if (lambda_nm >= a.back().wavelength_nm) return a.back().efficiency;
  auto hi = std::upper_bound(a.begin(), a.end(), lambda_nm,
                             [](double v, const PdeAnchor& p) { return v < p.wavelength_nm; });
  auto lo = hi - 1;
  if (lambda_nm == lo->wavelength_nm) return lo->efficiency;
  const double f = (lambda_nm - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
  return lo->efficiency + f * (hi->efficiency - lo->efficiency);
}

// Optics transmission times PDE; zero outside the map's detectable range.
inline double single_photon_efficiency(const DetectorConfig& cfg, const PixelMap& map,
                                       double lambda_nm) {
  if (!map.detectable(lambda_nm)) return 0.0;
  return cfg.optics_transmission * pde(cfg, lambda_nm);
}

inline double expected_pair_efficiency(const DetectorConfig& cfg, const PixelMap& map,
                                       double lambda1_nm, double lambda2_nm) {
  return single_photon_efficiency(cfg, map, lambda1_nm) *
         single_photon_efficiency(cfg, map, lambda2_nm);
}

namespace detail {

// Independent engines per stage so that, e.g., enabling dark counts does not
// perturb which photons are detected.
inline std::mt19937_64 stage_engine(std::uint64_t seed, std::uint32_t stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stage};
  return std::mt19937_64(seq);
}

struct Candidate {
  double time_ps;
  std::uint32_t pixel;
  AvalancheCause cause;
  std::uint64_t seq;  // insertion order; final tie-break

  bool operator>(const Candidate& o) const {
    if (time_ps != o.time_ps) return time_ps > o.time_ps;
    if (pixel != o.pixel) return pixel > o.pixel;
    if (cause != o.cause) return cause > o.cause;
    return seq > o.seq;
  }
};

}  // namespace detail

// Full array response. photons must be sorted by time; any input range of
// PhotonArrival works, including the lazy pulse-train stream.
template <std::ranges::input_range Photons>
std::vector<AvalancheEvent> detect(Photons&& photons, const DetectorConfig& cfg, const PixelMap& map,
                                   double duration_s, std::uint64_t seed) {
  cfg.validate();
  map.validate();
  if (!(duration_s > 0)) throw ConfigError("detect: duration must be > 0");
  using detail::Candidate;

  auto photon_rng = detail::stage_engine(seed, 1);
  auto dark_rng = detail::stage_engine(seed, 2);
  auto spawn_rng = detail::stage_engine(seed, 3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double jitter_sigma = cfg.jitter_fwhm / kFwhmPerSigma;

  std::vector<Candidate> primary;
  std::uint64_t seq = 0;
  double last_time = -INFINITY;
  for (const PhotonArrival& p : photons) {
    if (p.time_ps < last_time)
      throw ContractViolation("detect: photon stream is not sorted by time");
    last_time = p.time_ps;
    if (!(uni(photon_rng) < cfg.optics_transmission)) continue;
    if (!(uni(photon_rng) < pde(cfg, p.wavelength_nm))) continue;
    const auto pixel = wavelength_to_pixel(map, p.wavelength_nm);
    if (!pixel) continue;
    double t = p.time_ps;
    if (jitter_sigma > 0) t = std::max(0.0, t + jitter_sigma * unit(photon_rng));
    primary.push_back({t, static_cast<std::uint32_t>(*pixel), AvalancheCause::photon, seq++});
  }

  const double duration_ps = duration_s * kPsPerSecond;
  if (cfg.dark_rate_per_pixel > 0) {
    std::exponential_distribution<double> gap(cfg.dark_rate_per_pixel / kPsPerSecond);
    for (std::uint32_t px = 0; px < map.pixel_count; ++px) {
      for (double t = gap(dark_rng); t < duration_ps; t += gap(dark_rng))
        primary.push_back({t, px, AvalancheCause::dark, seq++});
    }
  }
  std::sort(primary.begin(), primary.end(),
            [](const Candidate& a, const Candidate& b) { return b > a; });

  // Afterpulse: at most one (the first trap release) per avalanche, with
  // constant hazard over the window that opens when hold-off expires.
  const double hazard_per_ps = cfg.afterpulse_hazard / 1000.0;
  const double p_afterpulse = -std::expm1(-cfg.afterpulse_hazard * cfg.afterpulse_window);
  const double ct_window_ps = cfg.crosstalk_window * 1000.0;

  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> spawned;
  std::vector<std::optional<double>> last_accepted(map.pixel_count);
  std::vector<AvalancheEvent> out;
  out.reserve(primary.size());

  std::size_t next_primary = 0;
  while (next_primary < primary.size() || !spawned.empty()) {
    Candidate c;
    if (spawned.empty() || (next_primary < primary.size() && spawned.top() > primary[next_primary])) {
      c = primary[next_primary++];
    } else {
      c = spawned.top();
      spawned.pop();
    }
    auto& last = last_accepted[c.pixel];
    if (last && c.time_ps - *last < cfg.holdoff) continue;
    last = c.time_ps;
    out.push_back({c.time_ps, c.pixel, c.cause});

    if (p_afterpulse > 0) {
      const double u = uni(spawn_rng);
      if (u < p_afterpulse) {
        const double delay = -std::log1p(-u) / hazard_per_ps;
        spawned.push({c.time_ps + cfg.holdoff + delay, c.pixel, AvalancheCause::afterpulse, seq++});
      }
    }
    if (cfg.crosstalk_prob > 0) {
      for (int side : {-1, 1}) {
        const std::int64_t nb = static_cast<std::int64_t>(c.pixel) + side;
        if (nb < 0 || nb >= static_cast<std::int64_t>(map.pixel_count)) continue;
        if (uni(spawn_rng) < cfg.crosstalk_prob) {
          const double offset = ct_window_ps * (1.0 - uni(spawn_rng));
          spawned.push({c.time_ps + offset, static_cast<std::uint32_t>(nb),
                        AvalancheCause::crosstalk, seq++});
        }
      }
    }
  }
  return out;
}

// Accepted count for a single pixel fed by Poisson arrivals of the given
// rate, under non-paralyzable hold-off.
template <class Rng>
std::uint64_t count_nonparalyzable(double rate_hz, double holdoff_ps, double duration_s, Rng& rng) {
  if (!(rate_hz > 0)) throw ContractViolation("count_nonparalyzable: rate must be > 0");
  std::exponential_distribution<double> gap(rate_hz / kPsPerSecond);
  const double duration_ps = duration_s * kPsPerSecond;
  std::uint64_t accepted = 0;
  double free_at = 0.0;
  for (double t = gap(rng); t < duration_ps; t += gap(rng)) {
    if (t >= free_at) {
      ++accepted;
      free_at = t + holdoff_ps;
    }
  }
  return accepted;
}

}  // namespace mpspec
