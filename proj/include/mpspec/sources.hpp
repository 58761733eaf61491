#pragma once

// Ground-truth photon streams for the two validation sources: a
// temperature-tuned SPDC pair source and an attenuated femtosecond pulse train.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mpspec/error.hpp"

namespace mpspec {

inline constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2*sqrt(2 ln 2)
inline constexpr double kPsPerSecond = 1.0e12;

enum class PhotonRole : std::uint8_t { first, second, pulse };

struct PhotonArrival {
  double time_ps;
  double wavelength_nm;
  PhotonRole role;
  std::uint64_t index;  // pair index for SPDC, pulse index for the laser

  friend bool operator==(const PhotonArrival&, const PhotonArrival&) = default;
};

struct TemperatureAnchor {
  double celsius;
  double wavelength_nm;
};

struct SpdcConfig {
  double temperature = 59.0;        // C
  double pair_rate = 300.0;         // pairs/s at the fiber
  double relative_delay = 150000.0; // ps
  double linewidth_fwhm = 0.5;      // nm
  std::vector<TemperatureAnchor> anchors_first{{50, 802.0}, {59, 809.6}, {65, 813.0}};
  std::vector<TemperatureAnchor> anchors_second{{50, 814.0}, {59, 809.6}, {65, 803.0}};

  static constexpr double kMinTemperature = 40.0;
  static constexpr double kMaxTemperature = 70.0;

  void validate() const {
    if (!(temperature >= kMinTemperature && temperature <= kMaxTemperature))
      throw ConfigError("spdc: temperature_c must be within [40, 70]");
    if (!(pair_rate > 0)) throw ConfigError("spdc: pair_rate_hz must be > 0");
    if (!(relative_delay > 0)) throw ConfigError("spdc: delay_ps must be > 0");
    if (!(linewidth_fwhm >= 0)) throw ConfigError("spdc: linewidth_fwhm_nm must be >= 0");
    for (const auto* set : {&anchors_first, &anchors_second}) {
      if (set->size() < 2) throw ConfigError("spdc: at least 2 temperature anchors required");
      for (std::size_t i = 1; i < set->size(); ++i)
        if (!((*set)[i].celsius > (*set)[i - 1].celsius))
          throw ConfigError("spdc: temperature anchors must be strictly increasing");
    }
  }
};

struct PulsedConfig {
  double repetition_rate = 8.0e7;      // Hz
  double pulse_duration_fwhm = 67.0;   // fs
  double center_wavelength = 810.0;    // nm
  double mean_photons_per_pulse = 0.02;
  double spectral_fwhm = 14.4;         // nm, transform limit of 67 fs at 810 nm

  double period_ps() const { return kPsPerSecond / repetition_rate; }

  void validate() const {
    if (!(repetition_rate > 0)) throw ConfigError("pulsed: rep_rate_hz must be > 0");
    if (!(pulse_duration_fwhm >= 0)) throw ConfigError("pulsed: pulse_fs must be >= 0");
    if (!(center_wavelength > 0)) throw ConfigError("pulsed: center_nm must be > 0");
    if (!(mean_photons_per_pulse >= 0)) throw ConfigError("pulsed: mu must be >= 0");
    if (!(spectral_fwhm > 0)) throw ConfigError("pulsed: spectral_fwhm_nm must be > 0");
  }
};

namespace detail {

inline double interpolate_anchors(const std::vector<TemperatureAnchor>& a, double t) {
  // Segment containing t, or the nearest end segment for extrapolation.
  std::size_t hi = 1;
  while (hi + 1 < a.size() && t > a[hi].celsius) ++hi;
  const auto& p = a[hi - 1];
  const auto& q = a[hi];
  return p.wavelength_nm + (t - p.celsius) * (q.wavelength_nm - p.wavelength_nm) /
                               (q.celsius - p.celsius);
}

inline void check_duration(double duration_s) {
  if (!(duration_s > 0) || !std::isfinite(duration_s))
    throw ConfigError("duration must be a positive number of seconds");
}

}  // namespace detail

// Center wavelengths (first, second) of the pair at temperature t.
inline std::pair<double, double> spdc_centers(const SpdcConfig& cfg, double t) {
  if (!(t >= SpdcConfig::kMinTemperature && t <= SpdcConfig::kMaxTemperature))
    throw DomainError("spdc_centers: temperature " + std::to_string(t) +
                      " C outside tuning range [40, 70]");
  return {detail::interpolate_anchors(cfg.anchors_first, t),
          detail::interpolate_anchors(cfg.anchors_second, t)};
}

// Pair creation times form a Poisson process; each pair shares one spectral
// detuning with opposite signs on its two photons. Pair times are kept on a
// 1 ps grid and detunings on a 2^-20 nm grid so that the delay and the
// anti-correlation hold exactly in floating point.
inline std::vector<PhotonArrival> generate_spdc(const SpdcConfig& cfg, double duration_s,
                                                std::uint64_t seed) {
  cfg.validate();
  detail::check_duration(duration_s);
  const auto [center1, center2] = spdc_centers(cfg, cfg.temperature);
  const double duration_ps = duration_s * kPsPerSecond;
  const double sigma = cfg.linewidth_fwhm / kFwhmPerSigma;
  constexpr double kDetuningGrid = 1.0 / (1 << 20);

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(cfg.pair_rate / kPsPerSecond);
  std::normal_distribution<double> detuning(0.0, 1.0);

  std::vector<PhotonArrival> out;
  out.reserve(static_cast<std::size_t>(2.2 * cfg.pair_rate * duration_s) + 16);
  double t = 0.0;
  std::uint64_t pair = 0;
  for (;;) {
    t += gap(rng);
    if (t >= duration_ps) break;
    const double created = std::round(t);
    double delta = 0.0;
    if (sigma > 0) delta = std::round(sigma * detuning(rng) / kDetuningGrid) * kDetuningGrid;
    out.push_back({created, center1 + delta, PhotonRole::first, pair});
    out.push_back({created + cfg.relative_delay, center2 - delta, PhotonRole::second, pair});
    ++pair;
  }
  std::sort(out.begin(), out.end(), [](const PhotonArrival& a, const PhotonArrival& b) {
    if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
    if (a.index != b.index) return a.index < b.index;
    return a.role < b.role;
  });
  return out;
}

// Lazily generated pulse-train photons, in time order. Empty pulses are
// skipped with a geometric draw so the cost scales with the photon count,
// not with the number of pulses.
class PulsedPhotonStream {
 public:
  PulsedPhotonStream(const PulsedConfig& cfg, double duration_s, std::uint64_t seed)
      : cfg_(cfg), rng_(seed) {
    cfg_.validate();
    detail::check_duration(duration_s);
    period_ps_ = cfg_.period_ps();
    duration_ps_ = duration_s * kPsPerSecond;
    const double mu = cfg_.mean_photons_per_pulse;
    p_nonempty_ = -std::expm1(-mu);
    envelope_sigma_ps_ = cfg_.pulse_duration_fwhm * 1.0e-3 / kFwhmPerSigma;
    spectral_sigma_nm_ = cfg_.spectral_fwhm / kFwhmPerSigma;
    exhausted_ = !(mu > 0);
  }

  // Next photon, or false at end of stream.
  bool next(PhotonArrival& out) {
    while (cursor_ == pending_.size()) {
      if (exhausted_ || !refill()) return false;
    }
    out = pending_[cursor_++];
    ++emitted_;
    return true;
  }

  std::uint64_t emitted() const { return emitted_; }

  std::vector<PhotonArrival> collect() {
    std::vector<PhotonArrival> all;
    PhotonArrival p;
    while (next(p)) all.push_back(p);
    return all;
  }

  class iterator {
   public:
    using value_type = PhotonArrival;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    explicit iterator(PulsedPhotonStream* s) : stream_(s) { ++*this; }

    const PhotonArrival& operator*() const { return current_; }
    const PhotonArrival* operator->() const { return &current_; }
    iterator& operator++() {
      if (stream_ && !stream_->next(current_)) stream_ = nullptr;
      return *this;
    }
    void operator++(int) { ++*this; }
    friend bool operator==(const iterator& it, std::default_sentinel_t) {
      return it.stream_ == nullptr;
    }

   private:
    PulsedPhotonStream* stream_ = nullptr;
    PhotonArrival current_{};
  };

  iterator begin() { return iterator(this); }
  std::default_sentinel_t end() { return {}; }

 private:
  bool refill() {
    pending_.clear();
    cursor_ = 0;
    std::uint64_t k = next_pulse_;
    if (p_nonempty_ < 1.0) k += std::geometric_distribution<std::uint64_t>(p_nonempty_)(rng_);
    const double pulse_time = static_cast<double>(k) * period_ps_;
    if (pulse_time >= duration_ps_) {
      exhausted_ = true;
      return false;
    }
    next_pulse_ = k + 1;

    const std::uint64_t n = draw_nonzero_count();
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::uint64_t i = 0; i < n; ++i) {
      const double t = std::max(0.0, pulse_time + envelope_sigma_ps_ * unit(rng_));
      double lambda;
      do {
        lambda = cfg_.center_wavelength + spectral_sigma_nm_ * unit(rng_);
      } while (!(lambda > 0));
      pending_.push_back({t, lambda, PhotonRole::pulse, k});
    }
    std::sort(pending_.begin(), pending_.end(),
              [](const PhotonArrival& a, const PhotonArrival& b) { return a.time_ps < b.time_ps; });
    return true;
  }

  // Poisson(mu) conditioned on being >= 1, by inverse CDF.
  std::uint64_t draw_nonzero_count() {
    const double mu = cfg_.mean_photons_per_pulse;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u = uni(rng_) * p_nonempty_;
    double term = std::exp(-mu) * mu;  // P(N = 1)
    std::uint64_t n = 1;
    while (u > term && n < 1000) {
      u -= term;
      ++n;
      term *= mu / static_cast<double>(n);
    }
    return n;
  }

  PulsedConfig cfg_;
  std::mt19937_64 rng_;
  double period_ps_ = 0;
  double duration_ps_ = 0;
  double p_nonempty_ = 0;
  double envelope_sigma_ps_ = 0;
  double spectral_sigma_nm_ = 0;
  std::uint64_t next_pulse_ = 0;
  bool exhausted_ = false;
  std::vector<PhotonArrival> pending_;
  std::size_t cursor_ = 0;
  std::uint64_t emitted_ = 0;
};

inline PulsedPhotonStream generate_pulsed(const PulsedConfig& cfg, double duration_s,
                                          std::uint64_t seed) {
  return PulsedPhotonStream(cfg, duration_s, seed);
}

}  // namespace mpspec
