#pragma once

// Offline analysis of sorted time-tag streams: delayed-coincidence search,
// time-difference histograms, joint channel histograms, spectra with dark
// subtraction, accidental estimation and saturation sweeps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mpspec/detector.hpp"
#include "mpspec/error.hpp"
#include "mpspec/tagio.hpp"

namespace mpspec {

struct CoincidenceSpec {
  double delay_ps = 150000.0;
  double window_ps = 500.0;
  bool allow_same_channel = true;
};

// Inclusive tick-difference range [lo, hi] selected by a CoincidenceSpec.
struct TickWindow {
  std::uint64_t lo;
  std::uint64_t hi;
};

namespace detail {

inline double round_half_up(double x) { return std::floor(x + 0.5); }

inline std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  return a > std::numeric_limits<std::uint64_t>::max() - b ? std::numeric_limits<std::uint64_t>::max()
                                                           : a + b;
}

inline void require_sorted(std::span<const TimeTag> tags, const char* who) {
  for (std::size_t i = 1; i < tags.size(); ++i)
    if (tags[i].ticks < tags[i - 1].ticks)
      throw ContractViolation(std::string(who) + ": tags not sorted by ticks at record " +
                              std::to_string(i));
}

}  // namespace detail

// Window edges delay -/+ window/2 are rounded half-up to ticks. The lower edge
// is at least one tick so the second member of a pair is strictly later.
inline TickWindow quantize_window(const CoincidenceSpec& spec, std::uint32_t tick_ps) {
  if (tick_ps == 0) throw ConfigError("coincidence: tick must be > 0 ps");
  if (!(spec.window_ps > 0)) throw ConfigError("coincidence: window must be > 0 ps");
  if (!(spec.delay_ps >= 0)) throw ConfigError("coincidence: delay must be >= 0 ps");
  const double tick = tick_ps;
  if (detail::round_half_up(spec.window_ps / tick) < 1)
    throw ConfigError("coincidence: window " + std::to_string(spec.window_ps) +
                      " ps is shorter than one tick");
  const double lo = detail::round_half_up((spec.delay_ps - spec.window_ps / 2.0) / tick);
  const double hi = detail::round_half_up((spec.delay_ps + spec.window_ps / 2.0) / tick);
  TickWindow w{static_cast<std::uint64_t>(std::max(1.0, lo)), static_cast<std::uint64_t>(std::max(0.0, hi))};
  if (w.hi < w.lo) throw ConfigError("coincidence: window collapses below one tick after the delay");
  return w;
}

namespace detail {

// Visits every pair whose first member index lies in [begin, end). The second
// member is searched over the whole stream, so partitions can be processed
// independently.
template <class Fn>
void sweep_coincidences(std::span<const TimeTag> tags, TickWindow w, bool allow_same_channel,
                        std::size_t begin, std::size_t end, Fn&& fn) {
  const std::size_t n = tags.size();
  if (begin >= end) return;
  auto first_at_or_after = [&](std::uint64_t t) {
    return static_cast<std::size_t>(
        std::lower_bound(tags.begin(), tags.end(), t,
                         [](const TimeTag& a, std::uint64_t v) { return a.ticks < v; }) -
        tags.begin());
  };
  std::size_t j = first_at_or_after(saturating_add(tags[begin].ticks, w.lo));
  std::size_t k = j;
  for (std::size_t i = begin; i < end; ++i) {
    const TimeTag& a = tags[i];
    const std::uint64_t lo = saturating_add(a.ticks, w.lo);
    const std::uint64_t hi = saturating_add(a.ticks, w.hi);
    while (j < n && tags[j].ticks < lo) ++j;
    if (k < j) k = j;
    while (k < n && tags[k].ticks <= hi) ++k;
    for (std::size_t m = j; m < k; ++m) {
      if (!allow_same_channel && tags[m].channel == a.channel) continue;
      fn(a, tags[m]);
    }
  }
}

}  // namespace detail

// Calls fn(first, second) for every ordered pair in the window. O(n + pairs).
template <class Fn>
void for_each_coincidence(std::span<const TimeTag> tags, const CoincidenceSpec& spec,
                          std::uint32_t tick_ps, Fn&& fn) {
  const TickWindow w = quantize_window(spec, tick_ps);
  detail::require_sorted(tags, "find_coincidences");
  detail::sweep_coincidences(tags, w, spec.allow_same_channel, 0, tags.size(), fn);
}

struct CoincidencePair {
  TimeTag first;
  TimeTag second;

  friend bool operator==(const CoincidencePair&, const CoincidencePair&) = default;
};

inline std::vector<CoincidencePair> find_coincidences(std::span<const TimeTag> tags,
                                                      const CoincidenceSpec& spec,
                                                      std::uint32_t tick_ps = kDefaultTickPs) {
  std::vector<CoincidencePair> out;
  for_each_coincidence(tags, spec, tick_ps,
                       [&](const TimeTag& a, const TimeTag& b) { out.push_back({a, b}); });
  return out;
}

struct Histogram1D {
  std::string axis;           // "channel" or "delta_t_ps"
  std::vector<double> edges;  // counts.size() + 1 entries
  std::vector<std::uint64_t> counts;
  double exposure_s = 0;

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
};

struct Histogram2D {
  std::size_t rows = 0;  // first-photon channel
  std::size_t cols = 0;  // second-photon channel
  std::vector<std::uint64_t> counts;
  std::uint64_t overflow = 0;  // pairs with a channel outside the table
  double exposure_s = 0;

  Histogram2D() = default;
  Histogram2D(std::size_t r, std::size_t c) : rows(r), cols(c), counts(r * c, 0) {}

  std::uint64_t& at(std::size_t i, std::size_t j) { return counts[i * cols + j]; }
  std::uint64_t at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }

  void add(std::size_t i, std::size_t j) {
    if (i < rows && j < cols)
      ++at(i, j);
    else
      ++overflow;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  std::vector<std::uint64_t> row_sums() const {
    std::vector<std::uint64_t> s(rows, 0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) s[i] += at(i, j);
    return s;
  }
  std::vector<std::uint64_t> col_sums() const {
    std::vector<std::uint64_t> s(cols, 0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) s[j] += at(i, j);
    return s;
  }
  std::pair<std::size_t, std::size_t> argmax() const {
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k)
      if (counts[k] > counts[best]) best = k;
    return {best / cols, best % cols};
  }

  Histogram2D& operator+=(const Histogram2D& o) {
    if (o.rows != rows || o.cols != cols) throw ContractViolation("Histogram2D: shape mismatch in merge");
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += o.counts[k];
    overflow += o.overflow;
    return *this;
  }
  friend bool operator==(const Histogram2D&, const Histogram2D&) = default;
};

inline Histogram2D joint_spectrum(std::span<const CoincidencePair> pairs, std::size_t channels = 16) {
  Histogram2D h(channels, channels);
  for (const auto& p : pairs) h.add(p.first.channel, p.second.channel);
  return h;
}

// Joint histogram straight from the tag stream, without materializing pairs.
// With threads > 1 the first-member index range is split into contiguous
// time partitions whose partial histograms are summed; the result is
// identical to the single-threaded one.
inline Histogram2D correlate(std::span<const TimeTag> tags, const CoincidenceSpec& spec,
                             std::uint32_t tick_ps = kDefaultTickPs, std::size_t channels = 16,
                             std::size_t threads = 1) {
  const TickWindow w = quantize_window(spec, tick_ps);
  detail::require_sorted(tags, "correlate");
  threads = std::max<std::size_t>(1, std::min(threads, std::max<std::size_t>(1, tags.size())));
  std::vector<Histogram2D> parts(threads, Histogram2D(channels, channels));
  auto run = [&](std::size_t p) {
    const std::size_t begin = tags.size() * p / threads;
    const std::size_t end = tags.size() * (p + 1) / threads;
    Histogram2D& h = parts[p];
    detail::sweep_coincidences(tags, w, spec.allow_same_channel, begin, end,
                               [&h](const TimeTag& a, const TimeTag& b) { h.add(a.channel, b.channel); });
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t p = 0; p < threads; ++p) pool.emplace_back(run, p);
  }
  Histogram2D out(channels, channels);
  for (const auto& h : parts) out += h;
  return out;
}

// Histogram of t(chB) - t(chA) over [range_lo, range_hi] ps.
inline Histogram1D tau_histogram(std::span<const TimeTag> tags, std::uint8_t ch_a, std::uint8_t ch_b,
                                 double range_lo_ps, double range_hi_ps, double bin_ps,
                                 std::uint32_t tick_ps = kDefaultTickPs) {
  if (tick_ps == 0) throw ConfigError("tau_histogram: tick must be > 0 ps");
  if (!(bin_ps >= tick_ps))
    throw ConfigError("tau_histogram: bin " + std::to_string(bin_ps) + " ps is smaller than one tick (" +
                      std::to_string(tick_ps) + " ps)");
  if (!(range_hi_ps > range_lo_ps)) throw ConfigError("tau_histogram: range must satisfy lo < hi");
  detail::require_sorted(tags, "tau_histogram");

  const auto nbins = static_cast<std::size_t>(std::ceil((range_hi_ps - range_lo_ps) / bin_ps));
  Histogram1D h;
  h.axis = "delta_t_ps";
  h.counts.assign(nbins, 0);
  for (std::size_t k = 0; k <= nbins; ++k) h.edges.push_back(range_lo_ps + static_cast<double>(k) * bin_ps);

  std::vector<std::int64_t> a_ticks, b_ticks;
  for (const auto& t : tags) {
    if (t.channel == ch_a) a_ticks.push_back(static_cast<std::int64_t>(t.ticks));
    if (t.channel == ch_b) b_ticks.push_back(static_cast<std::int64_t>(t.ticks));
  }
  const double tick = tick_ps;
  const bool same = ch_a == ch_b;
  std::size_t start = 0;
  for (std::size_t ia = 0; ia < a_ticks.size(); ++ia) {
    const std::int64_t a = a_ticks[ia];
    while (start < b_ticks.size() && static_cast<double>(b_ticks[start] - a) * tick < range_lo_ps) ++start;
    for (std::size_t ib = start; ib < b_ticks.size(); ++ib) {
      const double dt = static_cast<double>(b_ticks[ib] - a) * tick;
      if (dt > range_hi_ps) break;
      if (same && ib == ia) continue;
      auto bin = static_cast<std::size_t>(std::floor((dt - range_lo_ps) / bin_ps));
      if (bin >= nbins) bin = nbins - 1;
      ++h.counts[bin];
    }
  }
  return h;
}

// Per-channel counts; with a dark reference, dark counts scaled by the
// exposure ratio are subtracted and the result clamped at zero.
inline Histogram1D spectrum(std::span<const TimeTag> tags, double exposure_s, std::size_t channels = 16,
                            const Histogram1D* dark = nullptr) {
  if (!(exposure_s > 0)) throw ConfigError("spectrum: exposure must be > 0 s");
  Histogram1D h;
  h.axis = "channel";
  h.exposure_s = exposure_s;
  h.counts.assign(channels, 0);
  for (std::size_t k = 0; k <= channels; ++k) h.edges.push_back(static_cast<double>(k));
  for (const auto& t : tags)
    if (t.channel < channels) ++h.counts[t.channel];
  if (dark) {
    if (!(dark->exposure_s > 0)) throw ConfigError("spectrum: dark reference has zero exposure");
    if (dark->counts.size() != channels)
      throw ConfigError("spectrum: dark reference has " + std::to_string(dark->counts.size()) +
                        " channels, expected " + std::to_string(channels));
    const double ratio = exposure_s / dark->exposure_s;
    for (std::size_t k = 0; k < channels; ++k) {
      const double v = static_cast<double>(h.counts[k]) - ratio * static_cast<double>(dark->counts[k]);
      h.counts[k] = v > 0 ? static_cast<std::uint64_t>(std::llround(v)) : 0;
    }
  }
  return h;
}

inline constexpr double kDefaultAccidentalOffsetPs = 25000.0;

// Joint histogram at delay + offset, where no physical correlation is expected.
inline Histogram2D estimate_accidentals(std::span<const TimeTag> tags, const CoincidenceSpec& spec,
                                        double offset_ps = kDefaultAccidentalOffsetPs,
                                        std::uint32_t tick_ps = kDefaultTickPs, std::size_t channels = 16) {
  if (!(std::abs(offset_ps) > spec.window_ps))
    throw ConfigError("estimate_accidentals: offset window overlaps the signal window");
  CoincidenceSpec shifted = spec;
  shifted.delay_ps = spec.delay_ps + offset_ps;
  if (!(shifted.delay_ps >= 0)) throw ConfigError("estimate_accidentals: offset delay is negative");
  return correlate(tags, shifted, tick_ps, channels);
}

struct SaturationPoint {
  double true_rate_hz;
  double detected_rate_hz;
};

// Single pixel, Poisson arrivals, non-paralyzable hold-off from cfg.
inline std::vector<SaturationPoint> saturation_curve(std::span<const double> rates, const DetectorConfig& cfg,
                                                     double exposure_s, std::uint64_t seed) {
  if (!(exposure_s > 0)) throw ConfigError("saturation_curve: exposure must be > 0 s");
  std::vector<SaturationPoint> out;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] > 0)) throw ContractViolation("saturation_curve: rates must be > 0 Hz");
    auto rng = detail::stage_engine(seed, 100 + static_cast<std::uint32_t>(i));
    const auto n = count_nonparalyzable(rates[i], cfg.holdoff, exposure_s, rng);
    out.push_back({rates[i], static_cast<double>(n) / exposure_s});
  }
  return out;
}

}  // namespace mpspec
