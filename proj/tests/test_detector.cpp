#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "mpspec/detector.hpp"
#include "support/oracles.hpp"

using namespace mpspec;

namespace {

DetectorConfig ideal_detector() {
  DetectorConfig cfg;
  cfg.without_noise();
  cfg.pde_anchors = {{300.0, 1.0}, {900.0, 1.0}};
  cfg.optics_transmission = 1.0;
  cfg.jitter_fwhm = 0;
  return cfg;
}

void expect_holdoff_respected(const std::vector<AvalancheEvent>& events, std::size_t pixels, double holdoff) {
  std::vector<double> last(pixels, -INFINITY);
  std::size_t violations = 0;
  for (const auto& e : events) {
    if (e.time_ps - last[e.pixel] < holdoff) ++violations;
    last[e.pixel] = e.time_ps;
  }
  EXPECT_EQ(violations, 0u);
}

}  // namespace

TEST(Pde, Anchors) {
  const DetectorConfig cfg;
  EXPECT_DOUBLE_EQ(pde(cfg, 450.0), 0.50);
  EXPECT_DOUBLE_EQ(pde(cfg, 810.0), 0.05);
  EXPECT_EQ(pde(cfg, 950.0), 0.0);
  EXPECT_EQ(pde(cfg, 250.0), 0.0);
}

TEST(Pde, LinearBetweenAndClampedOutside) {
  const DetectorConfig cfg;
  EXPECT_NEAR(pde(cfg, 630.0), 0.275, 1e-12);
  EXPECT_NEAR(pde(cfg, 802.0), 0.05 + 8.0 / 360.0 * 0.45, 1e-12);
  EXPECT_DOUBLE_EQ(pde(cfg, 350.0), 0.50);
  EXPECT_DOUBLE_EQ(pde(cfg, 900.0), 0.05);
}

TEST(PairEfficiency, Examples) {
  const DetectorConfig cfg;
  const PixelMap map;
  // 0.5 * 0.05 = 0.025 per photon; 0.05 has no exact binary64 form, so the
  // product is compared to within a few ulp.
  EXPECT_NEAR(expected_pair_efficiency(cfg, map, 810, 810), 6.25e-4, 4 * 6.25e-4 * 2.2e-16);
  EXPECT_EQ(expected_pair_efficiency(cfg, map, 810, 950), 0.0);
  EXPECT_DOUBLE_EQ(expected_pair_efficiency(cfg, map, 450, 450), 0.0625);
}

TEST(Detect, MonochromaticAcceptanceFraction) {
  DetectorConfig cfg;
  cfg.without_noise();
  const PixelMap map;
  // 2e5 photons spaced 1 ms apart: far below saturation.
  std::vector<PhotonArrival> photons;
  for (std::uint64_t i = 0; i < 200000; ++i) photons.push_back({1e9 * i, 810.0, PhotonRole::pulse, i});
  const auto events = detect(photons, cfg, map, 200.0, 17);
  const double p = 0.025, n = photons.size();
  EXPECT_NEAR(events.size() / n, p, 3 * std::sqrt(p * (1 - p) / n));
  for (const auto& e : events) {
    ASSERT_EQ(e.pixel, 8u);
    ASSERT_EQ(e.cause, AvalancheCause::photon);
  }
}

TEST(Detect, HoldoffBoundary) {
  const DetectorConfig cfg = ideal_detector();
  const PixelMap map;
  std::vector<PhotonArrival> apart{{1000.0, 802.0, PhotonRole::first, 0},
                                   {151000.0, 802.0, PhotonRole::second, 0}};
  EXPECT_EQ(detect(apart, cfg, map, 1e-3, 1).size(), 2u);
  std::vector<PhotonArrival> close{{1000.0, 802.0, PhotonRole::first, 0},
                                   {101000.0, 802.0, PhotonRole::second, 0}};
  const auto ev = detect(close, cfg, map, 1e-3, 1);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].time_ps, 1000.0);
  // Exactly one hold-off apart is accepted.
  std::vector<PhotonArrival> edge{{0.0, 802.0, PhotonRole::first, 0}, {140000.0, 802.0, PhotonRole::second, 0}};
  EXPECT_EQ(detect(edge, cfg, map, 1e-3, 1).size(), 2u);
}

TEST(Detect, DifferentPixelsAreIndependent) {
  const DetectorConfig cfg = ideal_detector();
  const PixelMap map;
  std::vector<PhotonArrival> ph{{1000.0, 802.0, PhotonRole::first, 0}, {1010.0, 814.0, PhotonRole::second, 0}};
  const auto ev = detect(ph, cfg, map, 1e-3, 1);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].pixel, 5u);
  EXPECT_EQ(ev[1].pixel, 10u);
}

TEST(Detect, OutOfBandPhotonsMiss) {
  const DetectorConfig cfg = ideal_detector();
  const PixelMap map;
  std::vector<PhotonArrival> ph{{1000.0, 700.0, PhotonRole::first, 0}};
  EXPECT_TRUE(detect(ph, cfg, map, 1e-3, 1).empty());
}

TEST(Detect, UnsortedInputRejected) {
  const PixelMap map;
  std::vector<PhotonArrival> ph{{2000.0, 802.0, PhotonRole::first, 0}, {1000.0, 802.0, PhotonRole::first, 1}};
  EXPECT_THROW(detect(ph, ideal_detector(), map, 1e-3, 1), ContractViolation);
}

TEST(Detect, JitterHasConfiguredFwhm) {
  DetectorConfig cfg = ideal_detector();
  cfg.jitter_fwhm = 110;
  const PixelMap map;
  std::vector<PhotonArrival> ph;
  for (std::uint64_t i = 0; i < 50000; ++i) ph.push_back({1e6 * (i + 1), 802.0, PhotonRole::pulse, i});
  const auto ev = detect(ph, cfg, map, 60.0, 5);
  ASSERT_EQ(ev.size(), ph.size());
  double s2 = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) s2 += std::pow(ev[i].time_ps - ph[i].time_ps, 2);
  const double sigma = std::sqrt(s2 / ev.size());
  EXPECT_NEAR(sigma, 110 / 2.3548200450309493, 0.02 * 46.7);
}

TEST(Detect, DarkCountsArePoissonPerPixel) {
  DetectorConfig cfg;
  cfg.afterpulse_hazard = 0;
  cfg.crosstalk_prob = 0;
  const PixelMap map;
  const double T = 100.0;
  const auto ev = detect(std::vector<PhotonArrival>{}, cfg, map, T, 23);
  std::vector<double> counts(16, 0);
  for (const auto& e : ev) {
    ASSERT_EQ(e.cause, AvalancheCause::dark);
    counts[e.pixel] += 1;
  }
  // Poisson(100 * T) per pixel; dead-time loss is 100*140e-9 = 1.4e-5.
  const double mu = 100.0 * T;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - mu) * (c - mu) / mu;
  EXPECT_GT(oracle::chi2_sf(chi2, 16), 0.01);
}

TEST(Detect, AfterpulseFractionMatchesHazard) {
  DetectorConfig cfg;
  cfg.crosstalk_prob = 0;
  cfg.dark_rate_per_pixel = 1000;
  const PixelMap map;
  const auto ev = detect(std::vector<PhotonArrival>{}, cfg, map, 100.0, 31);
  double ap = 0, other = 0;
  for (const auto& e : ev) (e.cause == AvalancheCause::afterpulse ? ap : other) += 1;
  // Each accepted avalanche spawns one afterpulse with p = 1 - exp(-1e-6 * 1000).
  const double p = -std::expm1(-1e-6 * 1000.0);
  const double n = other + ap;
  EXPECT_NEAR(ap / n, p, 3 * std::sqrt(p * (1 - p) / n));
}

TEST(Detect, AfterpulsesStartAfterHoldoff) {
  DetectorConfig cfg = ideal_detector();
  cfg.afterpulse_hazard = 1e-3;
  cfg.afterpulse_window = 1000;
  const PixelMap map;
  std::vector<PhotonArrival> ph;
  for (std::uint64_t i = 0; i < 20000; ++i) ph.push_back({1e7 * i, 802.0, PhotonRole::pulse, i});
  const auto ev = detect(ph, cfg, map, 1.0, 3);
  double last = -1;
  std::size_t ap = 0;
  for (const auto& e : ev) {
    if (e.cause != AvalancheCause::photon) {
      ASSERT_EQ(e.cause, AvalancheCause::afterpulse);
      const double dt = e.time_ps - last;
      ASSERT_GE(dt, 140000.0);
      ASSERT_LE(dt, 140000.0 + 1e6);
      ++ap;
    }
    last = e.time_ps;
  }
  // p = 1 - exp(-1): about 63 % of photons followed by an afterpulse (and
  // some afterpulses by their own afterpulse).
  EXPECT_GT(ap, 20000u * 0.6);
}

TEST(Detect, CrosstalkIsLocal) {
  DetectorConfig cfg;
  cfg.crosstalk_prob = 0.2;
  cfg.afterpulse_hazard = 0;
  cfg.dark_rate_per_pixel = 2000;
  const PixelMap map;
  const auto ev = detect(std::vector<PhotonArrival>{}, cfg, map, 10.0, 77);
  std::size_t ct = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (ev[i].cause != AvalancheCause::crosstalk) continue;
    ++ct;
    bool found = false;
    for (std::size_t j = i; j-- > 0;) {
      if (ev[i].time_ps - ev[j].time_ps > 1500.0) break;
      const auto d = static_cast<int>(ev[i].pixel) - static_cast<int>(ev[j].pixel);
      if (d == 1 || d == -1) found = true;
    }
    ASSERT_TRUE(found) << "crosstalk event " << i << " has no neighbouring parent";
  }
  EXPECT_GT(ct, 1000u);
}

TEST(Detect, HoldoffInvariantUnderHeavyLoad) {
  DetectorConfig cfg;
  cfg.crosstalk_prob = 0.05;
  cfg.afterpulse_hazard = 1e-4;
  cfg.dark_rate_per_pixel = 5e5;
  const PixelMap map;
  const auto ev = detect(std::vector<PhotonArrival>{}, cfg, map, 0.5, 2);
  ASSERT_GT(ev.size(), 100000u);
  for (std::size_t i = 1; i < ev.size(); ++i) ASSERT_LE(ev[i - 1].time_ps, ev[i].time_ps);
  expect_holdoff_respected(ev, map.pixel_count, cfg.holdoff);
}

TEST(Detect, DeterministicPerSeed) {
  SpdcConfig src;
  src.pair_rate = 5e4;
  const auto ph = generate_spdc(src, 1.0, 1);
  const DetectorConfig cfg;
  const PixelMap map;
  EXPECT_EQ(detect(ph, cfg, map, 1.0, 9), detect(ph, cfg, map, 1.0, 9));
  EXPECT_NE(detect(ph, cfg, map, 1.0, 9), detect(ph, cfg, map, 1.0, 10));
}

TEST(Detect, SaturationFollowsNonParalyzableModel) {
  // Single pixel driven by a Poisson photon flux R (ideal efficiencies).
  DetectorConfig cfg = ideal_detector();
  const PixelMap map;
  for (double rate : {1e5, 1e6, 5e6}) {
    SpdcConfig src;
    src.pair_rate = rate;
    src.linewidth_fwhm = 0;
    src.temperature = 59;
    std::vector<PhotonArrival> ph;
    for (const auto& p : generate_spdc(src, 0.2, 4))
      if (p.role == PhotonRole::first) ph.push_back(p);
    const auto ev = detect(ph, cfg, map, 0.2, 4);
    const double detected = ev.size() / 0.2;
    EXPECT_NEAR(detected / oracle::nonparalyzable_rate(rate, 140e-9), 1.0, 0.02) << rate;
  }
}

TEST(CountNonParalyzable, MatchesModel) {
  std::mt19937_64 rng(3);
  for (double rate : {1e4, 1e6, 1e7}) {
    const double n = static_cast<double>(count_nonparalyzable(rate, 140000.0, 10.0, rng));
    EXPECT_NEAR(n / 10.0 / oracle::nonparalyzable_rate(rate, 140e-9), 1.0, 0.02) << rate;
  }
}

TEST(DetectorConfig, Validation) {
  DetectorConfig c;
  c.optics_transmission = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.pde_anchors = {{810, 0.05}, {450, 0.5}};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.holdoff = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
