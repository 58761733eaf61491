#pragma once

// Two-grating monochromator model: a grating-equation dispersion calculator
// (diagnostic) and the calibrated linear wavelength -> pixel map that the
// rest of the library uses.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>

#include "mpspec/error.hpp"

namespace mpspec {

struct GratingConfig {
  double groove_density = 1200.0;          // lines per mm
  double blaze_wavelength = 750.0;         // nm
  double collimator_focal_length = 35.0;   // mm
  double focusing_focal_length = 55.0;     // mm
  // Back-solved so that the doubled-pass dispersion at 810 nm gives 2.4 nm/pixel.
  double pixel_pitch = 371.4;              // um
  int diffraction_order = 1;

  void validate() const {
    if (!(groove_density > 0)) throw ConfigError("grating: groove_density must be > 0");
    if (!(blaze_wavelength > 0)) throw ConfigError("grating: blaze_wavelength must be > 0");
    if (!(collimator_focal_length > 0)) throw ConfigError("grating: collimator focal length must be > 0");
    if (!(focusing_focal_length > 0)) throw ConfigError("grating: focusing focal length must be > 0");
    if (!(pixel_pitch > 0)) throw ConfigError("grating: pixel_pitch must be > 0");
    if (diffraction_order < 1) throw ConfigError("grating: diffraction_order must be >= 1");
  }
};

// Reciprocal linear dispersion d(lambda)/dx at the focal plane, in nm per um,
// for two identical gratings in series. Incidence is fixed by the Littrow
// condition at the blaze wavelength.
inline double linear_dispersion(const GratingConfig& g, double lambda_nm) {
  g.validate();
  if (!(lambda_nm > 0)) throw DomainError("linear_dispersion: lambda must be > 0 nm");
  const double spacing_nm = 1.0e6 / g.groove_density;
  const double m = g.diffraction_order;
  const double sin_in = m * g.blaze_wavelength / (2.0 * spacing_nm);
  if (sin_in > 1.0)
    throw DomainError("linear_dispersion: m*blaze/(2d) must be <= 1 for Littrow incidence");
  const double sin_out = m * lambda_nm / spacing_nm - sin_in;
  if (sin_out > 1.0)
    throw DomainError("linear_dispersion: m*lambda/d - sin(theta_in) must be <= 1");
  if (sin_out < -1.0)
    throw DomainError("linear_dispersion: m*lambda/d - sin(theta_in) must be >= -1");
  const double cos_out = std::sqrt(1.0 - sin_out * sin_out);
  const double focus_um = g.focusing_focal_length * 1000.0;
  const double single_pass = spacing_nm * cos_out / (m * focus_um);
  return single_pass / 2.0;
}

struct PixelMap {
  std::size_t pixel_count = 16;
  double lambda_origin = 790.0;   // nm, center of pixel 0
  double lambda_step = 2.4;       // nm per pixel
  double detectable_min = 300.0;  // nm
  double detectable_max = 900.0;  // nm

  double band_min() const { return lambda_origin - lambda_step / 2.0; }
  double band_max() const {
    return lambda_origin + (static_cast<double>(pixel_count) - 0.5) * lambda_step;
  }

  void validate() const {
    if (pixel_count < 1) throw ConfigError("pixel_map: pixel_count must be >= 1");
    if (!(lambda_step > 0)) throw ConfigError("pixel_map: lambda_step must be > 0");
    if (!(detectable_min < detectable_max))
      throw ConfigError("pixel_map: detectable range must be non-empty");
    const double first = lambda_origin;
    const double last = lambda_origin + static_cast<double>(pixel_count - 1) * lambda_step;
    if (first < detectable_min || last > detectable_max)
      throw ConfigError("pixel_map: configured band must lie inside the detectable range");
  }

  bool detectable(double lambda_nm) const {
    return lambda_nm >= detectable_min && lambda_nm <= detectable_max;
  }
};

struct PixelAnchor {
  double pixel;
  double wavelength_nm;
};

// Least-squares line through (pixel, wavelength) anchors.
inline PixelMap build_calibrated_map(std::span<const PixelAnchor> anchors,
                                     std::size_t pixel_count = 16,
                                     double detectable_min = 300.0,
                                     double detectable_max = 900.0) {
  std::set<double> distinct;
  for (const auto& a : anchors) distinct.insert(a.pixel);
  if (distinct.size() < 2)
    throw CalibrationError("calibration needs at least 2 anchors with distinct pixel indices");

  const double n = static_cast<double>(anchors.size());
  double sx = 0, sy = 0;
  for (const auto& a : anchors) {
    sx += a.pixel;
    sy += a.wavelength_nm;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& a : anchors) {
    sxx += (a.pixel - mx) * (a.pixel - mx);
    sxy += (a.pixel - mx) * (a.wavelength_nm - my);
  }
  PixelMap map;
  map.pixel_count = pixel_count;
  map.lambda_step = sxy / sxx;
  map.lambda_origin = my - map.lambda_step * mx;
  map.detectable_min = detectable_min;
  map.detectable_max = detectable_max;
  if (!(map.lambda_step > 0))
    throw CalibrationError("calibration yields a non-increasing wavelength axis");
  map.validate();
  return map;
}

inline PixelMap build_calibrated_map(std::initializer_list<PixelAnchor> anchors,
                                     std::size_t pixel_count = 16) {
  return build_calibrated_map(std::span<const PixelAnchor>(anchors.begin(), anchors.size()),
                              pixel_count);
}

// Nearest pixel center; empty when the photon misses the array.
inline std::optional<std::size_t> wavelength_to_pixel(const PixelMap& map, double lambda_nm) {
  if (!(lambda_nm >= map.band_min() && lambda_nm <= map.band_max())) return std::nullopt;
  const double idx = std::floor((lambda_nm - map.lambda_origin) / map.lambda_step + 0.5);
  if (idx < 0 || idx >= static_cast<double>(map.pixel_count)) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

inline double pixel_center_wavelength(const PixelMap& map, std::size_t i) {
  if (i >= map.pixel_count)
    throw DomainError("pixel index " + std::to_string(i) + " out of range [0, " +
                      std::to_string(map.pixel_count) + ")");
  return map.lambda_origin + static_cast<double>(i) * map.lambda_step;
}

}  // namespace mpspec
