#pragma once

// JSON master configuration. Every section is optional and falls back to the
// defaults of its owning type; unknown keys are rejected.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpspec/detector.hpp"
#include "mpspec/error.hpp"
#include "mpspec/sources.hpp"
#include "mpspec/spectral_map.hpp"

namespace mpspec {

struct MasterConfig {
  PixelMap pixel_map;
  GratingConfig grating;
  DetectorConfig detector;
  SpdcConfig spdc;
  PulsedConfig pulsed;
  std::optional<std::uint64_t> seed;
  double duration_s = 60.0;

  void validate() const {
    pixel_map.validate();
    grating.validate();
    detector.validate();
    spdc.validate();
    pulsed.validate();
    if (!(duration_s > 0)) throw ConfigError("duration_s must be > 0");
    if (pixel_map.pixel_count > detector.physical_pixels)
      throw ConfigError("pixel_map.pixel_count exceeds the detector's physical pixel count");
  }
};

namespace detail {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) throw ConfigError(where(it.key()) + ": unknown key");
    }
  }

  void number(const char* key, double& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    out = v.get<double>();
  }

  template <class Int>
  void integer(const char* key, Int& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      throw ConfigError(where(key) + ": expected a non-negative integer");
    out = static_cast<Int>(v.get<std::uint64_t>());
  }

  template <class Pair>
  void pairs(const char* key, std::vector<Pair>& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of [x, y] pairs");
    std::vector<Pair> parsed;
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ConfigError(where(key) + ": expected an array of [x, y] pairs");
      parsed.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    out = std::move(parsed);
  }

  const json& raw() const { return j_; }
  std::string where(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

 private:
  const json& j_;
  std::string name_;
};

}  // namespace detail

inline MasterConfig parse_config(const nlohmann::json& j) {
  using detail::Section;
  MasterConfig c;
  Section top(j, "");
  top.allow({"pixel_map", "grating", "detector", "spdc", "pulsed", "seed", "duration_s"});
  top.number("duration_s", c.duration_s);
  if (j.contains("seed")) {
    std::uint64_t s = 0;
    top.integer("seed", s);
    c.seed = s;
  }

  if (j.contains("pixel_map")) {
    Section s(j.at("pixel_map"), "pixel_map");
    s.allow({"pixel_count", "lambda_origin_nm", "lambda_step_nm", "detectable_min_nm", "detectable_max_nm"});
    s.integer("pixel_count", c.pixel_map.pixel_count);
    s.number("lambda_origin_nm", c.pixel_map.lambda_origin);
    s.number("lambda_step_nm", c.pixel_map.lambda_step);
    s.number("detectable_min_nm", c.pixel_map.detectable_min);
    s.number("detectable_max_nm", c.pixel_map.detectable_max);
  }
  if (j.contains("grating")) {
    Section s(j.at("grating"), "grating");
    s.allow({"groove_per_mm", "blaze_nm", "f_collim_mm", "f_focus_mm", "pitch_um", "order"});
    s.number("groove_per_mm", c.grating.groove_density);
    s.number("blaze_nm", c.grating.blaze_wavelength);
    s.number("f_collim_mm", c.grating.collimator_focal_length);
    s.number("f_focus_mm", c.grating.focusing_focal_length);
    s.number("pitch_um", c.grating.pixel_pitch);
    s.integer("order", c.grating.diffraction_order);
  }
  if (j.contains("detector")) {
    Section s(j.at("detector"), "detector");
    s.allow({"pixel_count", "pde_anchors", "t_optics", "jitter_fwhm_ps", "holdoff_ps", "dark_cps",
             "ap_hazard_per_ns", "ap_window_ns", "ct_prob", "ct_window_ns"});
    s.integer("pixel_count", c.detector.physical_pixels);
    s.pairs("pde_anchors", c.detector.pde_anchors);
    s.number("t_optics", c.detector.optics_transmission);
    s.number("jitter_fwhm_ps", c.detector.jitter_fwhm);
    s.number("holdoff_ps", c.detector.holdoff);
    s.number("dark_cps", c.detector.dark_rate_per_pixel);
    s.number("ap_hazard_per_ns", c.detector.afterpulse_hazard);
    s.number("ap_window_ns", c.detector.afterpulse_window);
    s.number("ct_prob", c.detector.crosstalk_prob);
    s.number("ct_window_ns", c.detector.crosstalk_window);
  }
  if (j.contains("spdc")) {
    Section s(j.at("spdc"), "spdc");
    s.allow({"temperature_c", "pair_rate_hz", "delay_ps", "linewidth_fwhm_nm", "anchors_first", "anchors_second"});
    s.number("temperature_c", c.spdc.temperature);
    s.number("pair_rate_hz", c.spdc.pair_rate);
    s.number("delay_ps", c.spdc.relative_delay);
    s.number("linewidth_fwhm_nm", c.spdc.linewidth_fwhm);
    s.pairs("anchors_first", c.spdc.anchors_first);
    s.pairs("anchors_second", c.spdc.anchors_second);
  }
  if (j.contains("pulsed")) {
    Section s(j.at("pulsed"), "pulsed");
    s.allow({"rep_rate_hz", "pulse_fs", "center_nm", "mu", "spectral_fwhm_nm"});
    s.number("rep_rate_hz", c.pulsed.repetition_rate);
    s.number("pulse_fs", c.pulsed.pulse_duration_fwhm);
    s.number("center_nm", c.pulsed.center_wavelength);
    s.number("mu", c.pulsed.mean_photons_per_pulse);
    s.number("spectral_fwhm_nm", c.pulsed.spectral_fwhm);
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const MasterConfig& c) {
  nlohmann::json j;
  j["duration_s"] = c.duration_s;
  if (c.seed) j["seed"] = *c.seed;
  j["pixel_map"] = {{"pixel_count", c.pixel_map.pixel_count},
                    {"lambda_origin_nm", c.pixel_map.lambda_origin},
                    {"lambda_step_nm", c.pixel_map.lambda_step},
                    {"detectable_min_nm", c.pixel_map.detectable_min},
                    {"detectable_max_nm", c.pixel_map.detectable_max}};
  j["grating"] = {{"groove_per_mm", c.grating.groove_density},
                  {"blaze_nm", c.grating.blaze_wavelength},
                  {"f_collim_mm", c.grating.collimator_focal_length},
                  {"f_focus_mm", c.grating.focusing_focal_length},
                  {"pitch_um", c.grating.pixel_pitch},
                  {"order", c.grating.diffraction_order}};
  auto pde = nlohmann::json::array();
  for (const auto& a : c.detector.pde_anchors) pde.push_back({a.wavelength_nm, a.efficiency});
  j["detector"] = {{"pixel_count", c.detector.physical_pixels},
                   {"pde_anchors", pde},
                   {"t_optics", c.detector.optics_transmission},
                   {"jitter_fwhm_ps", c.detector.jitter_fwhm},
                   {"holdoff_ps", c.detector.holdoff},
                   {"dark_cps", c.detector.dark_rate_per_pixel},
                   {"ap_hazard_per_ns", c.detector.afterpulse_hazard},
                   {"ap_window_ns", c.detector.afterpulse_window},
                   {"ct_prob", c.detector.crosstalk_prob},
                   {"ct_window_ns", c.detector.crosstalk_window}};
  auto anchors = [](const std::vector<TemperatureAnchor>& v) {
    auto a = nlohmann::json::array();
    for (const auto& t : v) a.push_back({t.celsius, t.wavelength_nm});
    return a;
  };
  j["spdc"] = {{"temperature_c", c.spdc.temperature},
               {"pair_rate_hz", c.spdc.pair_rate},
               {"delay_ps", c.spdc.relative_delay},
               {"linewidth_fwhm_nm", c.spdc.linewidth_fwhm},
               {"anchors_first", anchors(c.spdc.anchors_first)},
               {"anchors_second", anchors(c.spdc.anchors_second)}};
  j["pulsed"] = {{"rep_rate_hz", c.pulsed.repetition_rate},
                 {"pulse_fs", c.pulsed.pulse_duration_fwhm},
                 {"center_nm", c.pulsed.center_wavelength},
                 {"mu", c.pulsed.mean_photons_per_pulse},
                 {"spectral_fwhm_nm", c.pulsed.spectral_fwhm}};
  return j;
}

inline MasterConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path, "cannot open config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace mpspec
