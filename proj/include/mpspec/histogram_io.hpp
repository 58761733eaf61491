#pragma once

// CSV and JSON serialization of analysis histograms.
//
// CSV, one row per bin or cell:
//   channel spectrum   channel,count
//   time differences   delta_t_ps_lo,delta_t_ps_hi,count
//   joint histogram    first_channel,second_channel,count
// JSON carries axes, counts, exposure and an echo of the analysis settings.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mpspec/correlator.hpp"
#include "mpspec/error.hpp"

namespace mpspec {

inline std::string to_csv(const Histogram1D& h) {
  std::ostringstream os;
  os.precision(17);
  if (h.axis == "channel") {
    os << "channel,count\n";
    for (std::size_t k = 0; k < h.counts.size(); ++k) os << k << ',' << h.counts[k] << '\n';
  } else {
    os << h.axis << "_lo," << h.axis << "_hi,count\n";
    for (std::size_t k = 0; k < h.counts.size(); ++k)
      os << h.edges[k] << ',' << h.edges[k + 1] << ',' << h.counts[k] << '\n';
  }
  return os.str();
}

inline std::string to_csv(const Histogram2D& h) {
  std::ostringstream os;
  os << "first_channel,second_channel,count\n";
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) os << i << ',' << j << ',' << h.at(i, j) << '\n';
  return os.str();
}

inline nlohmann::json to_json(const Histogram1D& h, const nlohmann::json& settings = nlohmann::json::object()) {
  return {{"kind", "histogram1d"}, {"axis", h.axis},       {"edges", h.edges},
          {"counts", h.counts},    {"exposure_s", h.exposure_s}, {"settings", settings}};
}

inline nlohmann::json to_json(const Histogram2D& h, const nlohmann::json& settings = nlohmann::json::object()) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < h.rows; ++i) {
    auto r = nlohmann::json::array();
    for (std::size_t j = 0; j < h.cols; ++j) r.push_back(h.at(i, j));
    rows.push_back(std::move(r));
  }
  return {{"kind", "histogram2d"},
          {"axes", {{"rows", "first_channel"}, {"cols", "second_channel"}}},
          {"counts", rows},
          {"overflow", h.overflow},
          {"exposure_s", h.exposure_s},
          {"settings", settings}};
}

inline nlohmann::json to_json(const CoincidenceSpec& s) {
  return {{"delay_ps", s.delay_ps}, {"window_ps", s.window_ps}, {"allow_same_channel", s.allow_same_channel}};
}

inline Histogram1D histogram1d_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind") != "histogram1d") throw ConfigError("not a 1-D histogram");
    Histogram1D h;
    h.axis = j.at("axis").get<std::string>();
    h.edges = j.at("edges").get<std::vector<double>>();
    h.counts = j.at("counts").get<std::vector<std::uint64_t>>();
    h.exposure_s = j.at("exposure_s").get<double>();
    if (h.edges.size() != h.counts.size() + 1) throw ConfigError("edges/counts size mismatch");
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("histogram JSON: ") + e.what());
  }
}

inline bool wants_json(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

// "-" writes to standard output.
inline void write_text_file(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError(path, "write to standard output failed");
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError(path, "cannot open for writing");
  os << text;
  if (!os) throw IoError(path, "write failed");
}

template <class Histogram>
void write_histogram(const std::string& path, const Histogram& h,
                     const nlohmann::json& settings = nlohmann::json::object()) {
  write_text_file(path, wants_json(path) ? to_json(h, settings).dump(2) + "\n" : to_csv(h));
}

inline Histogram1D read_histogram1d(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path, "cannot open for reading");
  try {
    return histogram1d_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace mpspec
