#include <cstdio>

#include "capnet/metrics.hpp"
#include "json.hpp"

namespace capnet {
namespace {

constexpr int kNameWidth = 26;
constexpr int kCellWidth = 13;

std::string pad(std::string s, int width) {
  if (static_cast<int>(s.size()) < width) s.append(static_cast<std::size_t>(width) - s.size(), ' ');
  return s;
}

std::string cell(double ade, double fde) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f/%.2f", ade, fde);
  return buf;
}

std::string table_row(const std::string& name, std::span<const HorizonError> rows, const std::string& suffix) {
  std::string line = pad(name, kNameWidth);
  for (int h : kHorizonsSeconds) {
    std::string c = "-";
    for (const auto& r : rows) {
      if (r.seconds == h) c = cell(r.ade, r.fde);
    }
    line += pad(c, kCellWidth);
  }
  line += suffix;
  while (!line.empty() && line.back() == ' ') line.pop_back();
  return line + "\n";
}

}  // namespace

std::string report_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["model"] = report.model;
  j["samples"] = report.samples;
  j["ade_all"] = report.ade_all;
  auto& hs = j["horizons"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) hs.push_back({{"seconds", r.seconds}, {"ade", r.ade}, {"fde", r.fde}});
  return j.dump(2) + "\n";
}

std::string report_table(std::span<const MetricsReport> reports, bool with_reference) {
  std::string out = pad("Model", kNameWidth);
  for (int h : kHorizonsSeconds) out += pad(std::to_string(h) + "s", kCellWidth);
  out += "Samples\n";
  out += std::string(static_cast<std::size_t>(kNameWidth + 6 * kCellWidth + 7), '-') + "\n";
  for (const auto& r : reports) out += table_row(r.model, r.rows, std::to_string(r.samples));
  if (with_reference) {
    out += table_row("Const. Vel. & Head. (ref)", kReferenceCvh, "nuScenes");
    out += "ADE/FDE in meters. The reference row is the published nuScenes result and is not\n"
           "reproduced by the synthetic data here.\n";
  }
  return out;
}

}  // namespace capnet
