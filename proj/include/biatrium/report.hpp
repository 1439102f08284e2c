#pragma once

// CSV serialization of metric reports: case_id,class,dice,hd95_mm,flags

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "biatrium/metrics.hpp"

namespace biatrium {

// Up to 12 significant digits, trailing zeros dropped; enough to carry
// two-decimal table values through the x100 percent scaling unchanged.
inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string row_flags(const MetricRow& r) {
  std::string flags;
  auto add = [&](const char* f) {
    if (!flags.empty()) flags += '|';
    flags += f;
  };
  if (r.dice.empty) add("dice_empty");
  if (r.hd95.flag == DistanceFlag::empty) add("hd95_empty");
  if (r.hd95.flag == DistanceFlag::infinite) add("hd95_inf");
  return flags;
}

inline void write_metric_csv(std::ostream& out, const MetricReport& report, bool percent) {
  out << "case_id,class,dice,hd95_mm,flags\n";
  for (const auto& r : report.rows) {
    const double d = percent ? r.dice.value * 100.0 : r.dice.value;
    out << r.case_id << ',' << r.class_name << ',' << format_number(d) << ',' << format_number(r.hd95.mm) << ','
        << row_flags(r) << '\n';
  }
}

inline std::string metric_csv(const MetricReport& report, bool percent) {
  std::ostringstream os;
  write_metric_csv(os, report, percent);
  return os.str();
}

// Inverse of write_metric_csv. `percent` must match the writer's setting.
inline MetricReport parse_metric_csv(const std::string& text, bool percent) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "case_id,class,dice,hd95_mm,flags")
    throw Error(Errc::invalid_argument, "unexpected metric CSV header");
  MetricReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 5) throw Error(Errc::invalid_argument, "metric CSV row must have 5 cells: " + line);
    MetricRow r;
    r.case_id = cells[0];
    r.class_name = cells[1];
    r.dice.value = std::stod(cells[2]) / (percent ? 100.0 : 1.0);
    r.dice.empty = cells[4].find("dice_empty") != std::string::npos;
    r.hd95.mm = cells[3] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(cells[3]);
    if (cells[4].find("hd95_empty") != std::string::npos) r.hd95.flag = DistanceFlag::empty;
    if (cells[4].find("hd95_inf") != std::string::npos) r.hd95.flag = DistanceFlag::infinite;
    report.rows.push_back(r);
  }
  return report;
}

}  // namespace biatrium
