// curve_csv.hpp - CurveFile reader / writer.
//
//   # value_kind: polarization        (optional; raw_signal also accepted)
//   time_min,value                    (or time_s,value)
//   0,0
//   7.5,0.24
//
// Times are normalized to minutes on read. Writes always use time_min and the
// shortest round-trippable decimal for every number.
#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tdnp/errors.hpp"
#include "tdnp/io/format.hpp"
#include "tdnp/kinetics.hpp"

namespace tdnp::io {

using kinetics::BuildupCurve;
using kinetics::ValueKind;

inline BuildupCurve read_curve(std::istream& in, const std::string& source = "<curve>") {
  BuildupCurve curve;
  bool have_header = false;
  bool seconds = false;
  std::string line;
  std::size_t lineno = 0;

  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      auto body = trim(text.substr(1));
      constexpr std::string_view key = "value_kind:";
      if (body.substr(0, key.size()) == key) {
        const auto kind = trim(body.substr(key.size()));
        if (have_header) throw ParseError(source, lineno, "value_kind comment must precede the header");
        if (kind == "polarization") {
          curve.value_kind = ValueKind::polarization;
        } else if (kind == "raw_signal") {
          curve.value_kind = ValueKind::raw_signal;
        } else {
          throw ParseError(source, lineno, "unknown value_kind '" + std::string(kind) + "'");
        }
      }
      continue;
    }

    const auto comma = text.find(',');
    if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos) {
      throw ParseError(source, lineno, have_header ? "expected two columns: time,value"
                                                   : "missing header 'time_min,value' or 'time_s,value'");
    }
    const auto first = trim(text.substr(0, comma));
    const auto second = trim(text.substr(comma + 1));

    if (!have_header) {
      if (second != "value" || (first != "time_min" && first != "time_s")) {
        throw ParseError(source, lineno, "missing header 'time_min,value' or 'time_s,value'");
      }
      seconds = first == "time_s";
      have_header = true;
      continue;
    }

    const auto t = parse_double(first);
    const auto v = parse_double(second);
    if (!t) throw ParseError(source, lineno, "non-numeric time '" + std::string(first) + "'");
    if (!v) throw ParseError(source, lineno, "non-numeric value '" + std::string(second) + "'");
    const Minutes time = seconds ? Minutes(Seconds(*t)) : Minutes(*t);
    if (!(time.count() >= 0.0)) throw ParseError(source, lineno, "negative time");
    if (!curve.samples.empty() && !(time > curve.samples.back().time)) {
      throw ParseError(source, lineno,
                       time == curve.samples.back().time ? "duplicated timestamp"
                                                         : "times must be strictly increasing");
    }
    curve.samples.push_back({time, *v});
  }
  if (!have_header) throw ParseError(source, 0, "missing header 'time_min,value' or 'time_s,value'");
  if (curve.samples.empty()) throw ParseError(source, lineno, "no data rows after the header");
  curve.validate();
  return curve;
}

inline BuildupCurve read_curve(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open curve file: " + path.string());
  return read_curve(in, path.string());
}

inline void write_curve(std::ostream& out, const BuildupCurve& curve) {
  out << "# value_kind: " << kinetics::to_string(curve.value_kind) << '\n';
  out << "time_min,value\n";
  for (const auto& s : curve.samples) out << shortest(s.time.count()) << ',' << shortest(s.value) << '\n';
}

inline void write_curve(const std::filesystem::path& path, const BuildupCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write curve file: " + path.string());
  write_curve(out, curve);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace tdnp::io
