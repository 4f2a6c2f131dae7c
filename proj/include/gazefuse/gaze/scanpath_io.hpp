#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gazefuse/errors.hpp"
#include "gazefuse/gaze/types.hpp"

namespace gazefuse::gaze {

// Scanpath CSV, UTF-8 with LF endings:
//
//   #format=gazefuse-scanpath/1
//   subject_id,stimulus_id,category,label,idx,x,y,duration_ms,onset_ms
//   S0001,animals_00,animals,1,0,0.41,0.52,212,0
//
// Lines starting with '#' are comments. The trailing onset_ms column is
// optional on input; without it onsets are reconstructed back to back from
// durations (which leaves no saccade intervals).

inline constexpr std::string_view kScanpathFormatLine = "#format=gazefuse-scanpath/1";
inline constexpr std::string_view kScanpathHeader = "subject_id,stimulus_id,category,label,idx,x,y,duration_ms";

enum class CoordinateUnits { normalized, pixels };

struct ScanpathFormat {
  CoordinateUnits units = CoordinateUnits::normalized;
  double screen_w = 1920.0;
  double screen_h = 1080.0;
};

struct ParseResult {
  std::vector<ScanPath> paths;
  std::size_t warnings = 0;
  std::vector<std::string> messages;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline double parse_double(const std::string& s, std::size_t line, const char* field) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError(line, std::string("field '") + field + "' is not a number: '" + s + "'");
  }
  return v;
}

inline long parse_int(const std::string& s, std::size_t line, const char* field) {
  long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, std::string("field '") + field + "' is not an integer: '" + s + "'");
  }
  return v;
}

// Shortest text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline ParseResult parse_scanpaths(std::istream& in, const ScanpathFormat& format = {}) {
  if (format.units == CoordinateUnits::pixels && !(format.screen_w > 0 && format.screen_h > 0)) {
    throw ConfigError("screen dimensions must be positive");
  }
  struct Row {
    long idx;
    Fixation fix;
  };
  struct Group {
    ScanPath path;
    std::vector<Row> rows;
  };
  ParseResult result;
  std::vector<Group> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  bool seen_header = false;
  bool has_onset = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line == kScanpathHeader) {
        has_onset = false;
      } else if (line == std::string(kScanpathHeader) + ",onset_ms") {
        has_onset = true;
      } else {
        throw ParseError(line_no, "unexpected header '" + line + "'");
      }
      seen_header = true;
      continue;
    }
    const auto f = detail::split_csv(line);
    const std::size_t expected = has_onset ? 9 : 8;
    if (f.size() != expected) {
      throw ParseError(line_no, "expected " + std::to_string(expected) + " fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty() || f[1].empty()) throw ParseError(line_no, "empty subject or stimulus id");
    StimulusCategory category;
    try {
      category = parse_category(f[2]);
    } catch (const ConfigError&) {
      throw ParseError(line_no, "unknown category '" + f[2] + "'");
    }
    const long label = detail::parse_int(f[3], line_no, "label");
    if (label != 0 && label != 1) throw ParseError(line_no, "label must be 0 or 1");
    const long idx = detail::parse_int(f[4], line_no, "idx");
    if (idx < 0) throw ParseError(line_no, "idx must be nonnegative");
    Fixation fix;
    fix.x = detail::parse_double(f[5], line_no, "x");
    fix.y = detail::parse_double(f[6], line_no, "y");
    fix.duration_ms = detail::parse_double(f[7], line_no, "duration_ms");
    if (!(fix.duration_ms > 0)) throw ParseError(line_no, "duration_ms must be positive");
    if (has_onset) fix.onset_ms = detail::parse_double(f[8], line_no, "onset_ms");

    const double xmax = format.units == CoordinateUnits::pixels ? format.screen_w : 1.0;
    const double ymax = format.units == CoordinateUnits::pixels ? format.screen_h : 1.0;
    if (fix.x < 0 || fix.x > xmax || fix.y < 0 || fix.y > ymax) {
      ++result.warnings;
      result.messages.push_back("line " + std::to_string(line_no) + ": coordinates outside screen bounds, row dropped");
      continue;
    }
    if (format.units == CoordinateUnits::pixels) {
      fix.x /= format.screen_w;
      fix.y /= format.screen_h;
    }

    const auto key = std::make_pair(f[0], f[1]);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, groups.size()).first;
      Group g;
      g.path.subject_id = f[0];
      g.path.stimulus_id = f[1];
      g.path.category = category;
      g.path.label = static_cast<int>(label);
      groups.push_back(std::move(g));
    }
    auto& group = groups[it->second];
    if (group.path.label != label || group.path.category != category) {
      throw ParseError(line_no, "label/category disagree with earlier rows of the same scanpath");
    }
    for (const auto& r : group.rows) {
      if (r.idx == idx) throw ParseError(line_no, "duplicate idx " + std::to_string(idx));
    }
    group.rows.push_back({idx, fix});
  }
  for (auto& g : groups) {
    std::sort(g.rows.begin(), g.rows.end(), [](const Row& a, const Row& b) { return a.idx < b.idx; });
    double clock = 0.0;
    for (const auto& r : g.rows) {
      Fixation fix = r.fix;
      if (!has_onset) {
        fix.onset_ms = clock;
        clock += fix.duration_ms;
      }
      g.path.fixations.push_back(fix);
    }
    result.paths.push_back(std::move(g.path));
  }
  return result;
}

inline ParseResult parse_scanpaths_file(const std::string& path, const ScanpathFormat& format = {}) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open scanpath file '" + path + "'");
  return parse_scanpaths(f, format);
}

/// Writes normalized scanpaths in the documented layout (with onset_ms).
inline void write_scanpaths(std::ostream& out, const std::vector<ScanPath>& paths) {
  out << kScanpathFormatLine << '\n' << kScanpathHeader << ",onset_ms\n";
  for (const auto& p : paths) {
    for (std::size_t i = 0; i < p.fixations.size(); ++i) {
      const auto& f = p.fixations[i];
      out << p.subject_id << ',' << p.stimulus_id << ',' << category_name(p.category) << ',' << p.label << ',' << i
          << ',' << detail::format_double(f.x) << ',' << detail::format_double(f.y) << ','
          << detail::format_double(f.duration_ms) << ',' << detail::format_double(f.onset_ms) << '\n';
    }
  }
}

inline std::string scanpaths_to_string(const std::vector<ScanPath>& paths) {
  std::ostringstream os;
  write_scanpaths(os, paths);
  return os.str();
}

}  // namespace gazefuse::gaze
