// Trace and phasor files.
//
// CSV layout: an optional `# wgphase-.../1` comment, a header row, then one
// record per line. Numbers are written with 17 significant digits and parsed
// strictly, so a write/read cycle is bit-exact and a decimal comma is an
// error rather than a misread. A trace's metadata travels in a JSON sidecar
// (`name.meta.json` next to `name.csv`).
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wgphase/error.hpp"
#include "wgphase/interferometer.hpp"
#include "wgphase/io/json_io.hpp"
#include "wgphase/io/number.hpp"
#include "wgphase/phasor.hpp"

namespace wgphase::io {

inline constexpr const char* kTraceSchema = "wgphase-trace/1";
inline constexpr const char* kPhasorSchema = "wgphase-phasor/1";
inline constexpr const char* kTraceHeader = "freq_ghz,counts";
inline constexpr const char* kPhasorHeader = "freq_ghz,phase_rad,phase_err,amp_ratio,amp_err,offset_ratio,offset_err";

enum class DataFormat { csv, json };

inline const char* extension(DataFormat f) { return f == DataFormat::csv ? ".csv" : ".json"; }

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& data_file) {
  auto p = data_file;
  p.replace_extension(".meta.json");
  return p;
}

namespace detail {

/// Lines of a CSV document with their 1-based numbers; comment lines and a
/// single trailing newline are skipped, CR before LF is tolerated.
struct CsvLine {
  std::size_t number;
  std::string_view text;
};

inline std::vector<CsvLine> csv_lines(std::string_view doc) {
  std::vector<CsvLine> out;
  std::size_t number = 0, pos = 0;
  while (pos < doc.size()) {
    std::size_t end = doc.find('\n', pos);
    if (end == std::string_view::npos) end = doc.size();
    std::string_view line = doc.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number;
    pos = end + 1;
    if (!line.empty() && line.front() == '#') continue;
    out.push_back({number, line});
  }
  return out;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

/// Numeric records under an exact header; every malformed line is reported
/// with its number.
inline std::vector<std::vector<double>> parse_numeric_csv(std::string_view doc, const std::string& name,
                                                          std::span<const std::string_view> headers,
                                                          std::size_t* header_index = nullptr) {
  const auto lines = csv_lines(doc);
  if (lines.empty()) throw ParseError(name, 1, "missing header row");
  // Every record the writer emits ends in a newline; a bare last line means
  // the file was cut short, possibly mid-number.
  if (doc.back() != '\n') throw ParseError(name, lines.back().number, "last line is unterminated (truncated file?)");
  std::size_t which = headers.size();
  for (std::size_t h = 0; h < headers.size(); ++h)
    if (lines.front().text == headers[h]) which = h;
  if (which == headers.size())
    throw ParseError(name, lines.front().number,
                     "expected header \"" + std::string(headers.front()) + "\", found \"" +
                         std::string(lines.front().text) + "\"");
  if (header_index != nullptr) *header_index = which;
  const std::size_t width = split_fields(headers[which]).size();

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.text.empty()) {
      if (i + 1 == lines.size()) break;
      throw ParseError(name, line.number, "empty line inside data");
    }
    const auto fields = split_fields(line.text);
    if (fields.size() != width)
      throw ParseError(name, line.number,
                       "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    std::vector<double> row;
    for (std::size_t k = 0; k < fields.size(); ++k) {
      const auto v = parse_number(fields[k]);
      if (!v)
        throw ParseError(name, line.number,
                         "field " + std::to_string(k + 1) + " is not a finite number: \"" + std::string(fields[k]) +
                             "\"");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(name, lines.back().number, "no data rows");
  return rows;
}

/// Line number of data row i (header is the first non-comment line).
inline std::size_t data_line_number(std::string_view doc, std::size_t row) {
  const auto lines = csv_lines(doc);
  return lines[row + 1].number;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Traces

inline std::string trace_to_csv(const FringeTrace& t) {
  std::string out = std::string("# ") + kTraceSchema + "\n" + kTraceHeader + "\n";
  for (std::size_t i = 0; i < t.freq.size(); ++i) {
    out += format_number(t.freq[i]);
    out += ',';
    out += format_number(t.counts[i]);
    out += '\n';
  }
  return out;
}

inline std::string meta_to_text(const FringeMeta& m) { return to_json(m).dump(2) + "\n"; }

inline std::string trace_to_json_text(const FringeTrace& t) {
  json j = {{"schema", kTraceSchema}, {"freq_ghz", t.freq}, {"counts", t.counts}, {"meta", to_json(t.meta)}};
  return j.dump(2) + "\n";
}

/// Parse the CSV body of a trace; meta is left at its defaults.
inline FringeTrace parse_trace_csv(std::string_view doc, const std::string& name) {
  const std::array<std::string_view, 1> headers{kTraceHeader};
  const auto rows = detail::parse_numeric_csv(doc, name, headers);
  FringeTrace t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && !(rows[i][0] > rows[i - 1][0]))
      throw ParseError(name, detail::data_line_number(doc, i), "frequency is not strictly increasing");
    if (rows[i][1] < 0.0) throw ParseError(name, detail::data_line_number(doc, i), "counts must be >= 0");
    t.freq.push_back(rows[i][0]);
    t.counts.push_back(rows[i][1]);
  }
  return t;
}

inline FringeTrace parse_trace_json(std::string_view doc, const std::string& name) {
  json j;
  try {
    j = json::parse(doc);
  } catch (const json::parse_error& e) {
    throw InputError(name + ": " + e.what());
  }
  StrictObject o(j, name);
  if (o.string("schema", "") != kTraceSchema)
    throw ConfigError(o.path_of("schema"), std::string("expected \"") + kTraceSchema + "\"");
  FringeTrace t;
  t.freq = o.numbers("freq_ghz");
  t.counts = o.numbers("counts");
  if (const json* m = o.child("meta")) t.meta = meta_from_json(*m, o.path_of("meta"));
  o.finish();
  at_path(name, [&] {
    t.validate();
    return 0;
  });
  return t;
}

/// Read a trace from .csv (with optional sidecar) or .json.
inline FringeTrace read_trace_file(const std::filesystem::path& path) {
  const std::string doc = read_text_file(path);
  if (path.extension() == ".json") return parse_trace_json(doc, path.string());
  FringeTrace t = parse_trace_csv(doc, path.string());
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    json j;
    try {
      j = json::parse(read_text_file(side));
    } catch (const json::parse_error& e) {
      throw InputError(side.string() + ": " + e.what());
    }
    t.meta = meta_from_json(j, side.string());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Phasors

inline std::string phasors_to_csv(std::span<const PhasorPoint> pts) {
  std::string out = std::string("# ") + kPhasorSchema + "\n" + kPhasorHeader + ",low_contrast\n";
  for (const auto& p : pts) {
    for (double v : {p.freq, p.phase_shift, p.phase_err, p.amp_ratio, p.amp_err, p.offset_ratio, p.offset_err}) {
      out += format_number(v);
      out += ',';
    }
    out += p.low_contrast ? "1\n" : "0\n";
  }
  return out;
}

inline std::string phasors_to_json_text(std::span<const PhasorPoint> pts) {
  json arr = json::array();
  for (const auto& p : pts)
    arr.push_back({{"freq_ghz", p.freq},
                   {"phase_rad", p.phase_shift},
                   {"phase_err", p.phase_err},
                   {"amp_ratio", p.amp_ratio},
                   {"amp_err", p.amp_err},
                   {"offset_ratio", p.offset_ratio},
                   {"offset_err", p.offset_err},
                   {"low_contrast", p.low_contrast}});
  return json{{"schema", kPhasorSchema}, {"points", arr}}.dump(2) + "\n";
}

inline void check_phasor(const PhasorPoint& p, const std::string& where) {
  if (p.amp_ratio < 0.0 || p.phase_err < 0.0 || p.amp_err < 0.0 || p.offset_err < 0.0)
    throw InputError(where + ": amp_ratio and uncertainties must be >= 0");
}

inline std::vector<PhasorPoint> parse_phasor_csv(std::string_view doc, const std::string& name) {
  static const std::string with_flag = std::string(kPhasorHeader) + ",low_contrast";
  const std::array<std::string_view, 2> headers{kPhasorHeader, with_flag};
  std::size_t which = 0;
  const auto rows = detail::parse_numeric_csv(doc, name, headers, &which);
  std::vector<PhasorPoint> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    PhasorPoint p{r[0], r[1], r[2], r[3], r[4], r[5], r[6], false};
    const std::size_t line = detail::data_line_number(doc, i);
    if (which == 1) {
      if (r[7] != 0.0 && r[7] != 1.0) throw ParseError(name, line, "low_contrast must be 0 or 1");
      p.low_contrast = r[7] == 1.0;
    }
    if (i > 0 && !(p.freq > out.back().freq)) throw ParseError(name, line, "frequency is not strictly increasing");
    try {
      check_phasor(p, name);
    } catch (const InputError& e) {
      throw ParseError(name, line, "amp_ratio and uncertainties must be >= 0");
    }
    out.push_back(p);
  }
  return out;
}

inline std::vector<PhasorPoint> parse_phasor_json(std::string_view doc, const std::string& name) {
  json j;
  try {
    j = json::parse(doc);
  } catch (const json::parse_error& e) {
    throw InputError(name + ": " + e.what());
  }
  StrictObject o(j, name);
  if (o.string("schema", "") != kPhasorSchema)
    throw ConfigError(o.path_of("schema"), std::string("expected \"") + kPhasorSchema + "\"");
  const json* pts = o.child("points");
  if (pts == nullptr || !pts->is_array()) throw ConfigError(o.path_of("points"), "expected an array");
  o.finish();
  std::vector<PhasorPoint> out;
  for (std::size_t i = 0; i < pts->size(); ++i) {
    const std::string path = o.path_of("points") + "[" + std::to_string(i) + "]";
    StrictObject q((*pts)[i], path);
    PhasorPoint p;
    p.freq = q.required_number("freq_ghz");
    p.phase_shift = q.required_number("phase_rad");
    p.phase_err = q.required_number("phase_err");
    p.amp_ratio = q.required_number("amp_ratio");
    p.amp_err = q.required_number("amp_err");
    p.offset_ratio = q.required_number("offset_ratio");
    p.offset_err = q.required_number("offset_err");
    p.low_contrast = q.boolean("low_contrast", false);
    q.finish();
    check_phasor(p, path);
    out.push_back(p);
  }
  return out;
}

inline std::vector<PhasorPoint> read_phasor_file(const std::filesystem::path& path) {
  const std::string doc = read_text_file(path);
  return path.extension() == ".json" ? parse_phasor_json(doc, path.string()) : parse_phasor_csv(doc, path.string());
}

}  // namespace wgphase::io
