#ifndef AHB_TRACE_HPP
#define AHB_TRACE_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "ahb/error.hpp"
#include "json.hpp"

namespace ahb {

// Measurements for iteration k. `gap` is NaN when f_* is unknown; `dist` is
// absent when the objective has no distance-to-solution oracle.
struct IterationRecord {
  std::int64_t k = 0;
  double fval = 0.0;
  double gap = 0.0;
  double gnorm = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double step_norm = 0.0;
  std::optional<double> dist;
};

struct TraceMeta {
  nlohmann::json problem;  // ProblemSpec, null when unknown
  nlohmann::json config;   // SolverConfig
  std::optional<std::int64_t> x0_seed;
  std::string stop_reason;
  double wall_ms = 0.0;
  // Radius R of the ball the local Lipschitz bound was validated on.
  std::optional<double> local_radius;
};

struct Trace {
  std::vector<IterationRecord> records;
  TraceMeta meta;
};

inline constexpr std::string_view kTraceHeader = "k,fval,gap,gnorm,alpha,beta,step_norm,dist";

inline void to_json(nlohmann::json& j, const TraceMeta& m) {
  j = nlohmann::json{{"problem", m.problem},
                     {"config", m.config},
                     {"x0_seed", m.x0_seed ? nlohmann::json(*m.x0_seed) : nlohmann::json(nullptr)},
                     {"stop_reason", m.stop_reason},
                     {"wall_ms", m.wall_ms}};
  if (m.local_radius) j["local_radius"] = *m.local_radius;
}

inline void from_json(const nlohmann::json& j, TraceMeta& m) {
  m.problem = j.value("problem", nlohmann::json());
  m.config = j.value("config", nlohmann::json());
  if (j.contains("x0_seed") && !j.at("x0_seed").is_null()) m.x0_seed = j.at("x0_seed").get<std::int64_t>();
  m.stop_reason = j.value("stop_reason", std::string());
  m.wall_ms = j.value("wall_ms", 0.0);
  if (j.contains("local_radius")) m.local_radius = j.at("local_radius").get<double>();
}

// Shortest decimal rendering is not required; 17 significant digits always
// round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (s.empty()) return std::nullopt;
  // from_chars rejects a leading '+'; the writer never emits one.
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Writes `contents` to `path` via a sibling temp file and rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into '" + path.string() + "'");
  }
}

inline std::string render_csv(const Trace& trace) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.k);
    for (double v : {r.fval, r.gap, r.gnorm, r.alpha, r.beta, r.step_norm}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    if (r.dist) out += format_double(*r.dist);
    out += '\n';
  }
  return out;
}

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p += ".meta.json";
  return p;
}

inline void write_csv(const Trace& trace, const std::filesystem::path& path) {
  if (trace.records.empty()) throw InvalidInput("trace has no records");
  for (std::size_t i = 1; i < trace.records.size(); ++i)
    if (trace.records[i].k <= trace.records[i - 1].k)
      throw InvalidInput("trace records must have strictly increasing k");
  write_file_atomic(path, render_csv(trace));
  write_file_atomic(meta_path(path), nlohmann::json(trace.meta).dump(2) + "\n");
}

inline Trace read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");

  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header in '" + path.string() + "'", 1);
  ++line_no;
  if (line != kTraceHeader) throw ParseError("unexpected header '" + line + "'", line_no);

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 8) throw ParseError("expected 8 fields, got " + std::to_string(fields.size()), line_no);

    IterationRecord r;
    auto k = fields[0];
    auto kres = std::from_chars(k.data(), k.data() + k.size(), r.k);
    if (kres.ec != std::errc() || kres.ptr != k.data() + k.size() || r.k < 0)
      throw ParseError("bad iteration index '" + std::string(k) + "'", line_no);
    double* slots[] = {&r.fval, &r.gap, &r.gnorm, &r.alpha, &r.beta, &r.step_norm};
    for (std::size_t i = 0; i < 6; ++i) {
      auto v = parse_double(fields[i + 1]);
      if (!v) throw ParseError("bad number '" + std::string(fields[i + 1]) + "'", line_no);
      *slots[i] = *v;
    }
    if (!fields[7].empty()) {
      auto v = parse_double(fields[7]);
      if (!v) throw ParseError("bad number '" + std::string(fields[7]) + "'", line_no);
      r.dist = *v;
    }
    if (!trace.records.empty() && r.k <= trace.records.back().k)
      throw ParseError("iteration index not increasing", line_no);
    trace.records.push_back(r);
  }
  if (trace.records.empty()) throw ParseError("trace has no records", line_no);

  const auto mp = meta_path(path);
  if (std::filesystem::exists(mp)) {
    std::ifstream meta_in(mp);
    try {
      trace.meta = nlohmann::json::parse(meta_in).get<TraceMeta>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("metadata: ") + e.what(), 1);
    }
  }
  return trace;
}

}  // namespace ahb

#endif  // AHB_TRACE_HPP
