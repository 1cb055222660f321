#pragma once

// Simulation traces: one record per radio or state event, persisted as CSV.
//
//   # format_version: 1.0
//   # nodes: 10
//   # sinks: 1
//   # max_level: 3
//   # mate_threshold: 2
//   # duration_ms: 60000.000
//   time_ms,kind,node,peer,epoch,ed,level,vector,crc_ok
//   ...
//   # end rows=<count>
//
// Vectors are hex, a fixed number of digits per entry. A missing end marker
// means the file was truncated.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "groupsense/consensus.hpp"
#include "groupsense/link_estimator.hpp"

namespace groupsense {

inline constexpr int kTraceFormatMajor = 1;

enum class TraceKind : std::uint8_t {
  tx,
  rx,
  beacon_tx,
  beacon_rx,
  collision,
  loss,
  epoch_change,
  level_change,
};

inline std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::tx: return "tx";
    case TraceKind::rx: return "rx";
    case TraceKind::beacon_tx: return "beacon_tx";
    case TraceKind::beacon_rx: return "beacon_rx";
    case TraceKind::collision: return "collision";
    case TraceKind::loss: return "loss";
    case TraceKind::epoch_change: return "epoch_change";
    case TraceKind::level_change: return "level_change";
  }
  return "?";
}

inline std::optional<TraceKind> parse_trace_kind(std::string_view s) {
  for (auto k : {TraceKind::tx, TraceKind::rx, TraceKind::beacon_tx, TraceKind::beacon_rx, TraceKind::collision,
                 TraceKind::loss, TraceKind::epoch_change, TraceKind::level_change}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct TraceRecord {
  Duration time{0};
  TraceKind kind = TraceKind::tx;
  NodeId node = 0;
  std::optional<NodeId> peer;
  Epoch epoch = 0;
  std::optional<int> ed;
  std::optional<int> level;
  std::int32_t payload = -1;  // index into SimTrace::payloads
  std::optional<bool> crc_ok;

  bool is_data() const { return payload >= 0; }
};

struct TraceMeta {
  std::string format_version = std::to_string(kTraceFormatMajor) + ".0";
  std::size_t nodes = 0;
  std::size_t sinks = 0;
  int max_level = 3;
  int mate_threshold = 2;
  Duration duration{0};

  ProximityScale scale() const { return {max_level, mate_threshold}; }
};

struct SimTrace {
  TraceMeta meta;
  std::vector<TraceRecord> records;
  std::vector<ProximityVector> payloads;
  bool complete = true;
  std::vector<std::string> problems;  // "line N: ..." for malformed rows

  const ProximityVector& payload(const TraceRecord& r) const { return payloads.at(static_cast<std::size_t>(r.payload)); }
};

// ---------------------------------------------------------------------------
// Hex vectors

inline int hex_digits_for(int max_level) {
  int digits = 1;
  for (int cap = 16; cap <= max_level; cap *= 16) ++digits;
  return digits;
}

inline std::string encode_vector(const ProximityVector& v, int max_level) {
  static constexpr char kHex[] = "0123456789abcdef";
  const int w = hex_digits_for(max_level);
  std::string out(v.size() * static_cast<std::size_t>(w), '0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    unsigned value = v[i];
    for (int d = w - 1; d >= 0; --d) {
      out[i * static_cast<std::size_t>(w) + static_cast<std::size_t>(d)] = kHex[value & 0xF];
      value >>= 4;
    }
  }
  return out;
}

inline std::optional<ProximityVector> decode_vector(std::string_view hex, std::size_t n, int max_level) {
  const auto w = static_cast<std::size_t>(hex_digits_for(max_level));
  if (hex.size() != n * w) return std::nullopt;
  std::vector<Level> levels(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned value = 0;
    for (std::size_t d = 0; d < w; ++d) {
      const char c = hex[i * w + d];
      unsigned digit = 0;
      if (c >= '0' && c <= '9') {
        digit = static_cast<unsigned>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        digit = static_cast<unsigned>(c - 'a' + 10);
      } else if (c >= 'A' && c <= 'F') {
        digit = static_cast<unsigned>(c - 'A' + 10);
      } else {
        return std::nullopt;
      }
      value = value * 16 + digit;
    }
    if (value > static_cast<unsigned>(max_level)) return std::nullopt;
    levels[i] = static_cast<Level>(value);
  }
  return ProximityVector(std::move(levels));
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_ms(Duration t) {
  const auto us = t.count();
  char buf[48];
  const char* sign = us < 0 ? "-" : "";
  const auto a = us < 0 ? -us : us;
  std::snprintf(buf, sizeof buf, "%s%lld.%03lld", sign, static_cast<long long>(a / 1000),
                static_cast<long long>(a % 1000));
  return buf;
}

inline std::optional<Duration> parse_ms(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool neg = false;
  if (s.front() == '-') {
    neg = true;
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  const std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  long long ms = 0;
  if (whole.empty() || std::from_chars(whole.data(), whole.data() + whole.size(), ms).ptr != whole.data() + whole.size()) {
    return std::nullopt;
  }
  long long us = 0;
  if (frac.size() > 3) return std::nullopt;
  for (std::size_t i = 0; i < 3; ++i) {
    us *= 10;
    if (i < frac.size()) {
      if (frac[i] < '0' || frac[i] > '9') return std::nullopt;
      us += frac[i] - '0';
    }
  }
  const long long total = ms * 1000 + us;
  return Duration(neg ? -total : total);
}

inline constexpr std::string_view kTraceHeader = "time_ms,kind,node,peer,epoch,ed,level,vector,crc_ok";

inline void write_trace_csv(std::ostream& out, const SimTrace& trace) {
  const auto& m = trace.meta;
  out << "# format_version: " << m.format_version << '\n'
      << "# nodes: " << m.nodes << '\n'
      << "# sinks: " << m.sinks << '\n'
      << "# max_level: " << m.max_level << '\n'
      << "# mate_threshold: " << m.mate_threshold << '\n'
      << "# duration_ms: " << format_ms(m.duration) << '\n'
      << kTraceHeader << '\n';
  std::string line;
  for (const auto& r : trace.records) {
    line.clear();
    line += format_ms(r.time);
    line += ',';
    line += to_string(r.kind);
    line += ',';
    line += std::to_string(r.node);
    line += ',';
    if (r.peer) line += std::to_string(*r.peer);
    line += ',';
    line += std::to_string(r.epoch);
    line += ',';
    if (r.ed) line += std::to_string(*r.ed);
    line += ',';
    if (r.level) line += std::to_string(*r.level);
    line += ',';
    if (r.is_data()) line += encode_vector(trace.payload(r), m.max_level);
    line += ',';
    if (r.crc_ok) line += *r.crc_ok ? '1' : '0';
    line += '\n';
    out << line;
  }
  out << "# end rows=" << trace.records.size() << '\n';
}

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace detail

// Malformed rows are skipped and reported in `problems`; the trace is then
// marked incomplete. Header problems (missing metadata, unknown major
// version) throw TraceFormatError.
inline SimTrace read_trace_csv(std::istream& in) {
  SimTrace trace;
  trace.complete = false;
  bool saw_header = false;
  bool saw_end = false;
  bool saw_version = false;
  bool saw_nodes = false;
  std::string line;
  std::size_t lineno = 0;
  std::size_t rows = 0;
  std::size_t declared_rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body(line);
      body.remove_prefix(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const auto colon = body.find(':');
      if (body.starts_with("end")) {
        saw_end = true;
        const auto eq = body.find("rows=");
        if (eq != std::string_view::npos) detail::parse_int(body.substr(eq + 5), declared_rows);
        continue;
      }
      if (colon == std::string_view::npos) continue;
      const std::string key(body.substr(0, colon));
      std::string_view value = body.substr(colon + 1);
      while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
      auto& m = trace.meta;
      if (key == "format_version") {
        m.format_version = std::string(value);
        int major = 0;
        const auto dot = value.find('.');
        if (!detail::parse_int(value.substr(0, dot), major) || major != kTraceFormatMajor) {
          throw TraceFormatError("unsupported trace format_version '" + std::string(value) + "'");
        }
        saw_version = true;
      } else if (key == "nodes") {
        saw_nodes = detail::parse_int(value, m.nodes);
      } else if (key == "sinks") {
        detail::parse_int(value, m.sinks);
      } else if (key == "max_level") {
        detail::parse_int(value, m.max_level);
      } else if (key == "mate_threshold") {
        detail::parse_int(value, m.mate_threshold);
      } else if (key == "duration_ms") {
        if (auto d = parse_ms(value)) m.duration = *d;
      }
      continue;
    }
    if (!saw_header) {
      if (line != kTraceHeader) throw TraceFormatError("line " + std::to_string(lineno) + ": expected column header");
      if (!saw_version) throw TraceFormatError("missing '# format_version' comment");
      if (!saw_nodes) throw TraceFormatError("missing '# nodes' comment");
      saw_header = true;
      continue;
    }
    auto bad = [&](const std::string& why) {
      trace.problems.push_back("line " + std::to_string(lineno) + ": " + why);
    };
    const auto f = detail::split_csv(line);
    if (f.size() != 9) {
      bad("expected 9 fields, got " + std::to_string(f.size()));
      continue;
    }
    TraceRecord r;
    const auto t = parse_ms(f[0]);
    const auto kind = parse_trace_kind(f[1]);
    if (!t) {
      bad("bad time_ms");
      continue;
    }
    if (!kind) {
      bad("unknown kind '" + std::string(f[1]) + "'");
      continue;
    }
    r.time = *t;
    r.kind = *kind;
    if (!detail::parse_int(f[2], r.node)) {
      bad("bad node");
      continue;
    }
    if (!f[3].empty()) {
      NodeId p = 0;
      if (!detail::parse_int(f[3], p)) {
        bad("bad peer");
        continue;
      }
      r.peer = p;
    }
    if (!detail::parse_int(f[4], r.epoch)) {
      bad("bad epoch");
      continue;
    }
    if (!f[5].empty()) {
      int ed = 0;
      if (!detail::parse_int(f[5], ed)) {
        bad("bad ed");
        continue;
      }
      r.ed = ed;
    }
    if (!f[6].empty()) {
      int level = 0;
      if (!detail::parse_int(f[6], level)) {
        bad("bad level");
        continue;
      }
      r.level = level;
    }
    if (!f[7].empty()) {
      auto v = decode_vector(f[7], trace.meta.nodes, trace.meta.max_level);
      if (!v) {
        bad("vector does not decode to " + std::to_string(trace.meta.nodes) + " entries");
        continue;
      }
      r.payload = static_cast<std::int32_t>(trace.payloads.size());
      trace.payloads.push_back(std::move(*v));
    }
    if (!f[8].empty()) {
      if (f[8] != "0" && f[8] != "1") {
        bad("bad crc_ok");
        continue;
      }
      r.crc_ok = f[8] == "1";
    }
    if (!trace.records.empty() && r.time < trace.records.back().time) {
      bad("row out of time order");
      continue;
    }
    const bool needs_peer = r.kind == TraceKind::rx || r.kind == TraceKind::beacon_rx ||
                            r.kind == TraceKind::level_change || r.kind == TraceKind::collision ||
                            r.kind == TraceKind::loss;
    if (needs_peer && !r.peer) {
      bad("missing peer");
      continue;
    }
    if ((r.kind == TraceKind::rx || r.kind == TraceKind::tx) && !r.is_data()) {
      bad("data row without vector");
      continue;
    }
    if (r.kind == TraceKind::level_change && !r.level) {
      bad("level_change without level");
      continue;
    }
    trace.records.push_back(std::move(r));
    ++rows;
  }
  if (!saw_header) throw TraceFormatError("no trace header found");
  trace.complete = saw_end && trace.problems.empty() && declared_rows == rows;
  if (!saw_end) trace.problems.push_back("trace truncated: end marker missing");
  if (saw_end && declared_rows != rows) {
    trace.problems.push_back("end marker declares " + std::to_string(declared_rows) + " rows, read " +
                             std::to_string(rows));
  }
  return trace;
}

}  // namespace groupsense
