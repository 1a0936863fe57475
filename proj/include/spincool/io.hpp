#pragma once
// File output with reproducibility guarantees: every CSV cell and JSON number
// goes through fmt9 (shortest round-trip-exact 9-significant-digit form,
// locale independent), so identical runs produce byte-identical files. The
// manifest is the one deliberately non-deterministic output (timestamps,
// wall-clock timings).

#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spincool/probe.hpp"
#include "spincool/util.hpp"

namespace spincool {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);  // binary: no newline translation anywhere
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(std::string columns) { buf_ += "# columns: " + std::move(columns) + "\n"; }

  CsvWriter& row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) buf_ += ',';
      buf_ += cells[i];
    }
    buf_ += '\n';
    return *this;
  }

  CsvWriter& row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double c : cells) s.push_back(fmt9(c));
    return row(s);
  }

  void save(const std::string& path) const { write_text(path, buf_); }
  const std::string& text() const { return buf_; }

 private:
  std::string buf_;
};

inline void write_fid_csv(const std::string& path, const FidTrace& fid) {
  CsvWriter w("time_ns,Sz");
  for (std::size_t i = 0; i < fid.t_us.size(); ++i)
    w.row({fmt9(fid.t_us[i] * 1e3), fmt9(fid.sz[i])});
  w.save(path);
}

inline void write_distribution_csv(const std::string& path, const SpectralDistribution& p) {
  CsvWriter w("freq_MHz,density_per_MHz");
  for (std::size_t i = 0; i < p.freqs.size(); ++i)
    w.row({fmt9(p.freqs[i]), fmt9(p.dens[i])});
  w.save(path);
}

// Reads a trace written by write_fid_csv (or any CSV with that header).
inline FidTrace read_fid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open FID file: " + path);
  FidTrace fid;
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.find("time_ns") != std::string::npos && line.find("Sz") != std::string::npos)
        header_seen = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected time_ns,Sz");
    char* e1 = nullptr;
    char* e2 = nullptr;
    const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
    const double t_ns = std::strtod(a.c_str(), &e1);
    const double sz = std::strtod(b.c_str(), &e2);
    if (e1 == a.c_str() || e2 == b.c_str())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed number");
    fid.t_us.push_back(t_ns * 1e-3);
    fid.sz.push_back(sz);
  }
  if (!header_seen)
    throw ConfigError(path + ": missing '# columns: time_ns,Sz' header");
  if (fid.t_us.size() < 4) throw ConfigError(path + ": too few samples");
  return fid;
}

// ---------------------------------------------------------------------------
// flat JSON (string / number / string-array values only -- all we emit)
// ---------------------------------------------------------------------------

class JsonWriter {
 public:
  JsonWriter& field(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, quote(value));
    return *this;
  }
  JsonWriter& field(const std::string& key, double value) {
    entries_.emplace_back(key, fmt9(value));
    return *this;
  }
  JsonWriter& field(const std::string& key, long long value) {
    entries_.emplace_back(key, std::to_string(value));
    return *this;
  }
  JsonWriter& field(const std::string& key, bool value) {
    entries_.emplace_back(key, value ? "true" : "false");
    return *this;
  }
  JsonWriter& field_array(const std::string& key, const std::vector<std::string>& values) {
    std::string v = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) v += ",";
      v += quote(values[i]);
    }
    v += "]";
    entries_.emplace_back(key, v);
    return *this;
  }

  std::string text() const {
    std::string out = "{\n";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      out += "  " + quote(entries_[i].first) + ": " + entries_[i].second;
      out += (i + 1 < entries_.size()) ? ",\n" : "\n";
    }
    out += "}\n";
    return out;
  }
  void save(const std::string& path) const { write_text(path, text()); }

 private:
  static std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
          if (static_cast<unsigned char>(c) < 0x20) {
            char esc[8];
            std::snprintf(esc, sizeof esc, "\\u%04x", c);
            out += esc;
          } else {
            out += c;
          }
      }
    }
    return out + "\"";
  }

  std::vector<std::pair<std::string, std::string>> entries_;
};

// ---------------------------------------------------------------------------
// run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string subcommand;
  std::string config_digest;
  std::vector<std::string> config_lines;  // canonical section.key=value echo
  std::vector<std::string> outputs;       // file names written, each exactly once
  std::vector<std::pair<std::string, double>> timings_ms;
  bool seedless = false;

  void save(const std::string& path) const {
    JsonWriter j;
    j.field("tool", std::string("spincool"));
    j.field("tool_version", std::string(kToolVersion));
    j.field("subcommand", subcommand);
    j.field("created_utc", utc_now());
    j.field("seedless", seedless);
    j.field("config_digest", config_digest);
    j.field_array("config", config_lines);
    j.field_array("outputs", outputs);
    for (const auto& [name, ms] : timings_ms) j.field("timing_" + name + "_ms", ms);
    j.save(path);
  }

  static std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }
};

}  // namespace spincool
