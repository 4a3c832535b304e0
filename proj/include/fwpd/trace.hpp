#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "fwpd/errors.hpp"

namespace fwpd {

inline constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Per-iteration flags, serialized as semicolon-joined tokens in a fixed order.
enum TraceFlag : unsigned {
  flag_stationary = 1u << 0,        // step rule found no descent direction
  flag_degenerate = 1u << 1,        // zero direction with positive gap
  flag_converged = 1u << 2,         // gap fell to the epsilon threshold
  flag_psi_star_omitted = 1u << 3,  // bound omits the unknown psi(x*) term
  flag_hb_dynamic = 1u << 4,        // adaptive step with a separate bound vertex
  flag_opt_extra_lmo = 1u << 5,     // optimistic bound closed with a real vertex
  flag_stride_agg = 1u << 6,        // row aggregates a stride window (max gaps)
};

inline const std::pair<unsigned, const char*> kFlagTokens[] = {
    {flag_stationary, "stationary"},
    {flag_degenerate, "degenerate"},
    {flag_converged, "converged"},
    {flag_psi_star_omitted, "psi_star_omitted"},
    {flag_hb_dynamic, "hb_dynamic"},
    {flag_opt_extra_lmo, "opt_extra_lmo"},
    {flag_stride_agg, "stride_agg"},
};

inline std::string flags_to_string(unsigned flags) {
  std::string out;
  for (const auto& [bit, token] : kFlagTokens) {
    if (flags & bit) {
      if (!out.empty()) out += ';';
      out += token;
    }
  }
  return out;
}

inline unsigned flags_from_string(std::string_view text) {
  unsigned flags = 0;
  std::size_t pos = 0;
  while (pos <= text.size() && !text.empty()) {
    std::size_t end = text.find(';', pos);
    std::string_view token = text.substr(pos, end == std::string_view::npos ? end : end - pos);
    if (!token.empty()) {
      bool known = false;
      for (const auto& [bit, name] : kFlagTokens) {
        if (token == name) {
          flags |= bit;
          known = true;
          break;
        }
      }
      if (!known) throw ConfigError("unknown trace flag token: " + std::string(token));
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return flags;
}

// Shortest round-trip decimal text, locale-independent. Non-finite values use
// the fixed literals nan, inf, -inf.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw StateError("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text) {
  if (text == "nan") return kNan;
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("parse_double: bad number: " + std::string(text));
  return v;
}

inline long parse_long(std::string_view text) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("parse_long: bad integer: " + std::string(text));
  return v;
}

// One iteration of any run. primal is the objective (plus regularizer when
// composite) at the newest iterate; gap_ahead subtracts the family bound from
// it, gap_aligned subtracts the same bound from the pre-step iterate's value.
// Oracle counts are cumulative. Fields below the serialization marker are
// in-memory only.
struct TraceRecord {
  long iter = 0;
  double wall_time_s = 0.0;
  double primal = kNan;
  double lb_fw_mix = kNan;
  double lb_fw_best = kNan;
  double lb_hb = kNan;
  double lb_opt = kNan;
  double gap_aligned = kNan;
  double gap_ahead = kNan;
  double gamma_or_a = kNan;
  long lmo_calls = 0;
  long grad_calls = 0;
  long reporting_lmo = 0;
  unsigned flags = 0;
  // --- not serialized ---
  long fval_calls = 0;
  long fval_search_calls = 0;
  double lb_opt_formula = kNan;
  double lb_opt_extra = kNan;
};

inline constexpr std::string_view kCsvHeader =
    "iter,wall_time_s,primal,lb_fw_mix,lb_fw_best,lb_hb,lb_opt,gap_aligned,gap_ahead,"
    "gamma_or_a,lmo_calls,grad_calls,reporting_lmo,flags";

inline void write_csv_row(std::ostream& os, const TraceRecord& r) {
  os << r.iter << ',' << format_double(r.wall_time_s) << ',' << format_double(r.primal) << ','
     << format_double(r.lb_fw_mix) << ',' << format_double(r.lb_fw_best) << ','
     << format_double(r.lb_hb) << ',' << format_double(r.lb_opt) << ','
     << format_double(r.gap_aligned) << ',' << format_double(r.gap_ahead) << ','
     << format_double(r.gamma_or_a) << ',' << r.lmo_calls << ',' << r.grad_calls << ','
     << r.reporting_lmo << ',' << flags_to_string(r.flags) << '\n';
}

// stride > 1 keeps every stride-th row (and always the last), replacing its
// gap columns by the maximum over the window it closes so no spike is hidden.
inline void write_csv(std::ostream& os, const std::vector<TraceRecord>& trace, long stride = 1) {
  if (stride < 1) throw ConfigError("write_csv: stride must be >= 1");
  os << kCsvHeader << '\n';
  if (stride == 1) {
    for (const auto& r : trace) write_csv_row(os, r);
    return;
  }
  auto agg_max = [](double acc, double v) {
    if (std::isnan(acc)) return v;
    if (std::isnan(v)) return acc;
    return std::max(acc, v);
  };
  TraceRecord win;
  bool have = false;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceRecord& r = trace[i];
    if (!have) {
      win = r;
      have = true;
    } else {
      double ga = agg_max(win.gap_aligned, r.gap_aligned);
      double gh = agg_max(win.gap_ahead, r.gap_ahead);
      unsigned fl = win.flags | r.flags;
      win = r;
      win.gap_aligned = ga;
      win.gap_ahead = gh;
      win.flags = fl;
    }
    bool window_done = ((i + 1) % static_cast<std::size_t>(stride) == 0) || i + 1 == trace.size();
    if (window_done) {
      win.flags |= flag_stride_agg;
      write_csv_row(os, win);
      have = false;
    }
  }
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return fields;
}

inline std::vector<TraceRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("read_csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("read_csv: unexpected header: " + line);
  std::vector<TraceRecord> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 14) throw ConfigError("read_csv: expected 14 fields, got row: " + line);
    TraceRecord r;
    r.iter = parse_long(f[0]);
    r.wall_time_s = parse_double(f[1]);
    r.primal = parse_double(f[2]);
    r.lb_fw_mix = parse_double(f[3]);
    r.lb_fw_best = parse_double(f[4]);
    r.lb_hb = parse_double(f[5]);
    r.lb_opt = parse_double(f[6]);
    r.gap_aligned = parse_double(f[7]);
    r.gap_ahead = parse_double(f[8]);
    r.gamma_or_a = parse_double(f[9]);
    r.lmo_calls = parse_long(f[10]);
    r.grad_calls = parse_long(f[11]);
    r.reporting_lmo = parse_long(f[12]);
    r.flags = flags_from_string(f[13]);
    out.push_back(r);
  }
  return out;
}

}  // namespace fwpd
