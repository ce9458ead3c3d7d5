#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../metrics.hpp"

namespace sde_sindy::harness {

inline constexpr const char* kCsvHeader = "method,target,dt,T,trials,diverged,err_mean,err_var";

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  // 2e-04 -> 2e-4, 1e+20 -> 1e20
  if (const auto e = s.find('e'); e != std::string::npos) {
    std::string exp = s.substr(e + 1);
    const bool negative = exp[0] == '-';
    if (exp[0] == '-' || exp[0] == '+') exp.erase(0, 1);
    exp.erase(0, std::min(exp.find_first_not_of('0'), exp.size() - 1));
    s = s.substr(0, e + 1) + (negative ? "-" : "") + exp;
  }
  return s;
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw InvalidArgument("not a number: '" + s + "'");
  return v;
}

inline std::string csv_row(const ErrorReport& r) {
  if (r.method.find_first_of(",\n\"") != std::string::npos)
    throw InvalidArgument("method name '" + r.method + "' cannot be written to CSV");
  std::string row = r.method;
  row += ',';
  row += to_string(r.target);
  for (const std::string& f :
       {format_double(r.dt), format_double(r.T), std::to_string(r.trials),
        std::to_string(r.diverged), format_double(r.err_mean), format_double(r.err_var)}) {
    row += ',';
    row += f;
  }
  return row;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out.flush()) throw Error("write failed for '" + path.string() + "'");
}

inline void emit_csv(const std::vector<ErrorReport>& reports, const std::filesystem::path& path) {
  if (reports.empty()) throw InvalidArgument("emit_csv: no reports");
  std::string text = std::string(kCsvHeader) + "\n";
  for (const auto& r : reports) text += csv_row(r) + "\n";
  write_text(path, text);
}

inline std::vector<ErrorReport> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw InvalidArgument(path.string() + ": missing or unexpected CSV header");
  std::vector<ErrorReport> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8)
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
    try {
      ErrorReport r;
      r.method = f[0];
      if (f[1] == "drift") r.target = Target::drift;
      else if (f[1] == "diffusion") r.target = Target::diffusion;
      else throw InvalidArgument("unknown target '" + f[1] + "'");
      r.dt = parse_double(f[2]);
      r.T = parse_double(f[3]);
      r.trials = std::stoi(f[4]);
      r.diverged = std::stoi(f[5]);
      r.err_mean = parse_double(f[6]);
      r.err_var = parse_double(f[7]);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// Methods in first-appearance order.
inline std::vector<std::string> method_order(const std::vector<ErrorReport>& reports) {
  std::vector<std::string> names;
  for (const auto& r : reports)
    if (std::find(names.begin(), names.end(), r.method) == names.end()) names.push_back(r.method);
  return names;
}

struct PlotOutput {
  std::vector<std::filesystem::path> written;
  std::vector<std::string> skipped;  // why each missing series was not produced
};

namespace detail {

enum class Axis { dt, T };

/// One TSV: first column the axis value, then one column per method.
inline std::string series_table(const std::vector<const ErrorReport*>& rows, Axis axis,
                                bool variance, const std::vector<std::string>& methods) {
  std::map<double, std::map<std::string, double>> table;
  for (const auto* r : rows)
    table[axis == Axis::dt ? r->dt : r->T][r->method] = variance ? r->err_var : r->err_mean;
  std::string text = axis == Axis::dt ? "dt" : "T";
  for (const auto& m : methods) text += "\t" + m;
  text += "\n";
  for (const auto& [x, by_method] : table) {
    text += format_double(x);
    for (const auto& m : methods) {
      const auto it = by_method.find(m);
      text += "\t";
      text += it == by_method.end() ? "nan" : format_double(it->second);
    }
    text += "\n";
  }
  return text;
}

}  // namespace detail

/// Per target: <prefix>_<target>_mean_vs_dt.tsv and _var_vs_dt.tsv at the
/// largest T, and _var_vs_T.tsv at `variance_dt`. A series needs at least
/// two points on its axis; missing axes are listed in `skipped`, and it is
/// an error when nothing at all can be written.
inline PlotOutput emit_plot_data(const std::vector<ErrorReport>& reports,
                                 const std::string& prefix, double variance_dt) {
  if (reports.empty()) throw InvalidArgument("emit_plot_data: no reports");
  PlotOutput out;
  for (Target target : {Target::drift, Target::diffusion}) {
    std::vector<const ErrorReport*> rows;
    for (const auto& r : reports)
      if (r.target == target) rows.push_back(&r);
    if (rows.empty()) continue;
    std::vector<ErrorReport> subset;
    for (const auto* r : rows) subset.push_back(*r);
    const auto methods = method_order(subset);
    const std::string base = prefix + "_" + std::string(to_string(target));

    double max_T = 0.0;
    std::set<double> dts, Ts;
    for (const auto* r : rows) {
      max_T = std::max(max_T, r->T);
      dts.insert(r->dt);
      Ts.insert(r->T);
    }
    if (dts.size() >= 2) {
      std::vector<const ErrorReport*> at_T;
      for (const auto* r : rows)
        if (r->T == max_T) at_T.push_back(r);
      for (bool variance : {false, true}) {
        const std::filesystem::path p =
            base + (variance ? "_var_vs_dt.tsv" : "_mean_vs_dt.tsv");
        write_text(p, detail::series_table(at_T, detail::Axis::dt, variance, methods));
        out.written.push_back(p);
      }
    } else {
      out.skipped.push_back(std::string(to_string(target)) +
                            ": vs-dt series need at least 2 dt values");
    }
    std::vector<const ErrorReport*> at_dt;
    for (const auto* r : rows)
      if (r->dt == variance_dt) at_dt.push_back(r);
    if (Ts.size() >= 2 && !at_dt.empty()) {
      const std::filesystem::path p = base + "_var_vs_T.tsv";
      write_text(p, detail::series_table(at_dt, detail::Axis::T, true, methods));
      out.written.push_back(p);
    } else {
      out.skipped.push_back(std::string(to_string(target)) +
                            ": var-vs-T series needs at least 2 T values at dt=" +
                            format_double(variance_dt));
    }
  }
  if (out.written.empty()) {
    std::string msg = "emit_plot_data: insufficient sweep coverage";
    for (const auto& s : out.skipped) msg += "; " + s;
    throw InvalidArgument(msg);
  }
  return out;
}

}  // namespace sde_sindy::harness
