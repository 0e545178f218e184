#pragma once

#include <cctype>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "icph/model.hpp"
#include "icph/simulate.hpp"

namespace icph {

// Data files are CSV with a mandatory header: id, L, R, then one column per
// covariate. R may be the token "inf" (case-insensitive) for right-censored
// rows; (L, R) = (0, 0) encodes an instantaneous failure. Censoring
// indicators are derived on load, never stored.

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail_io {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline bool is_inf_token(std::string t) {
  for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return t == "inf" || t == "+inf" || t == "infinity";
}

inline double parse_number(const std::string& field, int line_no, const std::string& what) {
  const std::string t = trim(field);
  if (is_inf_token(t)) return kInf;
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": cannot parse " + what + " '" +
                     field + "'");
  }
  if (pos != t.size())
    throw InputError("line " + std::to_string(line_no) + ": cannot parse " + what + " '" +
                     field + "'");
  return v;
}

inline std::string fmt(double v, const char* spec = "%.17g") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace detail_io

struct LoadedDataset {
  Dataset data;
  std::vector<std::string> ids;
};

inline LoadedDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "': empty file");
  const auto header = detail_io::split_csv_line(line);
  if (header.size() < 3 || detail_io::trim(header[0]) != "id" ||
      detail_io::trim(header[1]) != "L" || detail_io::trim(header[2]) != "R")
    throw InputError("'" + path + "': header must start with id,L,R");

  LoadedDataset out;
  for (std::size_t c = 3; c < header.size(); ++c)
    out.data.covariate_names.push_back(detail_io::trim(header[c]));
  const int r = static_cast<int>(out.data.covariate_names.size());

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail_io::trim(line).empty()) continue;
    const auto fields = detail_io::split_csv_line(line);
    if (fields.size() != header.size())
      throw InputError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    const std::string id = detail_io::trim(fields[0]);
    const double L = detail_io::parse_number(fields[1], line_no, "L");
    const double R = detail_io::parse_number(fields[2], line_no, "R");
    VectorXd x(r);
    for (int c = 0; c < r; ++c)
      x(c) = detail_io::parse_number(fields[3 + c], line_no, out.data.covariate_names[c]);
    try {
      out.data.observations.push_back(make_observation(L, R, std::move(x)));
    } catch (const std::exception& ex) {
      throw InputError("line " + std::to_string(line_no) + " (id '" + id +
                       "'): " + ex.what());
    }
    out.ids.push_back(id);
  }
  if (out.data.observations.empty()) throw InputError("'" + path + "': no data rows");
  return out;
}

inline void write_dataset_csv(const std::string& path, const Dataset& data,
                              const std::vector<std::string>* ids = nullptr) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "id,L,R";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const Observation& o = data.observations[i];
    out << (ids ? (*ids)[i] : std::to_string(i + 1));
    out << ',' << detail_io::fmt(o.L) << ',' << detail_io::fmt(o.R);
    for (int c = 0; c < o.x.size(); ++c) out << ',' << detail_io::fmt(o.x(c));
    out << '\n';
  }
}

struct EstimateRow {
  std::string parameter;
  double estimate;
  double se;
  double lo, hi;
  bool inference = true;  // false when the covariance is unavailable
};

inline void write_estimates_csv(const std::string& path, const std::vector<EstimateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "parameter,estimate,SE,ci_lo,ci_hi\n";
  for (const auto& row : rows) {
    out << row.parameter << ',' << detail_io::fmt(row.estimate);
    if (row.inference)
      out << ',' << detail_io::fmt(row.se) << ',' << detail_io::fmt(row.lo) << ','
          << detail_io::fmt(row.hi);
    else
      out << ",NA,NA,NA";
    out << '\n';
  }
}

inline void write_survival_csv(const std::string& path, const std::vector<double>& ts,
                               const std::vector<double>& s0) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "t,S0_hat\n";
  for (std::size_t i = 0; i < ts.size(); ++i)
    out << detail_io::fmt(ts[i]) << ',' << detail_io::fmt(s0[i], "%.10g") << '\n';
}

inline void append_summary_rows(std::ostream& out, const StudySummary& s) {
  for (const auto& cell : s.cells) {
    const ParamSummary* ps[3] = {&cell.beta1, &cell.beta2, &cell.p};
    for (const auto* p : ps) {
      out << s.scenario << ',' << model_name(cell.model) << ',' << p->name << ','
          << detail_io::fmt(p->bias, "%.6g") << ','
          << (p->sd_defined ? detail_io::fmt(p->sd, "%.6g") : std::string("NA")) << ','
          << detail_io::fmt(p->ese, "%.6g") << ',' << detail_io::fmt(p->cp95, "%.6g")
          << '\n';
    }
  }
}

inline void write_summary_csv(const std::string& path, const std::vector<StudySummary>& all) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "scenario,model,parameter,Bias,SD,ESE,CP95\n";
  for (const auto& s : all) append_summary_rows(out, s);
}

inline void write_curves_csv(const std::string& path, const std::vector<StudySummary>& all) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "scenario,model,t,mean,q025,q975\n";
  for (const auto& s : all)
    for (const auto& cell : s.cells) {
      if (cell.n_used == 0) continue;
      for (std::size_t g = 0; g < s.grid.size(); ++g)
        out << s.scenario << ',' << model_name(cell.model) << ','
            << detail_io::fmt(s.grid[g], "%.6g") << ','
            << detail_io::fmt(cell.curve_mean[g], "%.6g") << ','
            << detail_io::fmt(cell.curve_q025[g], "%.6g") << ','
            << detail_io::fmt(cell.curve_q975[g], "%.6g") << '\n';
    }
}

inline void write_failures_csv(const std::string& path, const std::vector<StudySummary>& all) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "scenario,model,rep,reason\n";
  for (const auto& s : all)
    for (const auto& cell : s.cells)
      for (const auto& f : cell.failures)
        out << s.scenario << ',' << model_name(cell.model) << ',' << f.rep << ",\"" << f.reason
            << "\"\n";
}

// Flat key=value run configs ('#' starts a comment).
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail_io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(line_no) + ": expected key=value");
    kv[detail_io::trim(line.substr(0, eq))] = detail_io::trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

}  // namespace icph
