#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "foul/config.hpp"
#include "foul/errors.hpp"
#include "foul/experiment.hpp"

namespace foul {

/// Real numbers are rendered with 6 significant digits.
inline std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace detail {

inline std::string csv_real(double v) {
  return std::isnan(v) ? std::string() : format_g6(v);
}

inline std::string join_g6(const std::vector<double>& vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i > 0) out += ';';
    out += format_g6(vs[i]);
  }
  return out;
}

inline const char* kCsvHeader =
    "schema,round,stage,ra,fa,ta,mia,cos_retain,cos_forget,j_star,"
    "payload_bytes,flops,degenerate,gamma_retain,gamma_forget";

}  // namespace detail

inline void write_metrics(const std::vector<RoundRecord>& records,
                          std::ostream& out, MetricFormat format) {
  if (format == MetricFormat::csv) {
    out << detail::kCsvHeader << "\n";
    for (const auto& r : records) {
      out << RoundRecord::kSchemaVersion << ',' << r.round << ','
          << to_string(r.stage) << ',' << detail::csv_real(r.ra) << ','
          << detail::csv_real(r.fa) << ',' << detail::csv_real(r.ta) << ','
          << detail::csv_real(r.mia) << ',' << detail::csv_real(r.cos_retain)
          << ',' << detail::csv_real(r.cos_forget) << ','
          << detail::csv_real(r.j_star) << ',' << r.payload_bytes << ','
          << r.flops << ',' << (r.degenerate ? 1 : 0) << ','
          << detail::join_g6(r.gamma_retain) << ','
          << detail::join_g6(r.gamma_forget) << "\n";
    }
    return;
  }
  const auto real_or_null = [](double v) -> std::string {
    return std::isnan(v) ? "null" : format_g6(v);
  };
  const auto array_g6 = [](const std::vector<double>& vs) {
    std::string s = "[";
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (i > 0) s += ',';
      s += format_g6(vs[i]);
    }
    return s + "]";
  };
  for (const auto& r : records) {
    out << "{\"schema\":" << RoundRecord::kSchemaVersion
        << ",\"round\":" << r.round << ",\"stage\":\"" << to_string(r.stage)
        << "\",\"ra\":" << real_or_null(r.ra)
        << ",\"fa\":" << real_or_null(r.fa)
        << ",\"ta\":" << real_or_null(r.ta)
        << ",\"mia\":" << real_or_null(r.mia)
        << ",\"cos_retain\":" << real_or_null(r.cos_retain)
        << ",\"cos_forget\":" << real_or_null(r.cos_forget)
        << ",\"j_star\":" << real_or_null(r.j_star)
        << ",\"payload_bytes\":" << r.payload_bytes
        << ",\"flops\":" << r.flops
        << ",\"degenerate\":" << (r.degenerate ? "true" : "false")
        << ",\"gamma_retain\":" << array_g6(r.gamma_retain)
        << ",\"gamma_forget\":" << array_g6(r.gamma_forget) << "}\n";
  }
}

inline void emit_metrics(const std::vector<RoundRecord>& records,
                         const std::string& path, MetricFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_metrics: cannot open " + path);
  write_metrics(records, out, format);
  if (!out) throw IoError("emit_metrics: write failed for " + path);
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_optional_real(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

inline std::vector<double> parse_joined(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const auto& item : split(s, ';')) out.push_back(std::stod(item));
  return out;
}

inline Stage parse_stage(const std::string& s) {
  if (s == "learn") return Stage::learn;
  if (s == "unlearn") return Stage::unlearn;
  throw IoError("metrics: unknown stage '" + s + "'");
}

}  // namespace detail

inline std::vector<RoundRecord> read_metrics_stream(std::istream& in) {
  std::vector<RoundRecord> records;
  std::string line;
  bool first = true;
  bool jsonl = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      jsonl = line.front() == '{';
      first = false;
      if (!jsonl) {
        if (line != detail::kCsvHeader) {
          throw IoError("metrics: unexpected csv header");
        }
        continue;
      }
    }
    RoundRecord r;
    if (jsonl) {
      const nlohmann::json j = nlohmann::json::parse(line);
      const auto real_field = [&](const char* key) {
        return j.at(key).is_null()
                   ? std::numeric_limits<double>::quiet_NaN()
                   : j.at(key).get<double>();
      };
      r.round = j.at("round").get<int>();
      r.stage = detail::parse_stage(j.at("stage").get<std::string>());
      r.ra = real_field("ra");
      r.fa = real_field("fa");
      r.ta = real_field("ta");
      r.mia = real_field("mia");
      r.cos_retain = real_field("cos_retain");
      r.cos_forget = real_field("cos_forget");
      r.j_star = real_field("j_star");
      r.payload_bytes = j.at("payload_bytes").get<std::uint64_t>();
      r.flops = j.at("flops").get<std::uint64_t>();
      r.degenerate = j.at("degenerate").get<bool>();
      r.gamma_retain = j.at("gamma_retain").get<std::vector<double>>();
      r.gamma_forget = j.at("gamma_forget").get<std::vector<double>>();
    } else {
      const std::vector<std::string> f = detail::split(line, ',');
      if (f.size() != 15) {
        throw IoError("metrics: malformed csv row");
      }
      r.round = std::stoi(f[1]);
      r.stage = detail::parse_stage(f[2]);
      r.ra = detail::parse_optional_real(f[3]);
      r.fa = detail::parse_optional_real(f[4]);
      r.ta = detail::parse_optional_real(f[5]);
      r.mia = detail::parse_optional_real(f[6]);
      r.cos_retain = detail::parse_optional_real(f[7]);
      r.cos_forget = detail::parse_optional_real(f[8]);
      r.j_star = detail::parse_optional_real(f[9]);
      r.payload_bytes = std::stoull(f[10]);
      r.flops = std::stoull(f[11]);
      r.degenerate = f[12] == "1";
      r.gamma_retain = detail::parse_joined(f[13]);
      r.gamma_forget = detail::parse_joined(f[14]);
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<RoundRecord> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_metrics: cannot open " + path);
  return read_metrics_stream(in);
}

}  // namespace foul
