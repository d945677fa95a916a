#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "menn/error.hpp"
#include "menn/experiment.hpp"

namespace menn {

namespace {

using nlohmann::json;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string percent_cell(const Summary& s) {
  if (s.count == 0) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f \xC2\xB1 %.2f", 100.0 * s.mean, 100.0 * s.stddev);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // Column widths count code points so the +- sign lines up.
  std::size_t shown = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++shown;
  }
  return shown >= width ? s + " " : s + std::string(width - shown, ' ');
}

std::string emit_table(const ExperimentReport& report, bool include_timing) {
  std::ostringstream out;
  out << report.dataset << " (n=" << report.points << ", D=" << report.dimension
      << ", classes=" << report.classes << ", k=" << report.k << ", runs=" << report.split.runs
      << ")\n";
  constexpr std::size_t kLabel = 12, kCell = 18;
  out << pad("", kLabel);
  for (const auto& a : report.algorithms) out << pad(to_string(a.algorithm), kCell);
  out << "\n" << pad("LOO error", kLabel);
  for (const auto& a : report.algorithms) out << pad(percent_cell(a.loo()), kCell);
  out << "\n" << pad("Test error", kLabel);
  for (const auto& a : report.algorithms) out << pad(percent_cell(a.test()), kCell);
  out << "\n";
  if (include_timing) {
    out << pad("Seconds", kLabel);
    for (const auto& a : report.algorithms) {
      std::vector<double> secs;
      for (const auto& r : a.runs) secs.push_back(r.seconds);
      const Summary s = summarize(secs);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2f", s.mean);
      out << pad(s.count ? buf : "-", kCell);
    }
    out << "\n";
  }
  return out.str();
}

std::string emit_csv(const ExperimentReport& report, bool include_timing) {
  std::ostringstream out;
  out << "dataset,algorithm,run,metric,value\n";
  for (const auto& a : report.algorithms) {
    const std::string prefix = report.dataset + "," + to_string(a.algorithm) + ",";
    for (const auto& r : a.runs) {
      const std::string row = prefix + std::to_string(r.run) + ",";
      out << row << "loo_error," << format_real(r.loo_error) << "\n";
      out << row << "test_error," << format_real(r.test_error) << "\n";
      out << row << "width," << format_real(r.width) << "\n";
      out << row << "lambda," << format_real(r.lambda) << "\n";
      out << row << "converged," << (r.converged ? 1 : 0) << "\n";
      if (include_timing) out << row << "seconds," << format_real(r.seconds) << "\n";
    }
  }
  return out.str();
}

// JSON has no NaN; null stands in.
json real(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double real_of(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json reals(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(real(x));
  return arr;
}

std::vector<double> reals_of(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(real_of(x));
  return v;
}

std::string emit_jsonl(const ExperimentReport& report, bool include_timing) {
  std::ostringstream out;
  json header = {
      {"type", "header"},
      {"dataset", report.dataset},
      {"points", report.points},
      {"dimension", report.dimension},
      {"classes", report.classes},
      {"k", report.k},
      {"split",
       {{"seed", report.split.seed},
        {"train_fraction", report.split.train_fraction},
        {"validation_fraction", report.split.validation_fraction},
        {"runs", report.split.runs}}},
      {"width_grid", reals(report.width_grid)},
      {"lambda_grid", reals(report.lambda_grid)},
      {"algorithms", json::array()},
  };
  for (const auto& a : report.algorithms) header["algorithms"].push_back(to_string(a.algorithm));
  out << header.dump() << "\n";
  for (const auto& a : report.algorithms) {
    for (const auto& r : a.runs) {
      json row = {
          {"type", "run"},
          {"algorithm", to_string(a.algorithm)},
          {"run", r.run},
          {"loo_error", real(r.loo_error)},
          {"test_error", real(r.test_error)},
          {"width", real(r.width)},
          {"lambda", real(r.lambda)},
          {"converged", r.converged},
          {"train_size", r.train_size},
          {"validation_size", r.validation_size},
          {"test_size", r.test_size},
          {"validation_indices", r.validation_indices},
          {"test_indices", r.test_indices},
          {"selection", json::array()},
      };
      for (const auto& g : r.selection) {
        row["selection"].push_back({{"width", real(g.width)},
                                    {"lambda", real(g.lambda)},
                                    {"validation_error", real(g.validation_error)},
                                    {"converged", g.converged}});
      }
      if (include_timing) row["seconds"] = r.seconds;
      out << row.dump() << "\n";
    }
  }
  return out.str();
}

}  // namespace

ReportFormat parse_report_format(const std::string& name) {
  if (name == "table") return ReportFormat::kTable;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "jsonl" || name == "json-lines") return ReportFormat::kJsonLines;
  throw InputError("unknown report format '" + name + "' (expected table, csv or jsonl)");
}

std::string emit_report(const ExperimentReport& report, ReportFormat format, bool include_timing) {
  switch (format) {
    case ReportFormat::kTable:
      return emit_table(report, include_timing);
    case ReportFormat::kCsv:
      return emit_csv(report, include_timing);
    case ReportFormat::kJsonLines:
      return emit_jsonl(report, include_timing);
  }
  return {};
}

ExperimentReport parse_report_jsonl(const std::string& text) {
  ExperimentReport report;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        report.dataset = j.at("dataset").get<std::string>();
        report.points = j.at("points").get<std::size_t>();
        report.dimension = j.at("dimension").get<std::size_t>();
        report.classes = j.at("classes").get<int>();
        report.k = j.at("k").get<int>();
        const auto& s = j.at("split");
        report.split.seed = s.at("seed").get<std::uint64_t>();
        report.split.train_fraction = s.at("train_fraction").get<double>();
        report.split.validation_fraction = s.at("validation_fraction").get<double>();
        report.split.runs = s.at("runs").get<int>();
        report.width_grid = reals_of(j.at("width_grid"));
        report.lambda_grid = reals_of(j.at("lambda_grid"));
        for (const auto& name : j.at("algorithms")) {
          report.algorithms.push_back({parse_algorithm(name.get<std::string>()), {}});
        }
        have_header = true;
      } else if (type == "run") {
        if (!have_header) throw InputError("run record before the header");
        const Algorithm algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        AlgorithmReport* target = nullptr;
        for (auto& a : report.algorithms) {
          if (a.algorithm == algorithm) target = &a;
        }
        if (!target) throw InputError("run record for an algorithm missing from the header");
        RunResult r;
        r.run = j.at("run").get<int>();
        r.loo_error = real_of(j.at("loo_error"));
        r.test_error = real_of(j.at("test_error"));
        r.width = real_of(j.at("width"));
        r.lambda = real_of(j.at("lambda"));
        r.converged = j.at("converged").get<bool>();
        r.train_size = j.at("train_size").get<std::size_t>();
        r.validation_size = j.at("validation_size").get<std::size_t>();
        r.test_size = j.at("test_size").get<std::size_t>();
        r.validation_indices = j.at("validation_indices").get<std::vector<std::size_t>>();
        r.test_indices = j.at("test_indices").get<std::vector<std::size_t>>();
        for (const auto& g : j.at("selection")) {
          r.selection.push_back({real_of(g.at("width")), real_of(g.at("lambda")),
                                 real_of(g.at("validation_error")), g.at("converged").get<bool>()});
        }
        r.seconds = j.contains("seconds") ? j.at("seconds").get<double>() : 0.0;
        target->runs.push_back(std::move(r));
      } else {
        throw InputError("unknown record type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw InputError("report line " + std::to_string(line_no) + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError("report line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw InputError("report has no header record");
  return report;
}

}  // namespace menn
