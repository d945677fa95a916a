#include "menn/model_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "menn/error.hpp"
#include "menn/linalg.hpp"

namespace menn {
namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_field(const std::string& token, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw InputError("model line " + std::to_string(line) + ": bad number '" + token + "'");
  }
  return v;
}

}  // namespace

void write_model(std::ostream& out, const MetricModel& model) {
  const Eigen::Index n = model.cbar.rows();
  out << "menn-model v1 n=" << n << " eps=" << format_real(model.eps) << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j) out << ' ';
      out << format_real(model.cbar(i, j));
    }
    out << '\n';
  }
}

MetricModel read_model(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw InputError("model: missing header");
  std::istringstream hs(header);
  std::string magic, version, n_field, eps_field;
  hs >> magic >> version >> n_field >> eps_field;
  if (magic != "menn-model" || version != "v1" || n_field.rfind("n=", 0) != 0 ||
      eps_field.rfind("eps=", 0) != 0) {
    throw InputError("model: header must read 'menn-model v1 n=<n> eps=<eps>'");
  }
  const double n_real = parse_field(n_field.substr(2), 1);
  if (n_real < 1 || n_real != static_cast<double>(static_cast<long>(n_real))) {
    throw InputError("model: bad point count");
  }
  const auto n = static_cast<Eigen::Index>(n_real);
  MetricModel model;
  model.eps = parse_field(eps_field.substr(4), 1);
  model.cbar.resize(n, n);
  std::string line;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw InputError("model: expected " + std::to_string(n) + " rows");
    std::istringstream ls(line);
    std::string token;
    Eigen::Index j = 0;
    while (ls >> token) {
      if (j >= n) throw InputError("model line " + std::to_string(i + 2) + ": too many entries");
      model.cbar(i, j++) = parse_field(token, static_cast<std::size_t>(i + 2));
    }
    if (j != n) throw InputError("model line " + std::to_string(i + 2) + ": too few entries");
  }
  if (!linalg::is_symmetric(model.cbar, 1e-12)) throw InputError("model: C is not symmetric");
  model.rank_estimate = rank_estimate(linalg::symmetric_eigen(model.cbar).values);
  model.converged = true;
  return model;
}

void save_model(const std::string& path, const MetricModel& model) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_model(out, model);
  if (!out) throw InputError("error writing '" + path + "'");
}

MetricModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_model(in);
}

}  // namespace menn
