#include "menn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "menn/error.hpp"

namespace menn {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::optional<double> parse_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

}  // namespace

void LabeledDataset::validate() const {
  const std::size_t n = labels.size();
  if (n < 2) throw InputError("dataset needs at least 2 points, has " + std::to_string(n));
  if (has_features() && static_cast<std::size_t>(features.rows()) != n) {
    throw InputError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                     std::to_string(n) + " labels");
  }
  if (!has_features() && !gram) throw InputError("dataset has neither features nor a Gram matrix");
  if (gram && (static_cast<std::size_t>(gram->rows()) != n ||
               static_cast<std::size_t>(gram->cols()) != n)) {
    throw InputError("Gram matrix shape does not match the label count");
  }
  if (num_classes < 1) throw InputError("dataset has no classes");
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InputError("label " + std::to_string(y) + " out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw InputError("class " + std::to_string(c) + " has no members");
    }
  }
}

LabeledDataset parse_csv(std::istream& in, LabelColumn label_column,
                         const std::optional<std::map<std::string, int>>& label_map) {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const bool may_be_header = first_content;
    first_content = false;
    const auto fields = split_fields(line);
    if (fields.size() < 2) {
      throw InputError("line " + std::to_string(line_no) + ": expected features and a label");
    }
    const std::size_t label_at = label_column == LabelColumn::kFirst ? 0 : fields.size() - 1;
    std::vector<double> values;
    values.reserve(fields.size() - 1);
    bool numeric = true;
    std::size_t bad_field = 0;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (f == label_at) continue;
      auto v = parse_real(fields[f]);
      if (!v) {
        numeric = false;
        bad_field = f;
        break;
      }
      values.push_back(*v);
    }
    if (!numeric) {
      if (may_be_header) continue;  // header row
      throw InputError("line " + std::to_string(line_no) + ": non-numeric feature '" +
                       fields[bad_field] + "'");
    }
    if (width == 0) {
      width = fields.size();
    } else if (fields.size() != width) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                       " fields, found " + std::to_string(fields.size()));
    }
    rows.push_back(std::move(values));
    raw_labels.push_back(fields[label_at]);
  }
  if (rows.empty()) throw InputError("no data rows");

  LabeledDataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  data.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }

  std::map<std::string, int> codes;
  if (label_map) {
    codes = *label_map;
    int max_code = -1;
    for (const auto& [name, code] : codes) max_code = std::max(max_code, code);
    data.num_classes = max_code + 1;
    data.class_names.assign(static_cast<std::size_t>(data.num_classes), "");
    for (const auto& [name, code] : codes) {
      if (code < 0) throw InputError("label map code for '" + name + "' is negative");
      data.class_names[static_cast<std::size_t>(code)] = name;
    }
  }
  data.labels.reserve(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i) {
    const auto& name = raw_labels[i];
    auto it = codes.find(name);
    if (it == codes.end()) {
      if (label_map) throw InputError("row " + std::to_string(i + 1) + ": unknown label '" + name + "'");
      it = codes.emplace(name, data.num_classes++).first;
      data.class_names.push_back(name);
    }
    data.labels.push_back(it->second);
  }
  data.validate();
  return data;
}

LabeledDataset load_csv(const std::string& path, LabelColumn label_column,
                        const std::optional<std::map<std::string, int>>& label_map) {
  auto in = open_or_throw(path);
  try {
    return parse_csv(in, label_column, label_map);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_csv(std::ostream& out, const LabeledDataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) out << format_real(data.features(row, j)) << ',';
    const int y = data.labels[i];
    if (static_cast<std::size_t>(y) < data.class_names.size() && !data.class_names[static_cast<std::size_t>(y)].empty()) {
      out << data.class_names[static_cast<std::size_t>(y)];
    } else {
      out << y;
    }
    out << '\n';
  }
}

Eigen::MatrixXd parse_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> values;
    for (const auto& field : split_fields(line)) {
      auto v = parse_real(field);
      if (!v) throw InputError("line " + std::to_string(line_no) + ": non-numeric entry '" + field + "'");
      values.push_back(*v);
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw InputError("line " + std::to_string(line_no) + ": ragged row");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError("empty matrix file");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  auto in = open_or_throw(path);
  try {
    return parse_matrix_csv(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

LabeledDataset load_gram_dataset(const std::string& gram_path, const std::string& labels_path) {
  LabeledDataset data;
  data.gram = load_matrix_csv(gram_path);
  if (data.gram->rows() != data.gram->cols()) throw InputError(gram_path + ": Gram matrix is not square");
  auto in = open_or_throw(labels_path);
  std::map<std::string, int> codes;
  std::string line;
  while (std::getline(in, line)) {
    const auto name = trim(line);
    if (name.empty()) continue;
    auto it = codes.find(name);
    if (it == codes.end()) {
      it = codes.emplace(name, data.num_classes++).first;
      data.class_names.push_back(name);
    }
    data.labels.push_back(it->second);
  }
  data.features.resize(static_cast<Eigen::Index>(data.labels.size()), 0);
  data.validate();
  return data;
}

LabeledDataset subset(const LabeledDataset& data, std::span<const std::size_t> indices) {
  LabeledDataset out;
  out.num_classes = data.num_classes;
  out.class_names = data.class_names;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), data.features.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= data.size()) throw InputError("subset: index out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = data.features.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(data.labels[indices[r]]);
  }
  if (data.gram) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t a = 0; a < indices.size(); ++a) {
      for (std::size_t b = 0; b < indices.size(); ++b) {
        g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
            (*data.gram)(static_cast<Eigen::Index>(indices[a]), static_cast<Eigen::Index>(indices[b]));
      }
    }
    out.gram = std::move(g);
  }
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& train_features) {
  if (train_features.rows() == 0) throw InputError("standardize: empty training set");
  Standardizer s;
  s.mean_ = train_features.colwise().mean().transpose();
  s.scale_.resize(train_features.cols());
  for (Eigen::Index j = 0; j < train_features.cols(); ++j) {
    const double var = (train_features.col(j).array() - s.mean_(j)).square().mean();
    s.scale_(j) = var > 0.0 ? std::sqrt(var) : 0.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& features) const {
  if (features.cols() != mean_.size()) throw InputError("standardize: feature dimension mismatch");
  Eigen::MatrixXd out(features.rows(), features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    if (scale_(j) == 0.0) {
      out.col(j).setZero();
    } else {
      out.col(j) = (features.col(j).array() - mean_(j)) / scale_(j);
    }
  }
  return out;
}

LabeledDataset Standardizer::transform(const LabeledDataset& data) const {
  LabeledDataset out = data;
  out.features = transform(data.features);
  return out;
}

void SplitPlan::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InputError("train fraction must lie in (0,1)");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw InputError("validation fraction must lie in (0,1)");
  }
  if (runs < 1) throw InputError("split plan needs at least one run");
}

void seeded_shuffle(std::vector<std::size_t>& items, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
}

namespace {

std::vector<std::vector<std::size_t>> members_by_class(const LabeledDataset& data) {
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) members[static_cast<std::size_t>(data.labels[i])].push_back(i);
  return members;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the combined inputs
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<SplitIndices> make_splits(const LabeledDataset& data, const SplitPlan& plan) {
  plan.validate();
  data.validate();
  const auto members = members_by_class(data);
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].size() < 3) {
      throw InputError("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                       " members; stratified splitting needs at least 3");
    }
  }
  std::vector<SplitIndices> splits;
  for (int run = 0; run < plan.runs; ++run) {
    SplitIndices split;
    for (std::size_t c = 0; c < members.size(); ++c) {
      auto order = members[c];
      seeded_shuffle(order, mix_seed(plan.seed, static_cast<std::uint64_t>(run), c));
      const std::size_t total = order.size();
      std::size_t test = static_cast<std::size_t>(std::lround((1.0 - plan.train_fraction) * static_cast<double>(total)));
      test = std::clamp<std::size_t>(test, 1, total - 2);
      std::size_t val = static_cast<std::size_t>(
          std::lround(plan.validation_fraction * static_cast<double>(total - test)));
      val = std::clamp<std::size_t>(val, 1, total - test - 1);
      split.test.insert(split.test.end(), order.begin(), order.begin() + static_cast<long>(test));
      split.validation.insert(split.validation.end(), order.begin() + static_cast<long>(test),
                              order.begin() + static_cast<long>(test + val));
      split.train.insert(split.train.end(), order.begin() + static_cast<long>(test + val), order.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

std::vector<std::size_t> stratified_sample(const LabeledDataset& data, std::size_t n, std::uint64_t seed) {
  data.validate();
  if (n > data.size()) throw InputError("stratified_sample: requested more rows than available");
  const auto members = members_by_class(data);
  const double ratio = static_cast<double>(n) / static_cast<double>(data.size());
  std::vector<std::size_t> quota(members.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    const double exact = ratio * static_cast<double>(members[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++quota[remainders[r % remainders.size()].second];
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto order = members[c];
    seeded_shuffle(order, mix_seed(seed, 0xfeed, c));
    picked.insert(picked.end(), order.begin(), order.begin() + static_cast<long>(std::min(quota[c], order.size())));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

LabeledDataset make_blobs(int n_per_class, int num_classes, double separation, std::uint64_t seed) {
  if (n_per_class < 1 || num_classes < 1 || !(separation > 0.0)) {
    throw InputError("make_blobs: parameters must be positive");
  }
  const int dim = std::max(num_classes, 2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset data;
  data.num_classes = num_classes;
  data.features.resize(static_cast<Eigen::Index>(n_per_class) * num_classes, dim);
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    data.class_names.push_back("c" + std::to_string(c));
    for (int i = 0; i < n_per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j) data.features(row, j) = normal(rng);
      data.features(row, c) += separation;
      data.labels.push_back(c);
    }
  }
  return data;
}

LabeledDataset make_moons(int n_per_class, double jitter, int noise_dims, double noise_scale,
                          std::uint64_t seed) {
  if (n_per_class < 1 || noise_dims < 0) throw InputError("make_moons: invalid parameters");
  const double pi = std::acos(-1.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, pi);
  LabeledDataset data;
  data.num_classes = 2;
  data.class_names = {"upper", "lower"};
  data.features.resize(2 * static_cast<Eigen::Index>(n_per_class), 2 + noise_dims);
  Eigen::Index row = 0;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      const double t = angle(rng);
      if (c == 0) {
        data.features(row, 0) = std::cos(t);
        data.features(row, 1) = std::sin(t);
      } else {
        data.features(row, 0) = 1.0 - std::cos(t);
        data.features(row, 1) = 0.5 - std::sin(t);
      }
      data.features(row, 0) += jitter * normal(rng);
      data.features(row, 1) += jitter * normal(rng);
      for (int j = 0; j < noise_dims; ++j) data.features(row, 2 + j) = noise_scale * normal(rng);
      data.labels.push_back(c);
    }
  }
  return data;
}

}  // namespace menn
