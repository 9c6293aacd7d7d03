#include "stratsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace stratsim {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace and CR
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double parse_number(const std::string& cell, int line_no, const std::string& col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ", column '" + col +
                     "': expected a number, got '" + cell + "'");
  }
}

// Deterministic uniform draw in [0, k) regardless of standard library.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t k) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % k;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % k;
}

std::vector<Vector> feature_list(const Dataset& data) {
  std::vector<Vector> xs;
  xs.reserve(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) xs.push_back(data.x(i));
  return xs;
}

std::vector<int> label_list(const Dataset& data) {
  std::vector<int> ys;
  ys.reserve(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) ys.push_back(data.y(i));
  return ys;
}

Dataset subsample_per_class(const Dataset& data, int per_class,
                            std::optional<std::uint64_t> seed) {
  std::vector<int> pos, neg;
  for (int i = 0; i < data.n(); ++i) (data.y(i) == 1 ? pos : neg).push_back(i);
  if (seed) {
    std::mt19937_64 rng(*seed);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
  }
  // Default keeps the first k of each class in file order.
  if (static_cast<int>(pos.size()) > per_class) pos.resize(static_cast<std::size_t>(per_class));
  if (static_cast<int>(neg.size()) > per_class) neg.resize(static_cast<std::size_t>(per_class));
  std::vector<int> keep = pos;
  keep.insert(keep.end(), neg.begin(), neg.end());
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.users.reserve(keep.size());
  for (int i : keep) out.users.push_back(data.users[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

void normalize_features(Dataset& data) {
  const int n = data.n();
  if (n == 0) return;
  const int d = data.dim();
  for (int c = 0; c < d; ++c) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += data.users[static_cast<std::size_t>(i)].features(c);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dev = data.users[static_cast<std::size_t>(i)].features(c) - mean;
      var += dev * dev;
    }
    var /= n;
    const double sd = std::sqrt(var);
    for (int i = 0; i < n; ++i) {
      double& v = data.users[static_cast<std::size_t>(i)].features(c);
      // Constant columns carry no signal; zero them instead of dividing by 0.
      v = sd > 0.0 ? (v - mean) / sd : 0.0;
    }
  }
}

FilterResult realizability_filter(const Dataset& data, double C, const FamilySpec& family,
                                  const TrainerConfig& cfg) {
  FilterResult result;
  result.dataset = data;
  std::vector<int> original(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) original[static_cast<std::size_t>(i)] = i;

  for (int pass = 0; pass < 3; ++pass) {
    if (result.dataset.n() == 0)
      throw FilterFailedError("realizability filter removed every point");
    const SoftMarginFit fit = soft_margin_fit(feature_list(result.dataset),
                                              label_list(result.dataset), family, C, cfg);
    if (!fit.misclassified.empty()) {
      std::vector<bool> drop(static_cast<std::size_t>(result.dataset.n()), false);
      for (int i : fit.misclassified) {
        drop[static_cast<std::size_t>(i)] = true;
        result.removed.push_back(original[static_cast<std::size_t>(i)]);
      }
      Dataset kept;
      std::vector<int> kept_ids;
      for (int i = 0; i < result.dataset.n(); ++i)
        if (!drop[static_cast<std::size_t>(i)]) {
          kept.users.push_back(result.dataset.users[static_cast<std::size_t>(i)]);
          kept_ids.push_back(original[static_cast<std::size_t>(i)]);
        }
      result.dataset = std::move(kept);
      original = std::move(kept_ids);
    }
    // Done once the remainder is hard-margin separable.
    try {
      if (result.dataset.n() > 0)
        min_norm_separator(feature_list(result.dataset), label_list(result.dataset), family,
                           cfg);
      std::sort(result.removed.begin(), result.removed.end());
      return result;
    } catch (const InfeasibleSupportError&) {
      // another soft pass
    }
  }
  throw FilterFailedError("dataset still inseparable after three filter passes");
}

LoadResult load_csv(const std::string& path, const CsvSchema& schema,
                    const PreprocessSpec& prep) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::vector<std::vector<std::string>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_line(line));
  }
  if (rows.empty()) throw ParseError("'" + path + "' contains no data");

  std::vector<ColumnSpec> columns = schema.columns;
  if (schema.has_header) {
    const auto header = rows.front();
    rows.erase(rows.begin());
    if (rows.empty()) throw ParseError("'" + path + "' has a header but no rows");
    if (columns.empty()) {
      // No explicit schema: every column is a numeric feature except a
      // final "label"/"class" column.
      for (const auto& name : header) columns.push_back({name, ColumnSpec::Role::Feature});
      if (!columns.empty()) columns.back().role = ColumnSpec::Role::Label;
    } else {
      if (header.size() != columns.size())
        throw ParseError("schema lists " + std::to_string(columns.size()) +
                         " columns but '" + path + "' has " + std::to_string(header.size()));
      for (std::size_t c = 0; c < columns.size(); ++c)
        if (!columns[c].name.empty() && columns[c].name != header[c])
          throw ParseError("schema column '" + columns[c].name + "' does not match header '" +
                           header[c] + "'");
    }
  } else if (columns.empty()) {
    for (std::size_t c = 0; c < rows.front().size(); ++c)
      columns.push_back({"col" + std::to_string(c), ColumnSpec::Role::Feature});
    columns.back().role = ColumnSpec::Role::Label;
  }

  int label_col = -1;
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].role == ColumnSpec::Role::Label) {
      if (label_col >= 0) throw ParseError("schema declares more than one label column");
      label_col = static_cast<int>(c);
    }
  if (label_col < 0) throw ParseError("schema declares no label column");

  // Discover one-hot categories in file order so the layout is stable.
  std::vector<std::vector<std::string>> categories(columns.size());
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw ParseError("row with " + std::to_string(row.size()) + " cells, expected " +
                       std::to_string(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c].role != ColumnSpec::Role::Categorical) continue;
      auto& cats = categories[c];
      if (std::find(cats.begin(), cats.end(), row[c]) == cats.end()) cats.push_back(row[c]);
    }
  }

  LoadResult result;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].role == ColumnSpec::Role::Feature)
      result.feature_names.push_back(columns[c].name);
    else if (columns[c].role == ColumnSpec::Role::Categorical)
      for (const auto& cat : categories[c])
        result.feature_names.push_back(columns[c].name + "=" + cat);
  }
  const int d = static_cast<int>(result.feature_names.size());
  if (d == 0) throw ParseError("schema declares no feature columns");

  int row_no = schema.has_header ? 2 : 1;
  for (const auto& row : rows) {
    UserRecord rec;
    rec.features = Vector::Zero(d);
    int k = 0;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      switch (columns[c].role) {
        case ColumnSpec::Role::Feature:
          rec.features(k++) = parse_number(row[c], row_no, columns[c].name);
          break;
        case ColumnSpec::Role::Categorical: {
          const auto& cats = categories[c];
          const auto it = std::find(cats.begin(), cats.end(), row[c]);
          rec.features(k + static_cast<int>(it - cats.begin())) = 1.0;
          k += static_cast<int>(cats.size());
          break;
        }
        case ColumnSpec::Role::Label: {
          if (schema.label_map.empty()) {
            const double v = parse_number(row[c], row_no, columns[c].name);
            if (v != 1.0 && v != -1.0 && v != 0.0)
              throw ParseError("line " + std::to_string(row_no) +
                               ": label '" + row[c] + "' needs a label_map entry");
            rec.label = v == 1.0 ? 1 : -1;
          } else {
            const auto it = schema.label_map.find(row[c]);
            if (it == schema.label_map.end())
              throw ParseError("line " + std::to_string(row_no) + ": label '" + row[c] +
                               "' missing from label_map");
            rec.label = it->second;
          }
          break;
        }
        case ColumnSpec::Role::Ignore:
          break;
      }
    }
    result.dataset.users.push_back(std::move(rec));
    ++row_no;
  }

  if (prep.filter_C) {
    FilterResult filtered = realizability_filter(
        result.dataset, *prep.filter_C, FamilySpec::linear(FeatureMap::AppendOne));
    result.dataset = std::move(filtered.dataset);
    result.removed_by_filter = std::move(filtered.removed);
  }
  if (prep.subsample_per_class)
    result.dataset =
        subsample_per_class(result.dataset, *prep.subsample_per_class, prep.subsample_seed);
  if (prep.normalize) normalize_features(result.dataset);
  return result;
}

// ---- built-in scenarios -------------------------------------------------

namespace {

Dataset five_point_dataset() {
  const double coords[5][2] = {{1, 1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
  const int labels[5] = {1, 1, -1, -1, -1};
  Dataset data;
  for (int i = 0; i < 5; ++i) {
    UserRecord rec;
    rec.features = Vector(2);
    rec.features << coords[i][0], coords[i][1];
    rec.label = labels[i];
    data.users.push_back(std::move(rec));
  }
  return data;
}

Scenario make_five_point() {
  Scenario s;
  s.name = "five_point";
  s.dataset = five_point_dataset();
  Vector w1(3), w2(3);
  w1 << 1, 0, 0;
  w2 << 0, 1, 0;
  s.models = {Model(LinearModel{w1, FeatureMap::AppendOne}),
              Model(LinearModel{w2, FeatureMap::AppendOne})};
  s.config.q = 2.0;
  s.config.user_tie_policy = TiePolicy::even_split();
  s.loss_spec = LossSpec::hinge_linear();
  return s;
}

Scenario make_threshold_line(int n) {
  if (n < 1) throw std::invalid_argument("threshold_line: size must be >= 1");
  Scenario s;
  s.name = "threshold_line";
  for (int i = 0; i < n; ++i) {
    UserRecord rec;
    rec.features = Vector::Constant(1, -0.7 * i);
    rec.label = 1;
    s.dataset.users.push_back(std::move(rec));
  }
  s.models = {Model(ThresholdModel{0.5, 1.0})};
  s.config.q = 2.0;
  s.config.user_tie_policy = TiePolicy::concentrate(1);
  s.loss_spec = LossSpec::hinge_linear();
  return s;
}

Scenario make_threshold_services(int m) {
  if (m < 1) throw std::invalid_argument("threshold_services: size must be >= 1");
  Scenario s;
  s.name = "threshold_services";
  UserRecord rec;
  rec.features = Vector::Zero(1);
  rec.label = -1;
  s.dataset.users.push_back(std::move(rec));
  for (int j = 1; j <= m; ++j)
    s.models.push_back(Model(ThresholdModel{static_cast<double>(j + 1), 1.0}));
  s.config.q = 2.0;
  // All services tie at utility 1, so the user must pick one at a time for
  // the one-service-per-step schedule the scenario is meant to show.
  s.config.user_tie_policy = TiePolicy::concentrate(1);
  s.loss_spec = LossSpec::hinge_linear();
  return s;
}

}  // namespace

Scenario builtin_scenario(const std::string& name, int size) {
  if (name == "five_point") return make_five_point();
  if (name == "threshold_line") return make_threshold_line(size > 0 ? size : 5);
  if (name == "threshold_services") return make_threshold_services(size > 0 ? size : 3);
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::vector<std::string> builtin_scenario_names() {
  return {"five_point", "threshold_line", "threshold_services"};
}

MemoryMatrix reveal_seed_users(const Dataset& data, int m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("reveal_seed_users: m must be >= 1");
  std::vector<int> pos, neg;
  for (int i = 0; i < data.n(); ++i) (data.y(i) == 1 ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw std::invalid_argument("reveal_seed_users: need at least one user per class");

  std::mt19937_64 rng(seed);
  MemoryMatrix memory = MemoryMatrix::zero(data.n(), m);
  for (int j = 0; j < m; ++j) {
    memory.entries(pos[uniform_index(rng, pos.size())], j) = 1.0;
    memory.entries(neg[uniform_index(rng, neg.size())], j) = 1.0;
  }
  return memory;
}

SimState seeded_initial_state(const Dataset& data, int m, std::uint64_t seed,
                              const FamilySpec& family, const LossSpec& spec,
                              const DynamicsConfig& cfg, const TrainerConfig& tcfg) {
  const MemoryMatrix memory = reveal_seed_users(data, m, seed);
  std::vector<Model> models;
  models.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (int i = 0; i < data.n(); ++i)
      if (memory(i, j) > 0.0) {
        xs.push_back(data.x(i));
        ys.push_back(data.y(i));
      }
    models.push_back(min_norm_separator(xs, ys, family, tcfg));
  }
  return make_initial_state(std::move(models), data, spec, cfg, &memory);
}

}  // namespace stratsim
