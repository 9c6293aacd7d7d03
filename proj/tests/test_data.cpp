#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stratsim/data.hpp"

using namespace stratsim;

namespace {

std::string write_file(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "stratsim_data_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

std::string load_error(const std::string& path, const CsvSchema& schema,
                       const PreprocessSpec& prep = {}) {
  try {
    load_csv(path, schema, prep);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

Dataset dataset_of(const std::vector<std::vector<double>>& points,
                   const std::vector<int>& labels) {
  Dataset data;
  for (std::size_t i = 0; i < points.size(); ++i) {
    UserRecord rec;
    rec.features = Vector(static_cast<Eigen::Index>(points[i].size()));
    for (std::size_t k = 0; k < points[i].size(); ++k)
      rec.features(static_cast<Eigen::Index>(k)) = points[i][k];
    rec.label = labels[i];
    data.users.push_back(std::move(rec));
  }
  return data;
}

}  // namespace

TEST_CASE("csv with header and label_map") {
  const std::string path =
      write_file("mapped.csv", "x1,x2,group\n1.0,2.0,yes\n-1.5,0.25,no\n");
  CsvSchema schema;
  schema.columns = {{"x1", ColumnSpec::Role::Feature},
                    {"x2", ColumnSpec::Role::Feature},
                    {"group", ColumnSpec::Role::Label}};
  schema.label_map = {{"yes", 1}, {"no", -1}};
  const LoadResult result = load_csv(path, schema);
  REQUIRE(result.dataset.n() == 2);
  CHECK(result.dataset.dim() == 2);
  CHECK(result.dataset.x(0)(0) == 1.0);
  CHECK(result.dataset.x(1)(1) == 0.25);
  CHECK(result.dataset.y(0) == 1);
  CHECK(result.dataset.y(1) == -1);
  CHECK(result.feature_names == std::vector<std::string>{"x1", "x2"});
  CHECK(result.removed_by_filter.empty());
}

TEST_CASE("header without explicit schema labels the last column") {
  const std::string path = write_file("auto.csv", "a,b,target\n0.5,1,1\n0.25,-1,-1\n2,3,0\n");
  const LoadResult result = load_csv(path, CsvSchema{});
  REQUIRE(result.dataset.n() == 3);
  CHECK(result.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(result.dataset.y(0) == 1);
  CHECK(result.dataset.y(1) == -1);
  CHECK(result.dataset.y(2) == -1);  // numeric 0 counts as the negative class
}

TEST_CASE("one-hot expansion follows first-appearance order") {
  const std::string path =
      write_file("cats.csv", "f,color,y\n1,red,1\n2,blue,-1\n3,red,1\n4,green,-1\n");
  CsvSchema schema;
  schema.columns = {{"f", ColumnSpec::Role::Feature},
                    {"color", ColumnSpec::Role::Categorical},
                    {"y", ColumnSpec::Role::Label}};
  const LoadResult result = load_csv(path, schema);
  CHECK(result.feature_names ==
        std::vector<std::string>{"f", "color=red", "color=blue", "color=green"});
  REQUIRE(result.dataset.dim() == 4);
  CHECK(result.dataset.x(1)(0) == 2.0);
  CHECK(result.dataset.x(1)(2) == 1.0);  // blue
  CHECK(result.dataset.x(1)(1) == 0.0);
  CHECK(result.dataset.x(3)(3) == 1.0);  // green
}

TEST_CASE("headerless files get positional column names") {
  const std::string path = write_file("bare.csv", "1,2,1\n3,4,-1\n");
  CsvSchema schema;
  schema.has_header = false;
  const LoadResult result = load_csv(path, schema);
  CHECK(result.feature_names == std::vector<std::string>{"col0", "col1"});
  REQUIRE(result.dataset.n() == 2);
  CHECK(result.dataset.x(1)(1) == 4.0);
  CHECK(result.dataset.y(1) == -1);
}

TEST_CASE("ignored columns do not become features") {
  const std::string path = write_file("ignored.csv", "id,x,y\n101,1.5,1\n102,2.5,-1\n");
  CsvSchema schema;
  schema.columns = {{"id", ColumnSpec::Role::Ignore},
                    {"x", ColumnSpec::Role::Feature},
                    {"y", ColumnSpec::Role::Label}};
  const LoadResult result = load_csv(path, schema);
  CHECK(result.dataset.dim() == 1);
  CHECK(result.feature_names == std::vector<std::string>{"x"});
  CHECK(result.dataset.x(0)(0) == 1.5);
}

TEST_CASE("parse failures carry usable messages") {
  CsvSchema plain;  // auto schema

  SUBCASE("missing file names the path") {
    const std::string msg = load_error("/nonexistent/never.csv", plain);
    CHECK(msg.find("cannot open") != std::string::npos);
    CHECK(msg.find("/nonexistent/never.csv") != std::string::npos);
  }
  SUBCASE("empty file") {
    const std::string path = write_file("empty.csv", "");
    CHECK(load_error(path, plain).find("contains no data") != std::string::npos);
  }
  SUBCASE("header with no rows") {
    const std::string path = write_file("header_only.csv", "a,b,label\n");
    CHECK(load_error(path, plain).find("header but no rows") != std::string::npos);
  }
  SUBCASE("non-numeric cell reports line and column") {
    const std::string path = write_file("bad_cell.csv", "x,label\n1,1\nfoo,-1\n");
    const std::string msg = load_error(path, plain);
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column 'x'") != std::string::npos);
    CHECK(msg.find("'foo'") != std::string::npos);
  }
  SUBCASE("ragged row") {
    const std::string path = write_file("ragged.csv", "a,b,label\n1,2,1\n3,4\n");
    const std::string msg = load_error(path, plain);
    CHECK(msg.find("2 cells") != std::string::npos);
    CHECK(msg.find("expected 3") != std::string::npos);
  }
  SUBCASE("two label columns") {
    const std::string path = write_file("twolabel.csv", "a,b\n1,1\n");
    CsvSchema schema;
    schema.columns = {{"a", ColumnSpec::Role::Label}, {"b", ColumnSpec::Role::Label}};
    CHECK(load_error(path, schema).find("more than one label") != std::string::npos);
  }
  SUBCASE("no label column") {
    const std::string path = write_file("nolabel.csv", "a,b\n1,1\n");
    CsvSchema schema;
    schema.columns = {{"a", ColumnSpec::Role::Feature}, {"b", ColumnSpec::Role::Feature}};
    CHECK(load_error(path, schema).find("no label column") != std::string::npos);
  }
  SUBCASE("schema narrower than the file") {
    const std::string path = write_file("narrow.csv", "a,b,label\n1,2,1\n");
    CsvSchema schema;
    schema.columns = {{"a", ColumnSpec::Role::Feature}, {"label", ColumnSpec::Role::Label}};
    CHECK(load_error(path, schema).find("2 columns") != std::string::npos);
  }
  SUBCASE("schema name does not match header") {
    const std::string path = write_file("renamed.csv", "a,label\n1,1\n");
    CsvSchema schema;
    schema.columns = {{"z", ColumnSpec::Role::Feature}, {"label", ColumnSpec::Role::Label}};
    CHECK(load_error(path, schema).find("does not match header") != std::string::npos);
  }
  SUBCASE("label token missing from the map") {
    const std::string path = write_file("unmapped.csv", "x,group\n1,maybe\n");
    CsvSchema schema;
    schema.columns = {{"x", ColumnSpec::Role::Feature}, {"group", ColumnSpec::Role::Label}};
    schema.label_map = {{"yes", 1}, {"no", -1}};
    CHECK(load_error(path, schema).find("'maybe' missing from label_map") !=
          std::string::npos);
  }
  SUBCASE("numeric label outside {-1,0,1} needs a map") {
    const std::string path = write_file("label2.csv", "x,label\n1,2\n");
    CHECK(load_error(path, plain).find("needs a label_map") != std::string::npos);
  }
}

TEST_CASE("normalization centers, scales, and zeroes constant columns") {
  Dataset data = dataset_of({{1, 5}, {2, 5}, {3, 5}}, {1, 1, -1});
  normalize_features(data);
  const double sd = std::sqrt(2.0 / 3.0);
  CHECK(data.x(0)(0) == doctest::Approx(-1.0 / sd).epsilon(1e-12));
  CHECK(data.x(1)(0) == doctest::Approx(0.0));
  CHECK(data.x(2)(0) == doctest::Approx(1.0 / sd).epsilon(1e-12));
  for (int i = 0; i < 3; ++i) CHECK(data.x(i)(1) == 0.0);
}

TEST_CASE("realizability filter") {
  const FamilySpec family = FamilySpec::linear(FeatureMap::AppendOne);

  SUBCASE("separable data passes through untouched") {
    const Dataset data = dataset_of({{1, 1}, {2, 2}, {-1, -1}, {-2, -2}}, {1, 1, -1, -1});
    const FilterResult result = realizability_filter(data, 1.0, family);
    CHECK(result.removed.empty());
    REQUIRE(result.dataset.n() == 4);
    for (int i = 0; i < 4; ++i) CHECK((result.dataset.x(i) - data.x(i)).norm() == 0.0);
  }
  SUBCASE("a flipped duplicate is dropped, nothing else") {
    const Dataset data = dataset_of({{1, 1}, {1, 1}, {1, 1}, {-1, -1}, {-2, -2}},
                                    {1, 1, -1, -1, -1});
    const FilterResult result = realizability_filter(data, 1.0, family);
    CHECK(result.removed == std::vector<int>{2});
    CHECK(result.dataset.n() == 4);
  }
  SUBCASE("xor shrinks to a separable remainder") {
    const Dataset data = dataset_of({{0, 0}, {1, 1}, {0, 1}, {1, 0}}, {1, 1, -1, -1});
    const FilterResult result = realizability_filter(data, 1.0, family);
    CHECK(!result.removed.empty());
    CHECK(result.dataset.n() >= 1);
    CHECK(result.dataset.n() + static_cast<int>(result.removed.size()) == 4);
  }
}

TEST_CASE("subsampling through the load pipeline") {
  const std::string path =
      write_file("six.csv", "x,label\n0,1\n1,-1\n2,1\n3,-1\n4,1\n5,-1\n");

  SUBCASE("default keeps the first k per class in file order") {
    PreprocessSpec prep;
    prep.subsample_per_class = 2;
    const LoadResult result = load_csv(path, CsvSchema{}, prep);
    REQUIRE(result.dataset.n() == 4);
    for (int i = 0; i < 4; ++i) CHECK(result.dataset.x(i)(0) == static_cast<double>(i));
  }
  SUBCASE("seeded draw is balanced and repeatable") {
    PreprocessSpec prep;
    prep.subsample_per_class = 2;
    prep.subsample_seed = 7;
    const LoadResult a = load_csv(path, CsvSchema{}, prep);
    const LoadResult b = load_csv(path, CsvSchema{}, prep);
    REQUIRE(a.dataset.n() == 4);
    int pos = 0;
    for (int i = 0; i < 4; ++i) pos += a.dataset.y(i) == 1 ? 1 : 0;
    CHECK(pos == 2);
    for (int i = 0; i < 4; ++i) {
      CHECK(a.dataset.x(i)(0) == b.dataset.x(i)(0));
      CHECK(a.dataset.y(i) == b.dataset.y(i));
    }
  }
}

TEST_CASE("preprocessing order: filter, subsample, then normalize") {
  // The flipped duplicate at (1,1) must be gone before normalization
  // statistics are taken, otherwise the kept coordinates would differ.
  const std::string path = write_file(
      "pipeline.csv", "x,y,label\n1,1,1\n1,1,-1\n1,1,1\n-1,-1,-1\n-2,-2,-1\n");
  PreprocessSpec prep;
  prep.filter_C = 1.0;
  prep.normalize = true;
  const LoadResult result = load_csv(path, CsvSchema{}, prep);
  CHECK(result.removed_by_filter == std::vector<int>{1});
  REQUIRE(result.dataset.n() == 4);
  double mean = 0.0;
  for (int i = 0; i < 4; ++i) mean += result.dataset.x(i)(0);
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("builtin scenarios match their frozen definitions") {
  SUBCASE("five_point") {
    const Scenario s = builtin_scenario("five_point");
    REQUIRE(s.dataset.n() == 5);
    const double coords[5][2] = {{1, 1}, {1, 1}, {-1, 1}, {1, -1}, {-1, -1}};
    const int labels[5] = {1, 1, -1, -1, -1};
    for (int i = 0; i < 5; ++i) {
      CHECK(s.dataset.x(i)(0) == coords[i][0]);
      CHECK(s.dataset.x(i)(1) == coords[i][1]);
      CHECK(s.dataset.y(i) == labels[i]);
    }
    REQUIRE(s.models.size() == 2);
    const auto* m0 = s.models[0].get_if<LinearModel>();
    REQUIRE(m0 != nullptr);
    CHECK(m0->weights(0) == 1.0);
    CHECK(m0->weights(1) == 0.0);
    CHECK(s.config.q == 2.0);
    CHECK(s.config.user_tie_policy.kind == TiePolicy::Kind::EvenSplit);
  }
  SUBCASE("threshold_line sizes") {
    const Scenario def = builtin_scenario("threshold_line");
    CHECK(def.dataset.n() == 5);
    const Scenario one = builtin_scenario("threshold_line", 1);
    REQUIRE(one.dataset.n() == 1);
    CHECK(one.dataset.x(0)(0) == 0.0);
    CHECK(one.dataset.y(0) == 1);
    const auto* t = one.models[0].get_if<ThresholdModel>();
    REQUIRE(t != nullptr);
    CHECK(t->offset == 0.5);
    const Scenario three = builtin_scenario("threshold_line", 3);
    CHECK(three.dataset.x(2)(0) == doctest::Approx(-1.4));
  }
  SUBCASE("threshold_services sizes") {
    const Scenario s = builtin_scenario("threshold_services", 2);
    REQUIRE(s.dataset.n() == 1);
    CHECK(s.dataset.y(0) == -1);
    REQUIRE(s.models.size() == 2);
    const auto* t = s.models[1].get_if<ThresholdModel>();
    REQUIRE(t != nullptr);
    CHECK(t->offset == 3.0);
    CHECK(s.config.user_tie_policy.kind == TiePolicy::Kind::Concentrate);
  }
  SUBCASE("unknown name") {
    CHECK_THROWS_AS(builtin_scenario("mystery"), std::invalid_argument);
  }
  SUBCASE("name listing") {
    const auto names = builtin_scenario_names();
    CHECK(names == std::vector<std::string>{"five_point", "threshold_line",
                                            "threshold_services"});
  }
}

TEST_CASE("reveal seeding is deterministic and class-balanced") {
  const Dataset data =
      dataset_of({{0}, {1}, {2}, {3}, {4}, {5}}, {1, 1, -1, -1, 1, -1});

  const MemoryMatrix a = reveal_seed_users(data, 3, 42);
  const MemoryMatrix b = reveal_seed_users(data, 3, 42);
  CHECK((a.entries - b.entries).cwiseAbs().maxCoeff() == 0.0);

  for (int j = 0; j < 3; ++j) {
    int pos = 0, neg = 0;
    for (int i = 0; i < 6; ++i) {
      const double v = a(i, j);
      REQUIRE((v == 0.0 || v == 1.0));
      if (v == 1.0) (data.y(i) == 1 ? pos : neg) += 1;
    }
    CHECK(pos == 1);
    CHECK(neg == 1);
  }

  const Dataset one_class = dataset_of({{0}, {1}}, {1, 1});
  CHECK_THROWS_AS(reveal_seed_users(one_class, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(reveal_seed_users(data, 0, 0), std::invalid_argument);
}

TEST_CASE("seeded initial state fits exactly the revealed pairs") {
  const Dataset data =
      dataset_of({{2, 0}, {0, 2}, {-2, 0}, {0, -2}}, {1, 1, -1, -1});
  const DynamicsConfig cfg;
  const LossSpec spec = LossSpec::hinge_linear();
  const SimState state = seeded_initial_state(data, 2, 5, FamilySpec::linear(), spec, cfg,
                                              TrainerConfig{});
  const MemoryMatrix reveal = reveal_seed_users(data, 2, 5);
  CHECK((state.memory.entries - reveal.entries).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.step_index == 0);
  REQUIRE(static_cast<int>(state.models.size()) == 2);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < data.n(); ++i)
      if (reveal(i, j) > 0.0)
        CHECK(loss(state.models[static_cast<std::size_t>(j)], data.x(i), data.y(i), spec) <=
              1e-9);
  CHECK(state.usage.n() == 4);
  CHECK(state.usage.entries.minCoeff() >= 0.0);
}
