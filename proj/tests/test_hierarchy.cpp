#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "coherent/hierarchy.hpp"
#include "coherent/panel.hpp"
#include "test_support.hpp"

using namespace coherent;
namespace ts = test_support;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

HierarchySpec spec_from_edges(
    std::vector<std::pair<std::string, std::string>> edges,
    const std::string& top) {
  HierarchySpec s;
  s.name = "test";
  s.top = top;
  s.edges = std::move(edges);
  return s;
}

}  // namespace

TEST_CASE("parse_hierarchy_spec orders nodes deterministically") {
  auto spec = parse_hierarchy_spec(R"({
    "name": "toy", "top": "GDP",
    "edges": [["GDP","Tfi"],["GDP","Tsi"],["Tfi","A"],["Tfi","B"],["Tsi","C"]]
  })");
  auto h = build_matrices(spec);
  CHECK(h.top == "GDP");
  CHECK(h.aggregate_names == std::vector<std::string>{"Tfi", "Tsi"});
  CHECK(h.bottom_names == std::vector<std::string>{"A", "B", "C"});
}

TEST_CASE("parse_hierarchy_spec rejects bad structures") {
  CHECK_THROWS_AS(parse_hierarchy_spec(
                      R"({"name":"x","top":"GDP","edges":[["GDP","A"],["A","GDP"]]})"),
                  input_error);
  // duplicate edge
  CHECK_THROWS_AS(parse_hierarchy_spec(
                      R"({"name":"x","top":"T","edges":[["T","A"],["T","A"]]})"),
                  input_error);
  // two roots
  CHECK_THROWS_AS(parse_hierarchy_spec(
                      R"({"name":"x","top":"T","edges":[["T","A"],["S","B"]]})"),
                  input_error);
  // declared top is not the root
  CHECK_THROWS_AS(parse_hierarchy_spec(
                      R"({"name":"x","top":"A","edges":[["T","A"],["T","B"]]})"),
                  input_error);
  CHECK_THROWS_AS(parse_hierarchy_spec("not json"), input_error);
}

TEST_CASE("income side has the published dimensions") {
  auto spec = parse_hierarchy_spec(slurp(std::string(DATA_DIR) + "/income_hierarchy.json"));
  auto h = build_matrices(spec);
  CHECK(h.num_bottoms() == 10);
  CHECK(h.num_aggregates() == 5);
  CHECK(h.num_series() == 16);
  CHECK(h.U.rows() == 16);
  CHECK(h.U.cols() == 6);
  CHECK((h.U.transpose() * h.S).isZero(0));  // exact, integer arithmetic
}

TEST_CASE("expenditure-shaped tree gives a 80x27 U") {
  auto spec = parse_hierarchy_spec(
      slurp(std::string(DATA_DIR) + "/expenditure_synthetic.json"));
  auto h = build_matrices(spec);
  CHECK(h.num_bottoms() == 53);
  CHECK(h.num_aggregates() == 26);
  CHECK(h.U.rows() == 80);
  CHECK(h.U.cols() == 27);
  CHECK((h.U.transpose() * h.S).isZero(0));
}

TEST_CASE("smallest hierarchy matrices") {
  auto h = build_matrices(spec_from_edges({{"T", "A"}, {"T", "B"}}, "T"));
  Eigen::MatrixXi S(3, 2);
  S << 1, 1, 1, 0, 0, 1;
  CHECK(h.S == S);
  Eigen::MatrixXi U(3, 1);
  U << 1, -1, -1;
  CHECK(h.U == U);
}

TEST_CASE("U'S = 0 exactly on random trees") {
  std::mt19937_64 rng(42);
  for (int it = 0; it < 30; ++it) {
    std::uniform_int_distribution<int> agg(1, 8), extra(0, 12);
    int m_a = agg(rng);
    int m_b = m_a + extra(rng);
    auto h = build_matrices(ts::random_hierarchy_spec(rng, m_a, m_b));
    REQUIRE((h.U.transpose() * h.S).isZero(0));
    for (int a = 0; a < m_a; ++a) REQUIRE(h.C.row(a).sum() >= 1);
    // every bottom reachable from the top: column sums of S are >= 1
    for (int b = 0; b < m_b; ++b) REQUIRE(h.S.col(b).sum() >= 1);
  }
}

TEST_CASE("link_hierarchies on the paper-sized pair") {
  auto income = parse_hierarchy_spec(
      slurp(std::string(DATA_DIR) + "/income_hierarchy.json"));
  auto expenditure = parse_hierarchy_spec(
      slurp(std::string(DATA_DIR) + "/expenditure_synthetic.json"));
  auto sys = link_hierarchies({income, expenditure}, "Gdp");
  CHECK(sys.n == 95);
  CHECK(sys.K == 33);
  CHECK(sys.U_full.rows() == 33);
  CHECK(sys.U_full.cols() == 95);
  for (int i = 0; i < sys.U_full.rows(); ++i)
    for (int j = 0; j < sys.U_full.cols(); ++j) {
      double v = sys.U_full(i, j);
      REQUIRE((v == 0.0 || v == 1.0 || v == -1.0));
    }
}

TEST_CASE("link_hierarchies toy block layout") {
  // two copies of the 2-bottom hierarchy with renamed bottoms
  auto s1 = spec_from_edges({{"T", "X"}, {"X", "A1"}, {"X", "A2"}}, "T");
  auto s2 = spec_from_edges({{"T", "Y"}, {"Y", "B1"}, {"Y", "B2"}}, "T");
  auto sys = link_hierarchies({s1, s2}, "T");
  CHECK(sys.n == 7);
  CHECK(sys.K == 4);
  Eigen::MatrixXd expected(4, 7);
  expected << 1, 0, -1, -1, 0, 0, 0,   // top vs side-1 bottoms
              1, 0, 0, 0, 0, -1, -1,   // top vs side-2 bottoms
              0, 1, -1, -1, 0, 0, 0,   // side-1 aggregate
              0, 0, 0, 0, 1, -1, -1;   // side-2 aggregate
  CHECK(sys.U_full == expected);
  CHECK(sys.ordering ==
        std::vector<std::string>{"T", "X", "A1", "A2", "Y", "B1", "B2"});
}

TEST_CASE("link_hierarchies validations") {
  auto s1 = spec_from_edges({{"T", "A"}, {"T", "B"}}, "T");
  auto s2 = spec_from_edges({{"S", "C"}, {"S", "D"}}, "S");
  CHECK_THROWS_AS(link_hierarchies({s1, s2}, "T"), input_error);
  // same series name on both sides
  auto s3 = spec_from_edges({{"T", "A"}, {"T", "C"}}, "T");
  CHECK_THROWS_AS(link_hierarchies({s1, s3}, "T"), input_error);
}

TEST_CASE("single hierarchy linking is equivalent to the per-side constraints") {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 20; ++it) {
    auto spec = ts::random_hierarchy_spec(rng, 3, 6);
    auto h = build_matrices(spec);
    auto sys = link_hierarchies({spec}, "Top");
    CHECK(sys.K == 1 + h.num_aggregates());
    // same null space: both annihilate random coherent vectors
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd y = ts::random_coherent_vector(rng, sys, 10.0);
      double scale = std::max(1.0, y.lpNorm<Eigen::Infinity>());
      CHECK((sys.U_full * y).lpNorm<Eigen::Infinity>() / scale <= 1e-12);
      CHECK((h.U.cast<double>().transpose() * y).lpNorm<Eigen::Infinity>() /
                scale <=
            1e-12);
    }
  }
}

TEST_CASE("variable counts hold on random linked systems") {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 20; ++it) {
    auto sys = ts::random_linked_system(rng, 40);
    int n = 1, K = static_cast<int>(sys.hierarchies.size());
    for (const auto& h : sys.hierarchies) {
      n += h.num_aggregates() + h.num_bottoms();
      K += h.num_aggregates();
    }
    CHECK(sys.n == n);
    CHECK(sys.K == K);
    CHECK(static_cast<int>(sys.ordering.size()) == n);
  }
}

TEST_CASE("check_coherence on hand vectors") {
  auto sys = link_hierarchies({spec_from_edges({{"T", "A"}, {"T", "B"}}, "T")}, "T");
  TimeSeriesPanel panel;
  panel.series_names = sys.ordering;
  panel.times = {Period(2000, 1), Period(2000, 2)};
  panel.values.resize(2, 3);
  panel.values << 3, 1, 2,   // coherent
                  4, 1, 2;   // off by one, scaled by 4
  auto v = check_coherence(panel, sys);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == Catch::Approx(0.25));
}

TEST_CASE("check_coherence is zero on random coherent panels") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 10; ++it) {
    auto sys = ts::random_linked_system(rng, 30);
    auto panel = ts::random_coherent_panel(rng, sys, 8, Period(1990, 1), 100.0);
    for (double v : check_coherence(panel, sys)) CHECK(v <= 1e-12);
  }
}
