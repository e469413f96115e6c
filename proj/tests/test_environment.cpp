#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <random>

#include "dgm/error.hpp"
#include "support.hpp"

using namespace dgm;

namespace {

nlohmann::json e2_doc() {
  return nlohmann::json::parse(serialize_environment(load_environment_file(testing::fixture("E2.json"))));
}

std::string load_error(const nlohmann::json& doc) {
  try {
    load_environment(doc.dump());
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("state space: mixed radix with the last player fastest") {
  StateSpace s({2, 3, 2});
  CHECK(s.size() == 12);
  const std::vector<std::size_t> profile{1, 2, 0};
  const std::size_t idx = s.encode(profile);
  CHECK(idx == 1 * 6 + 2 * 2 + 0);
  CHECK(s.decode(idx) == profile);
  CHECK(s.component(idx, 1) == 2);
  CHECK(s.decode(s.with_component(idx, 0, 0)) == std::vector<std::size_t>{0, 2, 0});
  for (std::size_t st = 0; st < s.size(); ++st)
    for (std::size_t i = 0; i < 3; ++i) CHECK(s.insert(s.drop(st, i), i, s.component(st, i)) == st);
  CHECK(StateSpace(std::vector<std::size_t>{}).size() == 1);
  CHECK(s.without(1).size() == 4);
}

TEST_CASE("E2 fixture loads with four states") {
  const auto env = testing::load_fixture("E2.json");
  CHECK(env->num_players() == 2);
  CHECK(env->num_states() == 4);
  CHECK(env->num_actions() == 2);
  CHECK(env->discount() == 0.5);
  CHECK(env->bound() == 3.0);
  CHECK(env->state_label(env->parse_state("H,L")) == "H,L");
  CHECK(env->welfare(env->parse_state("H,H"), 1) == doctest::Approx(4.5));
  CHECK(env->others_welfare(env->parse_state("H,H"), 0, 1) == doctest::Approx(1.5));
}

TEST_CASE("joint kernel is the product of the player kernels") {
  const auto env = testing::load_fixture("three.json");
  for (std::size_t a = 0; a < env->num_actions(); ++a) {
    const SparseKernel k = env->joint_kernel(a);
    for (std::size_t s = 0; s < env->num_states(); ++s) {
      double sum = 0.0;
      for (std::size_t t = 0; t < env->num_states(); ++t) {
        const double expected = testing::joint_probability(*env, s, a, t);
        CHECK(k.coeff(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) ==
              doctest::Approx(expected).epsilon(1e-15));
        sum += expected;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("serialization round trip is value-identical and the digest is stable") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 20; ++k) {
    const Environment env = testing::random_environment(rng);
    const std::string text = serialize_environment(env);
    const Environment back = load_environment(text);
    CHECK(serialize_environment(back) == text);
    CHECK(environment_digest(back) == environment_digest(env));
    for (std::size_t i = 0; i < env.num_players(); ++i) {
      CHECK(back.player(i).valuation == env.player(i).valuation);
      for (std::size_t a = 0; a < env.num_actions(); ++a)
        CHECK(back.player(i).transition[a] == env.player(i).transition[a]);
    }
  }
}

TEST_CASE("validation names the offending field") {
  auto doc = e2_doc();
  SUBCASE("row that does not sum to one") {
    doc["players"][0]["transition"]["L"]["1"] = {0.5, 0.6};
    const auto msg = load_error(doc);
    CHECK(msg.find("players[0]") != std::string::npos);
    CHECK(msg.find("transition") != std::string::npos);
  }
  SUBCASE("negative probability") {
    doc["players"][1]["transition"]["H"]["0"] = {1.5, -0.5};
    CHECK(load_error(doc).find("negative") != std::string::npos);
  }
  SUBCASE("discount out of range") {
    doc["discount"] = 1.0;
    CHECK(load_error(doc).find("discount") != std::string::npos);
  }
  SUBCASE("duplicate action") {
    doc["actions"] = {"0", "0"};
    CHECK(load_error(doc).find("duplicate") != std::string::npos);
  }
  SUBCASE("ragged row") {
    doc["players"][0]["transition"]["H"]["0"] = {1.0};
    CHECK(load_error(doc).find("ragged") != std::string::npos);
  }
  SUBCASE("missing valuation entry") {
    doc["players"][0]["valuation"].erase("H");
    CHECK(load_error(doc).find("valuation") != std::string::npos);
  }
  SUBCASE("type label with a comma") {
    doc["players"][0]["types"] = {"L", "H,x"};
    CHECK_FALSE(load_error(doc).empty());
  }
  SUBCASE("malformed JSON") { CHECK_THROWS_AS(load_environment("{ not json"), InputError); }
}

TEST_CASE("rows within 1e-9 of stochastic are renormalized") {
  auto doc = e2_doc();
  doc["players"][0]["transition"]["L"]["0"] = {0.8, 0.2 + 5e-10};
  const Environment env = load_environment(doc.dump());
  CHECK(env.player(0).transition[0].row(0).sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("reduced environment drops one player and keeps the rest") {
  const auto env = testing::load_fixture("three.json");
  const Environment r = reduced_environment(*env, 1);
  CHECK(r.num_players() == 2);
  CHECK(r.player(0).name == "a");
  CHECK(r.player(1).name == "c");
  CHECK(r.discount() == env->discount());
  CHECK(r.player(1).valuation == env->player(2).valuation);
  const Environment none = reduced_environment(*testing::load_fixture("single.json"), 0);
  CHECK(none.num_players() == 0);
  CHECK(none.num_states() == 1);
  CHECK(none.welfare(0, 0) == 0.0);
}

TEST_CASE("noise stream is deterministic and uniform on [0,1)") {
  NoiseStream a(42), b(42), c(43);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = a.uniform(static_cast<std::uint64_t>(k), 1, 2);
    CHECK_EQ(u, b.uniform(static_cast<std::uint64_t>(k), 1, 2));
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(a.uniform(0, 0, 0) != c.uniform(0, 0, 0));
  CHECK(a.uniform(0, 0, 0) != a.uniform(0, 0, 1));
  CHECK(a.uniform(0, 0, 0) != a.uniform(0, 1, 0));
}

TEST_CASE("inverse CDF picks the first cell whose cumulative mass exceeds u") {
  const std::vector<double> row{0.2, 0.0, 0.5, 0.3, 0.0};
  const auto cdf = cumulative(row);
  CHECK(cdf.back() == 1.0);
  CHECK(inverse_cdf(cdf, 0.0) == 0);
  CHECK(inverse_cdf(cdf, 0.1999) == 0);
  CHECK(inverse_cdf(cdf, 0.2) == 2);
  CHECK(inverse_cdf(cdf, 0.69) == 2);
  CHECK(inverse_cdf(cdf, 0.7) == 3);
  CHECK(inverse_cdf(cdf, 0.999999) == 3);
}

TEST_CASE("coupled rows have the right marginals and match a shared-uniform simulation") {
  const std::vector<double> x{0.5, 0.3, 0.2}, y{0.1, 0.1, 0.8};
  const Eigen::MatrixXd c = couple_rows(x, y);
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(c.row(k).sum() == doctest::Approx(x[static_cast<std::size_t>(k)]));
    CHECK(c.col(k).sum() == doctest::Approx(y[static_cast<std::size_t>(k)]));
  }
  // Oracle: push a fine uniform grid through both inverse CDFs.
  const auto fx = cumulative(x), fy = cumulative(y);
  Eigen::MatrixXd empirical = Eigen::MatrixXd::Zero(3, 3);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double u = (k + 0.5) / n;
    empirical(static_cast<Eigen::Index>(inverse_cdf(fx, u)), static_cast<Eigen::Index>(inverse_cdf(fy, u))) += 1.0 / n;
  }
  CHECK((empirical - c).cwiseAbs().maxCoeff() < 1e-4);
  // Identical rows couple on the diagonal.
  const Eigen::MatrixXd same = couple_rows(x, x);
  CHECK((same - Eigen::MatrixXd(Eigen::Vector3d(0.5, 0.3, 0.2).asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("coupling kernel rows are stochastic") {
  const auto env = testing::load_fixture("three.json");
  for (std::size_t i = 0; i < env->num_players(); ++i)
    for (std::size_t a = 0; a < env->num_actions(); ++a) {
      const CoupledKernel k = coupling_kernel(*env, i, a);
      CHECK((k.probability.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(k.probability.minCoeff() >= 0.0);
    }
}

TEST_CASE("kernel sampler follows the transition law") {
  const auto env = testing::load_fixture("E2.json");
  const KernelSampler sampler(*env);
  const int n = 100000;
  int high = 0;
  for (int k = 0; k < n; ++k) high += sampler.next(0, 0, 1, (k + 0.5) / n) == 1 ? 1 : 0;
  CHECK(static_cast<double>(high) / n == doctest::Approx(0.6).epsilon(1e-4));
}
