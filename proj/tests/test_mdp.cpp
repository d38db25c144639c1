#include <doctest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "qpi/bellman.hpp"

using namespace qpi;

TEST_CASE("Mdp rejects invalid models") {
  Matrix k(2, 2);
  k << 0.5, 0.5, 0.3, 0.6;
  CHECK_THROWS_AS(Mdp(2, 1, 0.9, Vector::Zero(2), k), std::invalid_argument);
  k << 0.5, 0.5, -0.1, 1.1;
  CHECK_THROWS_AS(Mdp(2, 1, 0.9, Vector::Zero(2), k), std::invalid_argument);
  k << 0.5, 0.5, 0.5, 0.5;
  CHECK_THROWS_AS(Mdp(2, 1, 1.0, Vector::Zero(2), k), std::invalid_argument);
  CHECK_THROWS_AS(Mdp(2, 1, 0.0, Vector::Zero(2), k), std::invalid_argument);
  Vector c(2);
  c << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Mdp(2, 1, 0.9, c, k), std::invalid_argument);
  CHECK_NOTHROW(Mdp(2, 1, 0.9, Vector::Zero(2), k));
}

TEST_CASE("bellman_apply on the two-state model") {
  const Mdp mdp = oracle::m2();
  SUBCASE("v = 0") {
    // Lookaheads: (0,0): 1, (0,1): 0, (1,0): 0, (1,1): 1.
    const BellmanResult b = bellman_apply(mdp, Vector::Zero(2));
    CHECK(b.tv(0) == 0.0);
    CHECK(b.tv(1) == 0.0);
    CHECK(b.greedy == Policy{1, 0});
    CHECK(greedy_policy(mdp, Vector::Zero(2)) == b.greedy);
  }
  SUBCASE("v = (10, 0)") {
    // (0,0): 1 + 5 = 6, (0,1): 0 + 0 = 0, (1,0): 0 + 5 = 5, (1,1): 1 + 0 = 1.
    Vector v(2);
    v << 10, 0;
    const BellmanResult b = bellman_apply(mdp, v);
    CHECK(b.tv(0) == 0.0);
    CHECK(b.tv(1) == 1.0);
    CHECK(b.greedy == Policy{1, 1});
  }
  CHECK_THROWS_AS(bellman_apply(mdp, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("bellman_apply basic identities") {
  const Mdp mdp = oracle::random_mdp(5, 3, 0.8, 7);
  const BellmanResult b0 = bellman_apply(mdp, Vector::Zero(5));
  for (int s = 0; s < 5; ++s) CHECK(b0.tv(s) == doctest::Approx(mdp.cost().segment(s * 3, 3).minCoeff()));

  const Mdp zero_cost(mdp.n_states(), mdp.n_actions(), mdp.gamma(), Vector::Zero(mdp.n_pairs()), mdp.kernel());
  std::mt19937_64 gen(3);
  const Vector v = oracle::random_vector(5, gen);
  const Vector tv = bellman_apply(zero_cost, v).tv;
  for (int s = 0; s < 5; ++s) {
    const double best = (mdp.kernel().middleRows(s * 3, 3) * v).minCoeff();
    CHECK(tv(s) == doctest::Approx(mdp.gamma() * best).epsilon(1e-12));
  }
}

TEST_CASE("ties go to the smallest action") {
  Matrix k = Matrix::Constant(6, 2, 0.5);
  const Mdp mdp(2, 3, 0.9, Vector::Ones(6), k);
  CHECK(greedy_policy(mdp, Vector::Zero(2)) == Policy{0, 0});

  Vector q = Vector::Zero(6);
  CHECK(q_greedy_policy(q, 2, 3) == Policy{0, 0});
  q << 0, 1, 2, 0, 1, 2;
  CHECK(q_greedy_policy(q, 2, 3) == Policy{0, 0});
  q = -q;
  CHECK(q_greedy_policy(q, 2, 3) == Policy{2, 2});
  CHECK_THROWS_AS(q_greedy_policy(q, 2, 2), std::invalid_argument);
}

TEST_CASE("Bellman operator properties on random models") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    const int m = 1 + trial % 3;
    const Mdp mdp = oracle::random_mdp(n, m, 0.5 + 0.4 * (trial % 2), 100 + trial);
    const Vector v = oracle::random_vector(n, gen, 5.0);
    const Vector w = oracle::random_vector(n, gen, 5.0);
    const Vector tv = bellman_apply(mdp, v).tv;
    const Vector tw = bellman_apply(mdp, w).tv;

    CHECK((tv - oracle::bellman(mdp, v)).lpNorm<Eigen::Infinity>() <= 1e-12);
    // Contraction.
    CHECK((tv - tw).lpNorm<Eigen::Infinity>() <= mdp.gamma() * (v - w).lpNorm<Eigen::Infinity>() + 1e-12);
    // Shift.
    const double rho = 3.25;
    const Vector shifted = bellman_apply(mdp, v + Vector::Constant(n, rho)).tv;
    CHECK((shifted - tv - Vector::Constant(n, mdp.gamma() * rho)).lpNorm<Eigen::Infinity>() <= 1e-12);
    // Monotonicity.
    const Vector upper = v + w.cwiseAbs();
    const Vector tu = bellman_apply(mdp, upper).tv;
    CHECK(((tu - tv).array() >= -1e-12).all());
    // Piecewise-affine form T(v) = c^pi + gamma P^pi v for the greedy policy.
    const Policy pi = greedy_policy(mdp, v);
    const Vector affine = mdp.policy_cost(pi) + mdp.gamma() * mdp.policy_matrix(pi) * v;
    CHECK((affine - tv).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("policy_evaluation") {
  SUBCASE("two-state model") {
    // pi = (1, 1): v1 = 1 + v1 / 2 = 2, v0 = 0 + v1 / 2 = 1.
    const auto r = policy_evaluation(oracle::m2(), {1, 1});
    CHECK(r.value(0) == doctest::Approx(1.0));
    CHECK(r.value(1) == doctest::Approx(2.0));
    // pi = (1, 0): both states cost 0 and swap forever.
    const auto opt = policy_evaluation(oracle::m2(), {1, 0});
    CHECK(opt.value.lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
  }
  SUBCASE("single state geometric series") {
    const Mdp one(1, 1, 0.75, Vector::Ones(1), Matrix::Ones(1, 1));
    CHECK(policy_evaluation(one, {0}).value(0) == doctest::Approx(4.0));
  }
  SUBCASE("zero cost") {
    const Mdp base = oracle::random_mdp(4, 2, 0.9, 5);
    const Mdp mdp(4, 2, 0.9, Vector::Zero(8), base.kernel());
    CHECK(policy_evaluation(mdp, {0, 1, 0, 1}).value.isZero());
  }
  SUBCASE("agrees with fixed-point iteration and satisfies the residual bound") {
    for (int trial = 0; trial < 20; ++trial) {
      const Mdp mdp = oracle::random_mdp(5, 3, 0.9, 300 + trial);
      const Policy pi{trial % 3, (trial + 1) % 3, 2, 0, 1};
      const auto r = policy_evaluation(mdp, pi);
      CHECK((r.value - oracle::iterate_policy_value(mdp, pi)).lpNorm<Eigen::Infinity>() <= 1e-10);
      CHECK((r.transition.rowwise().sum() - Vector::Ones(5)).lpNorm<Eigen::Infinity>() <= 1e-12);
      const Vector residual = r.value - (r.stage_cost + mdp.gamma() * r.transition * r.value);
      CHECK(residual.lpNorm<Eigen::Infinity>() <= 1e-10);
    }
  }
  CHECK_THROWS_AS(policy_evaluation(oracle::m2(), {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(policy_evaluation(oracle::m2(), {0}), std::invalid_argument);
}

TEST_CASE("bellman_error") {
  const Mdp mdp = oracle::m2();
  CHECK(bellman_error(mdp, Vector::Zero(2)) == 0.0);
  Vector v(2);
  v << 10, 0;
  // T(v) = (0, 1), so ||v - T v|| = max(10, 1).
  CHECK(bellman_error(mdp, v) == doctest::Approx(10.0));

  const Mdp r = oracle::random_mdp(4, 3, 0.9, 21);
  double expected = 0.0;
  for (int s = 0; s < 4; ++s) expected = std::max(expected, r.cost().segment(s * 3, 3).minCoeff());
  CHECK(bellman_error(r, Vector::Zero(4)) == doctest::Approx(expected));
}

TEST_CASE("exact and sampled Q operators") {
  const Mdp mdp = oracle::m2();
  Vector q(4);
  q << 1, 2, 3, 4;
  // min q(0, .) = 1, min q(1, .) = 3.
  Vector expected(4);
  expected << 1 + 0.5 * 1, 0 + 0.5 * 3, 0 + 0.5 * 1, 1 + 0.5 * 3;
  CHECK((exact_q_bellman_apply(mdp, q) - expected).lpNorm<Eigen::Infinity>() <= 1e-15);
  CHECK(q_bellman_error(mdp, q) == doctest::Approx((q - expected).lpNorm<Eigen::Infinity>()));

  // Deterministic kernel: sampling is degenerate.
  Rng rng(5);
  CHECK(sampled_bellman_apply(mdp, q, rng) == exact_q_bellman_apply(mdp, q));
  CHECK(exact_q_bellman_apply(mdp, Vector::Zero(4)) == mdp.cost());

  const Mdp r = oracle::random_mdp(4, 2, 0.9, 8);
  Rng a(42);
  const Vector qa = sampled_bellman_apply(r, Vector::Zero(8), a);
  CHECK(qa == r.cost());
  std::mt19937_64 gen(1);
  const Vector q2 = oracle::random_vector(8, gen);
  Rng c(7), d(7);
  CHECK(sampled_bellman_apply(r, q2, c) == sampled_bellman_apply(r, q2, d));
}

TEST_CASE("draw_next_states follows the kernel") {
  Matrix k(1, 3);
  k << 0.2, 0.5, 0.3;
  const Mdp mdp(3, 1, 0.9, Vector::Zero(3), Matrix(k.replicate(3, 1)));
  Rng rng(9);
  std::vector<int> counts(3, 0);
  const int draws = 30000;
  for (int i = 0; i < draws / 3; ++i)
    for (int s : draw_next_states(mdp, rng)) ++counts[s];
  CHECK(counts[0] / double(draws) == doctest::Approx(0.2).epsilon(0.05));
  CHECK(counts[1] / double(draws) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(counts[2] / double(draws) == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("brute_force_optimal") {
  const OptimalSolution m2 = brute_force_optimal(oracle::m2());
  CHECK(m2.v_star.lpNorm<Eigen::Infinity>() <= 1e-12);
  CHECK(m2.pi_star == Policy{1, 0});

  const Mdp single(3, 1, 0.9, Vector::Ones(3), oracle::random_mdp(3, 1, 0.9, 2).kernel());
  CHECK((brute_force_optimal(single).v_star - policy_evaluation(single, {0, 0, 0}).value).norm() <= 1e-12);

  for (int trial = 0; trial < 30; ++trial) {
    const Mdp mdp = oracle::random_mdp(1 + trial % 5, 1 + trial % 3, trial % 2 ? 0.9 : 0.5, 500 + trial);
    const OptimalSolution opt = brute_force_optimal(mdp);
    CHECK(bellman_error(mdp, opt.v_star) <= 1e-8);
  }
  CHECK_THROWS_AS(brute_force_optimal(oracle::random_mdp(21, 2, 0.9, 1)), InstanceTooLarge);
}

TEST_CASE("JSON round trip") {
  const Mdp mdp = oracle::random_mdp(3, 2, 0.95, 4);
  const auto path = std::filesystem::temp_directory_path() / "qpi_test_roundtrip.json";
  save_mdp(mdp, path);
  const Mdp back = load_mdp(path);
  CHECK(back.n_states() == 3);
  CHECK(back.n_actions() == 2);
  CHECK(back.gamma() == mdp.gamma());
  CHECK(back.kernel() == mdp.kernel());
  CHECK(back.cost() == mdp.cost());
  std::filesystem::remove(path);

  nlohmann::json j = to_json(mdp);
  j["kernel"][0][0][0] = 5.0;
  CHECK_THROWS_AS(mdp_from_json(j), std::invalid_argument);
  CHECK_THROWS(load_mdp("/nonexistent/qpi.json"));
}
