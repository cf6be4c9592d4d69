#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "dc/cube.hpp"
#include "dc/rng.hpp"
#include "dc/stats.hpp"

using namespace dc;

TEST_CASE("rng: identical (seed, stream) reproduces the sequence") {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(42, 8);
  bool all_equal = true;
  RngStream a2(42, 7);
  for (int i = 0; i < 100; ++i) all_equal = all_equal && (a2.next_u64() == c.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("rng: uniforms live strictly inside (0,1) and reflect exactly") {
  RngStream rng(3, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    const double r = 1.0 - u;
    CHECK(r > 0.0);
    CHECK(r < 1.0);
    CHECK(1.0 - r == u);  // involution is exact on the centered grid
  }
}

TEST_CASE("batches: weights positive and sum to 1 for every method") {
  RngStream rng(11, 0);
  for (Method m : {Method::iid, Method::anti, Method::strat, Method::anti_strat,
                   Method::qmc, Method::lhs}) {
    WeightedCubeBatch b = sample_batch(m, rng, 4, 3);
    CHECK(b.weights.minCoeff() > 0.0);
    CHECK(std::abs(b.weights.sum() - 1.0) <= 1e-12);
    CHECK(b.points.minCoeff() >= 0.0);
    CHECK(b.points.maxCoeff() < 1.0);
  }
}

TEST_CASE("iid: M=1 degenerate batch and empirical coordinate mean") {
  RngStream rng(1, 0);
  WeightedCubeBatch b = sample_iid(rng, 1, 2);
  CHECK(b.size() == 1);
  CHECK(b.weights[0] == 1.0);

  // 10^6 batches of M=4, d=2: per-coordinate mean within 3 SE of 1/2
  const long n_batches = 250000;  // 10^6 points in coordinate pools of 4
  double sum = 0.0;
  long n = 0;
  for (long i = 0; i < n_batches; ++i) {
    WeightedCubeBatch bb = sample_iid(rng, 4, 2);
    sum += bb.points.sum();
    n += bb.points.size();
  }
  const double mean = sum / static_cast<double>(n);
  const double se = std::sqrt(1.0 / 12.0 / static_cast<double>(n));
  CHECK(std::abs(mean - 0.5) <= 3.0 * se);
}

TEST_CASE("iid: determinism contract") {
  RngStream a(9, 4), b(9, 4);
  WeightedCubeBatch x = sample_iid(a, 8, 3);
  WeightedCubeBatch y = sample_iid(b, 8, 3);
  CHECK((x.points.array() == y.points.array()).all());
}

TEST_CASE("antithetic: reflection pairs") {
  CHECK(reflect_unit(0.3) == 0.7);
  CHECK(reflect_unit(0.5) == 0.5);  // fixed point
  const double u[2] = {0.3, 0.9};
  WeightedCubeBatch b;
  make_antithetic(std::span<const double>(u, 2), 2, 2, b);
  CHECK(b.points(0, 0) == 0.3);
  CHECK(b.points(0, 1) == 0.9);
  CHECK(b.points(1, 0) == 0.7);
  CHECK(b.points(1, 1) == doctest::Approx(0.1));

  RngStream rng(2, 0);
  for (int i = 0; i < 1000; ++i) {
    WeightedCubeBatch bb = sample_antithetic(rng, 6, 2);
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 2; ++j) {
        const double w = bb.points(2 * k, j);
        const double r = bb.points(2 * k + 1, j);
        CHECK(r == 1.0 - w);
        CHECK(1.0 - r == w);                       // pairing applied twice is identity
        CHECK(0.5 * (w + r) == 0.5);               // pair mean exactly 1/2
      }
  }
  CHECK_THROWS_AS(sample_antithetic(rng, 3, 1), std::invalid_argument);
}

TEST_CASE("stratified: slab membership and M=1 reduction") {
  RngStream rng(4, 0);
  for (int i = 0; i < 200; ++i) {
    WeightedCubeBatch b = sample_stratified(rng, 4, 2);
    for (int m = 0; m < 4; ++m) {
      CHECK(b.points(m, 0) >= m / 4.0);
      CHECK(b.points(m, 0) < (m + 1) / 4.0);
    }
  }
  // single stratum is the whole cube: identical to iid given the same stream
  RngStream r1(7, 1), r2(7, 1);
  WeightedCubeBatch s = sample_stratified(r1, 1, 3);
  WeightedCubeBatch u = sample_iid(r2, 1, 3);
  CHECK((s.points.array() == u.points.array()).all());
}

TEST_CASE("antithetic-stratified: within-slab reflection stays in the slab") {
  // slab [0, 0.5) with 2 strata: 0.1 reflects to 0.4
  const double u[2] = {0.2, 0.35};  // first-coordinate offsets within slabs
  WeightedCubeBatch b;
  make_antithetic_stratified(std::span<const double>(u, 2), 2, 1, b);
  CHECK(b.points(0, 0) == doctest::Approx(0.1));
  CHECK(b.points(1, 0) == doctest::Approx(0.4));

  RngStream rng(12, 0);
  for (int i = 0; i < 1000; ++i) {
    WeightedCubeBatch bb = sample_antithetic_stratified(rng, 4, 2);
    CHECK(bb.size() == 8);
    for (int m = 0; m < 4; ++m) {
      const int s0 = static_cast<int>(bb.points(2 * m, 0) * 4.0);
      const int s1 = static_cast<int>(bb.points(2 * m + 1, 0) * 4.0);
      CHECK(s0 == m);  // both pair members lie in the same slab
      CHECK(s1 == m);
      CHECK(bb.points(2 * m + 1, 1) == 1.0 - bb.points(2 * m, 1));
    }
  }

  // single stratum reduces to plain antithetic M=2
  RngStream r1(5, 2), r2(5, 2);
  WeightedCubeBatch a = sample_antithetic_stratified(r1, 1, 2);
  WeightedCubeBatch c = sample_antithetic(r2, 2, 2);
  CHECK((a.points.array() == c.points.array()).all());
}

TEST_CASE("rqmc: radical inverse oracle and rotation") {
  CHECK(halton_radical_inverse(1, 2) == 0.5);
  // digit-reversal oracle: 3 = 11_2 -> 0.11_2 = 0.75
  CHECK(halton_radical_inverse(3, 2) == 0.75);
  auto reverse_digits = [](std::uint64_t i, std::uint32_t b) {
    std::vector<std::uint32_t> digits;
    while (i > 0) {
      digits.push_back(static_cast<std::uint32_t>(i % b));
      i /= b;
    }
    double f = 1.0, r = 0.0;
    for (std::uint32_t dgt : digits) {
      f /= b;
      r += f * dgt;
    }
    return r;
  };
  for (std::uint32_t base : {2u, 3u, 5u}) {
    for (std::uint64_t i = 1; i <= 64; ++i)
      CHECK(halton_radical_inverse(i, base) == doctest::Approx(reverse_digits(i, base)).epsilon(1e-15));
  }

  // shift = 0.9 applied to 0.75 wraps to 0.65
  const double shift[1] = {0.9};
  WeightedCubeBatch b;
  make_rqmc(std::span<const double>(shift, 1), 3, 1, b);
  CHECK(b.points(2, 0) == doctest::Approx(0.65).epsilon(1e-15));

  RngStream rng(8, 0);
  CHECK_THROWS_AS(sample_rqmc(rng, 4, 65), std::invalid_argument);
}

TEST_CASE("lhs: one point per bin in every coordinate") {
  RngStream rng(6, 0);
  for (int i = 0; i < 500; ++i) {
    WeightedCubeBatch b = sample_lhs(rng, 4, 3);
    for (int j = 0; j < 3; ++j) {
      std::set<int> bins;
      for (int m = 0; m < 4; ++m) bins.insert(static_cast<int>(b.points(m, j) * 4.0));
      CHECK(bins == std::set<int>({0, 1, 2, 3}));
    }
  }
}

TEST_CASE("lhs: batch-mean variance is below iid") {
  RngStream rng(10, 0);
  const int n = 20000;
  std::vector<double> lhs_means, iid_means;
  lhs_means.reserve(n);
  iid_means.reserve(n);
  for (int i = 0; i < n; ++i) {
    WeightedCubeBatch b = sample_lhs(rng, 8, 1);
    lhs_means.push_back(b.points.col(0).mean());
    WeightedCubeBatch u = sample_iid(rng, 8, 1);
    iid_means.push_back(u.points.col(0).mean());
  }
  const MeanSe ml = mean_and_se(lhs_means);
  const MeanSe mi = mean_and_se(iid_means);
  CHECK(std::abs(ml.mean - 0.5) <= 3.0 * ml.se);
  CHECK(std::abs(mi.mean - 0.5) <= 3.0 * mi.se);
  CHECK(ml.sd < 0.5 * mi.sd);  // stratification in every coordinate
}

TEST_CASE("marginal uniformity: the Thm.-2 hypothesis, KS per coordinate") {
  // For iid/anti/qmc/lhs every fixed batch index m is marginally uniform.
  // For the stratified methods point m is confined to its slab; the uniform
  // marginal is the one at the random selector index drawn with probability
  // mu_m, so those pools mix over the selector.
  const std::size_t n = 100000;
  const double crit = ks_critical_95(n);
  const int M = 4, d = 2;
  for (Method m : {Method::iid, Method::anti, Method::strat, Method::anti_strat,
                   Method::qmc, Method::lhs}) {
    const bool per_index = m == Method::iid || m == Method::anti || m == Method::qmc ||
                           m == Method::lhs;
    RngStream rng(1001, static_cast<std::uint64_t>(m));
    RngStream sel_rng(8778, static_cast<std::uint64_t>(m));
    const std::size_t n_pools = per_index ? static_cast<std::size_t>(M * d)
                                          : static_cast<std::size_t>(d);
    std::vector<std::vector<double>> pools(n_pools);
    for (auto& p : pools) p.reserve(n);
    WeightedCubeBatch b;
    for (std::size_t i = 0; i < n; ++i) {
      sample_batch_into(m, rng, M, d, b);
      if (per_index) {
        for (int mm = 0; mm < b.size(); ++mm)
          for (int j = 0; j < d; ++j)
            if (mm < M)
              pools[static_cast<std::size_t>(mm * d + j)].push_back(b.points(mm, j));
      } else {
        // selector with probability mu_m (weights are equal by construction)
        const int mm = static_cast<int>(
            sel_rng.uniform_below(static_cast<std::uint64_t>(b.size())));
        for (int j = 0; j < d; ++j)
          pools[static_cast<std::size_t>(j)].push_back(b.points(mm, j));
      }
    }
    for (std::size_t k = 0; k < pools.size(); ++k) {
      const double ks = ks_statistic_uniform(pools[k]);
      INFO("method ", std::string(method_name(m)), " pool ", k, " ks ", ks, " crit ",
           crit);
      CHECK(ks < crit);
    }
  }
}
