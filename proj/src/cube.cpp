#include "dc/cube.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dc {

namespace {

constexpr int kMaxHaltonDim = 64;
constexpr std::uint32_t kPrimes[kMaxHaltonDim] = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,
    59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311};

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void init_batch(WeightedCubeBatch& out, Method m, int rows, int d) {
  out.method = m;
  out.points.resize(rows, d);
  out.weights.resize(rows);
  out.weights.setConstant(1.0 / static_cast<double>(rows));
}

}  // namespace

Method method_from_name(const std::string& name) {
  if (name == "iid") return Method::iid;
  if (name == "anti") return Method::anti;
  if (name == "strat") return Method::strat;
  if (name == "anti_strat") return Method::anti_strat;
  if (name == "qmc") return Method::qmc;
  if (name == "lhs") return Method::lhs;
  throw std::invalid_argument("unknown sampling method: " + name);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::iid: return "iid";
    case Method::anti: return "anti";
    case Method::strat: return "strat";
    case Method::anti_strat: return "anti_strat";
    case Method::qmc: return "qmc";
    case Method::lhs: return "lhs";
  }
  return "?";
}

double reflect_unit(double w) { return 1.0 - w; }

int uniform_count(Method m, int points, int d) {
  switch (m) {
    case Method::iid: return points * d;
    case Method::anti: return points / 2 * d;
    case Method::strat: return points * d;
    case Method::anti_strat: return points / 2 * d;  // points = 2 * strata
    case Method::qmc: return d;
    case Method::lhs: return points * d;  // plus the permutations
  }
  return 0;
}

void make_iid(std::span<const double> u, int M, int d, WeightedCubeBatch& out) {
  require(M >= 1 && d >= 1, "make_iid: M and d must be positive");
  require(static_cast<int>(u.size()) == M * d, "make_iid: uniform count");
  init_batch(out, Method::iid, M, d);
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < d; ++j) out.points(m, j) = u[m * d + j];
}

void make_antithetic(std::span<const double> u, int M, int d, WeightedCubeBatch& out) {
  require(M >= 2 && M % 2 == 0, "make_antithetic: M must be even and positive");
  require(d >= 1, "make_antithetic: d must be positive");
  require(static_cast<int>(u.size()) == (M / 2) * d, "make_antithetic: uniform count");
  init_batch(out, Method::anti, M, d);
  for (int k = 0; k < M / 2; ++k)
    for (int j = 0; j < d; ++j) {
      const double w = u[k * d + j];
      out.points(2 * k, j) = w;
      out.points(2 * k + 1, j) = reflect_unit(w);
    }
}

void make_stratified(std::span<const double> u, int M, int d, WeightedCubeBatch& out) {
  require(M >= 1 && d >= 1, "make_stratified: M and d must be positive");
  require(static_cast<int>(u.size()) == M * d, "make_stratified: uniform count");
  init_batch(out, Method::strat, M, d);
  for (int m = 0; m < M; ++m) {
    out.points(m, 0) = (static_cast<double>(m) + u[m * d]) / static_cast<double>(M);
    for (int j = 1; j < d; ++j) out.points(m, j) = u[m * d + j];
  }
}

void make_antithetic_stratified(std::span<const double> u, int M_strata, int d,
                                WeightedCubeBatch& out) {
  require(M_strata >= 1 && d >= 1, "make_antithetic_stratified: M and d positive");
  require(static_cast<int>(u.size()) == M_strata * d,
          "make_antithetic_stratified: uniform count");
  init_batch(out, Method::anti_strat, 2 * M_strata, d);
  const double Md = static_cast<double>(M_strata);
  for (int m = 0; m < M_strata; ++m) {
    const double w1 = (static_cast<double>(m) + u[m * d]) / Md;
    out.points(2 * m, 0) = w1;
    out.points(2 * m + 1, 0) = (2.0 * m + 1.0) / Md - w1;  // within-slab reflection
    for (int j = 1; j < d; ++j) {
      const double w = u[m * d + j];
      out.points(2 * m, j) = w;
      out.points(2 * m + 1, j) = reflect_unit(w);
    }
  }
}

double halton_radical_inverse(std::uint64_t index, std::uint32_t base) {
  double inv = 1.0 / static_cast<double>(base);
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

void make_rqmc(std::span<const double> shift, int M, int d, WeightedCubeBatch& out) {
  require(M >= 1 && d >= 1, "make_rqmc: M and d must be positive");
  require(d <= kMaxHaltonDim, "make_rqmc: d exceeds the prime-base table");
  require(static_cast<int>(shift.size()) == d, "make_rqmc: shift size");
  init_batch(out, Method::qmc, M, d);
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < d; ++j) {
      double w = halton_radical_inverse(static_cast<std::uint64_t>(m) + 1, kPrimes[j]) +
                 shift[j];
      if (w >= 1.0) w -= 1.0;
      out.points(m, j) = w;
    }
}

void make_lhs(std::span<const double> eta, std::span<const int> perm, int M, int d,
              WeightedCubeBatch& out) {
  require(M >= 1 && d >= 1, "make_lhs: M and d must be positive");
  require(static_cast<int>(eta.size()) == M * d, "make_lhs: eta count");
  require(static_cast<int>(perm.size()) == M * d, "make_lhs: perm count");
  init_batch(out, Method::lhs, M, d);
  for (int m = 0; m < M; ++m)
    for (int j = 0; j < d; ++j)
      out.points(m, j) =
          (static_cast<double>(perm[j * M + m]) + eta[m * d + j]) / static_cast<double>(M);
}

namespace {

std::vector<double>& scratch_uniforms(RngStream& rng, int n) {
  thread_local std::vector<double> buf;
  buf.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = rng.uniform01();
  return buf;
}

}  // namespace

WeightedCubeBatch sample_iid(RngStream& rng, int M, int d) {
  WeightedCubeBatch out;
  make_iid(scratch_uniforms(rng, M * d), M, d, out);
  return out;
}

WeightedCubeBatch sample_antithetic(RngStream& rng, int M, int d) {
  if (M < 2 || M % 2 != 0)
    throw std::invalid_argument("sample_antithetic: M must be even");
  WeightedCubeBatch out;
  make_antithetic(scratch_uniforms(rng, M / 2 * d), M, d, out);
  return out;
}

WeightedCubeBatch sample_stratified(RngStream& rng, int M, int d) {
  WeightedCubeBatch out;
  make_stratified(scratch_uniforms(rng, M * d), M, d, out);
  return out;
}

WeightedCubeBatch sample_antithetic_stratified(RngStream& rng, int M_strata, int d) {
  WeightedCubeBatch out;
  make_antithetic_stratified(scratch_uniforms(rng, M_strata * d), M_strata, d, out);
  return out;
}

WeightedCubeBatch sample_rqmc(RngStream& rng, int M, int d) {
  WeightedCubeBatch out;
  make_rqmc(scratch_uniforms(rng, d), M, d, out);
  return out;
}

WeightedCubeBatch sample_lhs(RngStream& rng, int M, int d) {
  thread_local std::vector<int> perm;
  perm.resize(static_cast<std::size_t>(M) * d);
  for (int j = 0; j < d; ++j) {
    int* p = perm.data() + static_cast<std::size_t>(j) * M;
    for (int m = 0; m < M; ++m) p[m] = m;
    for (int i = M - 1; i > 0; --i) {
      const int k = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[i], p[k]);
    }
  }
  WeightedCubeBatch out;
  make_lhs(scratch_uniforms(rng, M * d), perm, M, d, out);
  return out;
}

void sample_batch_into(Method m, RngStream& rng, int points, int d,
                       WeightedCubeBatch& out) {
  switch (m) {
    case Method::iid:
      make_iid(scratch_uniforms(rng, points * d), points, d, out);
      return;
    case Method::anti:
      if (points < 2 || points % 2 != 0)
        throw std::invalid_argument("anti requires even M");
      make_antithetic(scratch_uniforms(rng, points / 2 * d), points, d, out);
      return;
    case Method::strat:
      make_stratified(scratch_uniforms(rng, points * d), points, d, out);
      return;
    case Method::anti_strat: {
      if (points < 2 || points % 2 != 0)
        throw std::invalid_argument("anti_strat requires even M");
      const int strata = points / 2;
      make_antithetic_stratified(scratch_uniforms(rng, strata * d), strata, d, out);
      return;
    }
    case Method::qmc:
      make_rqmc(scratch_uniforms(rng, d), points, d, out);
      return;
    case Method::lhs:
      out = sample_lhs(rng, points, d);
      return;
  }
  throw std::invalid_argument("sample_batch_into: bad method");
}

WeightedCubeBatch sample_batch(Method m, RngStream& rng, int points, int d) {
  WeightedCubeBatch out;
  sample_batch_into(m, rng, points, d, out);
  return out;
}

}  // namespace dc
