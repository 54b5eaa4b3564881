#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fedzo/compressors.hpp"
#include "fedzo/errors.hpp"

using namespace fedzo;

TEST_CASE("topk keeps the largest magnitudes") {
  RngStream rng(1);
  const NumVec out = compress(CompressorSpec::top_k(2), NumVec{3.0, -5.0, 1.0}, rng);
  CHECK(out == NumVec{3.0, -5.0, 0.0});
}

TEST_CASE("topk breaks magnitude ties toward the lower index") {
  RngStream rng(1);
  CHECK(compress(CompressorSpec::top_k(1), NumVec{2.0, -2.0}, rng) == NumVec{2.0, 0.0});
  CHECK(compress(CompressorSpec::top_k(2), NumVec{1.0, -1.0, 1.0}, rng) ==
        NumVec{1.0, -1.0, 0.0});
}

TEST_CASE("randk with k = d is the identity") {
  RngStream rng(2);
  const NumVec x{1.0, 2.0};
  CHECK(compress(CompressorSpec::rand_k(2), x, rng) == x);
}

TEST_CASE("randk keeps exactly k components, uniformly") {
  RngStream rng(3);
  const NumVec x{1.0, 1.0, 1.0, 1.0};
  std::vector<int> kept(4, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const NumVec out = compress(CompressorSpec::rand_k(2), x, rng);
    REQUIRE(vec::nonzero_count(out) == 2);
    for (int c = 0; c < 4; ++c) kept[c] += out[c] != 0.0;
  }
  for (int c = 0; c < 4; ++c) {
    CHECK(static_cast<double>(kept[c]) / n == doctest::Approx(0.5).epsilon(0.04));
  }
}

TEST_CASE("qsgd of the zero vector is the zero vector") {
  RngStream rng(4);
  for (int bits : {1, 3, 8}) {
    CHECK(compress(CompressorSpec::qsgd(bits), NumVec{0.0, 0.0, 0.0}, rng) ==
          NumVec{0.0, 0.0, 0.0});
  }
}

TEST_CASE("qsgd 1-bit on [1,0] is [2/3,0] for every rounding draw") {
  // Hand evaluation: w = 1 + min(sqrt(2)/2, 2/4) = 1.5 and the bracket is
  // floor(2*1/1 + u) = 2 for all u in [0,1), so the output is 1/(2*1.5)*2.
  // Brute-force check of the scalar formula over a u-grid:
  for (double u : {0.0, 0.25, 0.5, 0.999}) {
    CHECK(std::floor(2.0 * 1.0 / 1.0 + u) == 2.0);
    CHECK(std::floor(2.0 * 0.0 / 1.0 + u) == 0.0);
  }
  RngStream rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const NumVec out = compress(CompressorSpec::qsgd(1), NumVec{1.0, 0.0}, rng);
    CHECK(out[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(out[1] == 0.0);
  }
}

TEST_CASE("qsgd outputs sit on the signed quantization grid") {
  RngStream rng(6);
  const NumVec x{0.3, -1.2, 2.0, 0.7, -0.05};
  for (int bits : {1, 2, 4}) {
    const double levels = std::ldexp(1.0, bits);
    const double d = static_cast<double>(x.size());
    const double w = 1.0 + std::min(std::sqrt(d) / levels, d / (levels * levels));
    const double unit = vec::norm(x) / (levels * w);
    for (int rep = 0; rep < 200; ++rep) {
      const NumVec out = compress(CompressorSpec::qsgd(bits), x, rng);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double steps = out[i] / unit;
        CHECK(std::fabs(steps - std::round(steps)) < 1e-9);
        if (out[i] != 0.0) CHECK(std::signbit(out[i]) == std::signbit(x[i]));
      }
    }
  }
}

TEST_CASE("selection masks split the energy exactly") {
  RngStream rng(7);
  const std::vector<CompressorSpec> specs = {
      CompressorSpec::top_k(3), CompressorSpec::rand_k(2),
      CompressorSpec::dropout_biased(0.4)};
  for (const auto& spec : specs) {
    for (int rep = 0; rep < 100; ++rep) {
      const NumVec x = rng.gaussian_vector(8);
      const NumVec cx = compress(spec, x, rng);
      const double lhs = vec::norm_sq(cx) + vec::norm_sq(vec::diff(x, cx));
      CHECK(lhs == doctest::Approx(vec::norm_sq(x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("dropout-u is unbiased per component") {
  RngStream rng(8);
  const NumVec x{1.0, -2.0, 0.5, 3.0};
  const int n = 10000;
  NumVec mean(x.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    vec::axpy(1.0 / n, compress(CompressorSpec::dropout_unbiased(0.5), x, rng), mean);
  }
  for (std::size_t c = 0; c < x.size(); ++c) {
    // Component variance is x_c^2 at p = 0.5, so SE = |x_c| / sqrt(n).
    const double se = std::fabs(x[c]) / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(mean[c] - x[c]) < 3.0 * se);
  }
}

TEST_CASE("analytic contraction constants") {
  CHECK(analytic_delta(CompressorSpec::top_k(1), 2) == 0.5);
  CHECK(analytic_delta(CompressorSpec::rand_k(3), 4) == 0.75);
  CHECK(analytic_delta(CompressorSpec::dropout_biased(0.5), 7) == 0.5);
  CHECK(analytic_delta(CompressorSpec::identity(), 3) == 1.0);
  CHECK(!analytic_delta(CompressorSpec::qsgd(2), 4).has_value());
  CHECK(!analytic_delta(CompressorSpec::dropout_unbiased(0.5), 4).has_value());
  CHECK(analytic_delta(CompressorSpec::parse("topk:0.5"), 10) == 0.5);
}

TEST_CASE("empirical contraction matches the analytic delta") {
  RngStream rng(9);
  // Identity: no compression error at all.
  auto est = estimate_contraction(CompressorSpec::identity(), 6, 10, rng);
  CHECK(est.delta_hat == 1.0);
  CHECK(!est.contraction_violated);

  // TopK is deterministic: worst case over directions is exactly k/d.
  est = estimate_contraction(CompressorSpec::top_k(1), 4, 50, rng);
  CHECK(est.delta_hat == doctest::Approx(0.25).epsilon(0.2));
  CHECK(std::fabs(est.delta_hat - 0.25) < 0.05);

  // Random operators need enough trials that the worst-over-directions max
  // of the per-probe means is not noise-dominated.
  est = estimate_contraction(CompressorSpec::rand_k(2), 4, 2000, rng);
  CHECK(std::fabs(est.delta_hat - 0.5) < 0.05);

  est = estimate_contraction(CompressorSpec::dropout_biased(0.5), 16, 2000, rng);
  CHECK(std::fabs(est.delta_hat - 0.5) < 0.05);

  // Unbiased dropout violates the contraction property.
  est = estimate_contraction(CompressorSpec::dropout_unbiased(0.5), 4, 500, rng);
  CHECK(est.contraction_violated);
  CHECK(est.delta_hat <= 0.0);
}

TEST_CASE("mean compression error respects the contraction bound") {
  RngStream rng(10);
  const std::vector<CompressorSpec> specs = {
      CompressorSpec::top_k(2), CompressorSpec::rand_k(2),
      CompressorSpec::dropout_biased(0.6), CompressorSpec::qsgd(2)};
  for (const auto& spec : specs) {
    const std::size_t dim = 6;
    const double delta = analytic_delta(spec, dim).value_or(0.0);
    for (int probe = 0; probe < 20; ++probe) {
      const NumVec x = rng.gaussian_vector(dim);
      double mean = 0.0;
      const int trials = 400;
      for (int tr = 0; tr < trials; ++tr) {
        mean += vec::norm_sq(vec::diff(compress(spec, x, rng), x)) / trials;
      }
      // 10% statistical headroom on top of (1 - delta) ||x||^2.
      CHECK(mean <= (1.0 - delta) * vec::norm_sq(x) * 1.1 + 1e-12);
    }
  }
}

TEST_CASE("compression is reproducible from the stream seed") {
  for (const char* text : {"randk:0.5", "dropout-b:0.5", "dropout-u:0.3", "qsgd:2"}) {
    const CompressorSpec spec = CompressorSpec::parse(text);
    RngStream a(123), b(123);
    const NumVec x{0.1, -2.0, 3.5, 0.0, 1.0, -0.7};
    CHECK(compress(spec.resolved(x.size()), x, a) == compress(spec.resolved(x.size()), x, b));
  }
}

TEST_CASE("string forms parse and serialize") {
  CHECK(CompressorSpec::parse("none").kind == CompressorKind::kIdentity);
  const auto topk = CompressorSpec::parse("topk:0.5");
  CHECK(topk.kind == CompressorKind::kTopK);
  CHECK(topk.k_fraction == 0.5);
  CHECK(topk.resolved(40).k == 20);
  CHECK(topk.resolved(3).k == 2);
  const auto qsgd = CompressorSpec::parse("qsgd:3");
  CHECK(qsgd.bits == 3);
  CHECK(CompressorSpec::parse("dropout-u:0.25").p == 0.25);
  CHECK(CompressorSpec::parse("qsgd:1").to_string() == "qsgd:1");

  CHECK_THROWS_AS(CompressorSpec::parse("topk"), ConfigError);
  CHECK_THROWS_AS(CompressorSpec::parse("topk:0"), ConfigError);
  CHECK_THROWS_AS(CompressorSpec::parse("qsgd:1.5"), ConfigError);
  CHECK_THROWS_AS(CompressorSpec::parse("gzip:9"), ConfigError);
}

TEST_CASE("invalid parameters and inputs are rejected") {
  RngStream rng(11);
  CHECK_THROWS_AS(compress(CompressorSpec::top_k(5), NumVec{1.0, 2.0}, rng), ConfigError);
  CHECK_THROWS_AS(compress(CompressorSpec::dropout_biased(1.5), NumVec{1.0}, rng),
                  ConfigError);
  CHECK_THROWS_AS(compress(CompressorSpec::qsgd(0), NumVec{1.0}, rng), ConfigError);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(compress(CompressorSpec::identity(), NumVec{1.0, inf}, rng),
                  NumericalError);
}

TEST_CASE("transmitted byte accounting") {
  RngStream rng(12);
  const NumVec x{1.0, -2.0, 3.0, 4.0, -5.0, 6.0, 7.0, 8.0};
  const NumVec top = compress(CompressorSpec::top_k(3), x, rng);
  CHECK(transmitted_bytes(CompressorSpec::top_k(3), top) == 24);
  CHECK(transmitted_bytes(CompressorSpec::identity(), x) == 64);
  CHECK(transmitted_bytes(CompressorSpec::qsgd(1), x) == 9);   // 8*1/8 + 8
  CHECK(transmitted_bytes(CompressorSpec::qsgd(8), x) == 16);  // 8*8/8 + 8
}
