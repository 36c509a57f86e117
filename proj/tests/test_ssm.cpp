#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "sfkit/grad_check.hpp"
#include "sfkit/ssm.hpp"

using namespace sfkit;

namespace {

double max_rel(const Tensor& got, const Tensor& want) {
  double peak = 0.0;
  for (double v : want.values()) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) peak = 1.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - want[i]) / peak);
  }
  return worst;
}

Tensor random_input(std::size_t n, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor x({n, c});
  for (double& v : x.values()) v = rng.normal(0.0, scale);
  return x;
}

}  // namespace

TEST_CASE("hippo init: A rows are -(n+1), D is one, seeding is bit-stable") {
  Rng rng(5);
  const auto p = hippo_init(3, 4, rng);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t n = 0; n < 4; ++n) {
      CHECK(p.A[c * 4 + n] == doctest::Approx(-static_cast<double>(n + 1)));
      CHECK(p.A[c * 4 + n] < 0.0);
    }
    CHECK(p.D[c] == 1.0);
  }
  // initial softplus(delta bias) lies in the pinned log-uniform band
  for (std::size_t c = 0; c < 3; ++c) {
    const double dt = softplus(p.b_delta[c]);
    CHECK(dt >= 0.001 - 1e-12);
    CHECK(dt <= 0.1 + 1e-12);
  }
  Rng rng2(5);
  const auto q = hippo_init(3, 4, rng2);
  for (std::size_t i = 0; i < p.w_delta.size(); ++i) CHECK(p.w_delta[i] == q.w_delta[i]);
  for (std::size_t i = 0; i < p.w_b.size(); ++i) CHECK(p.w_b[i] == q.w_b[i]);
}

TEST_CASE("discretize: ZOH limits and hand values") {
  // delta -> 0+ gives Abar -> 1, Bbar -> 0
  const auto tiny = discretize({-1.0, -2.0}, {1.0, 1.0}, 1e-12);
  CHECK(tiny.a_bar[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(tiny.b_bar[0] == doctest::Approx(0.0).epsilon(1e-9));

  const auto half = discretize({-1.0}, {0.0}, std::log(2.0));
  CHECK(half.a_bar[0] == doctest::Approx(0.5).epsilon(1e-14));

  const auto hand = discretize({-2.0}, {3.0}, 0.1);
  CHECK(hand.a_bar[0] == doctest::Approx(std::exp(-0.2)).epsilon(1e-14));
  CHECK(hand.b_bar[0] == doctest::Approx(0.3).epsilon(1e-14));

  CHECK_THROWS_AS(discretize({-1.0}, {1.0}, 0.0), InputError);
  CHECK_THROWS_AS(discretize({-1.0}, {1.0}, -0.5), InputError);
}

TEST_CASE("sequential scan: zeros in, zeros out") {
  Rng rng(6);
  const auto p = hippo_init(4, 4, rng);
  const Tensor y = selective_scan_seq(p, Tensor::zeros({16, 4}));
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("sequential scan reproduces the pinned hand recurrence") {
  const auto p = pinned_params(1, 1, std::log(2.0), {1.0}, {1.0}, -1.0, 0.0);
  const Tensor y1 = selective_scan_seq(p, Tensor({1, 1}, {1.0}));
  CHECK(y1[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const Tensor y2 = selective_scan_seq(p, Tensor({2, 1}, {1.0, 1.0}));
  CHECK(y2[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(y2[1] == doctest::Approx(0.5 * std::log(2.0) + std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("scan rejects mismatched shapes") {
  Rng rng(6);
  const auto p = hippo_init(4, 4, rng);
  CHECK_THROWS_AS(selective_scan_seq(p, Tensor::zeros({8, 3})), InputError);
}

TEST_CASE("parallel scan equals sequential scan to tight tolerances") {
  Rng rng(9);
  const auto p = hippo_init(8, 8, rng);
  for (const std::size_t n : {1ul, 5ul, 256ul, 1000ul}) {
    const Tensor x = random_input(n, 8, rng);
    const Tensor seq = selective_scan_seq(p, x);
    const Tensor par = selective_scan_parallel(p, x);
    CHECK(max_rel(par, seq) <= 1e-10);
    if (n == 1) {
      for (std::size_t i = 0; i < seq.size(); ++i) CHECK(par[i] == seq[i]);
    }
  }
}

TEST_CASE("parallel scan is invariant to block size and worker count") {
  Rng rng(10);
  const auto p = hippo_init(4, 6, rng);
  const Tensor x = random_input(300, 4, rng);
  const Tensor a = selective_scan_parallel(p, x, Precision::Double, 64, 1);
  const Tensor b = selective_scan_parallel(p, x, Precision::Double, 64, 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("combiner associativity on random triples") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double a1 = rng.uniform(0.0, 1.0), b1 = rng.normal(0.0, 1.0);
    const double a2 = rng.uniform(0.0, 1.0), b2 = rng.normal(0.0, 1.0);
    const double a3 = rng.uniform(0.0, 1.0), b3 = rng.normal(0.0, 1.0);
    // (e2 o e1) means apply e1 then e2: (a2*a1, a2*b1 + b2)
    const double a12 = a2 * a1, b12 = a2 * b1 + b2;
    const double left_a = a3 * a12, left_b = a3 * b12 + b3;
    const double a23 = a3 * a2, b23 = a3 * b2 + b3;
    const double right_a = a23 * a1, right_b = a23 * b1 + b23;
    CHECK(std::abs(left_a - right_a) <= 1e-12 * std::max(1.0, std::abs(left_a)));
    CHECK(std::abs(left_b - right_b) <= 1e-12 * std::max(1.0, std::abs(left_b)));
  }
}

TEST_CASE("single-precision parallel scan stays within float tolerance of sequential") {
  Rng rng(12);
  const auto p = hippo_init(8, 8, rng);
  const Tensor x = random_input(2048, 8, rng);
  const Tensor seq = selective_scan_seq(p, x, nullptr, Precision::Single);
  const Tensor par = selective_scan_parallel(p, x, Precision::Single);
  CHECK(max_rel(par, seq) <= 1e-5);
}

TEST_CASE("stability: |h| stays bounded for bounded inputs") {
  Rng rng(13);
  const auto p = hippo_init(2, 4, rng);
  const Tensor x = random_input(500, 2, rng, 3.0);
  ScanCache cache;
  selective_scan_seq(p, x, &cache);
  // bound: |h| <= max|b_bar*x| / (1 - max a_bar); a_bar < 1 because A < 0
  double max_abar = 0.0, max_drive = 0.0, max_h = 0.0;
  for (std::size_t t = 0; t < 500; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double dc = cache.delta[t * 2 + c];
      for (std::size_t k = 0; k < 4; ++k) {
        max_abar = std::max(max_abar, std::exp(dc * p.A[c * 4 + k]));
        max_drive = std::max(max_drive,
                             std::abs(dc * cache.b_in[t * 4 + k] * cache.x[t * 2 + c]));
      }
    }
    for (std::size_t i = 0; i < 8; ++i) max_h = std::max(max_h, std::abs(cache.h[t * 8 + i]));
  }
  CHECK(max_abar < 1.0);
  CHECK(max_h <= max_drive / (1.0 - max_abar) + 1e-9);
}

TEST_CASE("pinned-projection scan is linear in x when D = 0") {
  const auto p = pinned_params(2, 3, 0.05, {1.0, 0.5, -0.25}, {0.5, 1.0, 0.75}, -1.5, 0.0);
  Rng rng(14);
  const Tensor x = random_input(64, 2, rng);
  Tensor x2 = x;
  for (double& v : x2.values()) v *= 3.5;
  const Tensor y = selective_scan_seq(p, x);
  const Tensor y2 = selective_scan_seq(p, x2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(std::abs(y2[i] - 3.5 * y[i]) <= 1e-12 * std::max(1.0, std::abs(y2[i])));
  }
}

TEST_CASE("scan_backward: D-only configuration passes the upstream through D") {
  // projections pinned to zero drive: delta tiny, B = C = 0
  const auto p = pinned_params(3, 2, 0.01, {0.0, 0.0}, {0.0, 0.0}, -1.0, 2.5);
  Rng rng(15);
  const Tensor x = random_input(6, 3, rng);
  ScanCache cache;
  selective_scan_seq(p, x, &cache);
  const Tensor upstream = random_input(6, 3, rng);
  const Tensor g = scan_backward(p, cache, upstream);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] == doctest::Approx(2.5 * upstream[i]).epsilon(1e-12));
  }
}

TEST_CASE("scan_backward matches finite differences through the selectivity") {
  Rng rng(16);
  const auto p = hippo_init(2, 4, rng);
  const Tensor x = random_input(8, 2, rng);
  Tensor weights = random_input(8, 2, rng);
  ScanCache cache;
  selective_scan_seq(p, x, &cache);
  const Tensor grad = scan_backward(p, cache, weights);
  const Tensor fd = finite_diff_grad(
      [&](const Tensor& probe) {
        const Tensor y = selective_scan_seq(p, probe);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * y[i];
        return acc;
      },
      x, 1e-6);
  CHECK(max_rel(grad, fd) <= 1e-5);
}

TEST_CASE("scan_backward requires a forward cache") {
  Rng rng(17);
  const auto p = hippo_init(2, 2, rng);
  ScanCache cache;  // never filled
  CHECK_THROWS_AS(scan_backward(p, cache, Tensor::zeros({4, 2})), InputError);
}

TEST_CASE("causality: gradient of y_t w.r.t. x_u vanishes for u > t") {
  Rng rng(18);
  const auto p = hippo_init(2, 3, rng);
  const Tensor x = random_input(12, 2, rng);
  ScanCache cache;
  selective_scan_seq(p, x, &cache);
  Tensor upstream = Tensor::zeros({12, 2});
  upstream[5 * 2 + 1] = 1.0;  // query y_5
  const Tensor g = scan_backward(p, cache, upstream);
  for (std::size_t t = 6; t < 12; ++t) {
    CHECK(g[t * 2] == 0.0);
    CHECK(g[t * 2 + 1] == 0.0);
  }
}

TEST_CASE("bidirectional scan: palindromic input with equal params gives palindromic output") {
  Rng rng(19);
  const auto p = hippo_init(2, 3, rng);
  const std::size_t n = 7;
  Tensor x({n, 2});
  for (std::size_t t = 0; t <= n / 2; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double v = rng.normal(0.0, 1.0);
      x[t * 2 + c] = v;
      x[(n - 1 - t) * 2 + c] = v;
    }
  }
  const Tensor y = bidirectional_scan(p, p, x);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(y[t * 2 + c] == doctest::Approx(y[(n - 1 - t) * 2 + c]).epsilon(1e-12));
    }
  }
  const Tensor zeros = bidirectional_scan(p, p, Tensor::zeros({4, 2}));
  for (double v : zeros.values()) CHECK(v == 0.0);
}

TEST_CASE("bidirectional scan equals the hand composition of two sequential scans") {
  Rng rng(20);
  const auto pf = hippo_init(3, 4, rng);
  const auto pb = hippo_init(3, 4, rng);
  const Tensor x = random_input(3, 3, rng);
  const Tensor y = bidirectional_scan(pf, pb, x);

  const Tensor fwd = selective_scan_seq(pf, x);
  Tensor rx({3, 3});
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 3; ++c) rx[t * 3 + c] = x[(2 - t) * 3 + c];
  }
  const Tensor bwd = selective_scan_seq(pb, rx);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double want = 0.5 * (fwd[t * 3 + c] + bwd[(2 - t) * 3 + c]);
      CHECK(y[t * 3 + c] == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("bidirectional merge variants: sum and concat-project") {
  Rng rng(21);
  const auto pf = hippo_init(2, 3, rng);
  const auto pb = hippo_init(2, 3, rng);
  const Tensor x = random_input(5, 2, rng);
  const Tensor mean = bidirectional_scan(pf, pb, x, MergeRule::Mean);
  const Tensor sum = bidirectional_scan(pf, pb, x, MergeRule::Sum);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    CHECK(sum[i] == doctest::Approx(2.0 * mean[i]).epsilon(1e-12));
  }
  // concat weight [I/2; I/2] reproduces the mean
  Tensor w({4, 2});
  w[0 * 2 + 0] = 0.5;
  w[1 * 2 + 1] = 0.5;
  w[2 * 2 + 0] = 0.5;
  w[3 * 2 + 1] = 0.5;
  const Tensor concat = bidirectional_scan(pf, pb, x, MergeRule::ConcatProject, nullptr, &w);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    CHECK(concat[i] == doctest::Approx(mean[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bidirectional_scan(pf, pb, x, MergeRule::ConcatProject), InputError);
}

TEST_CASE("bidirectional backward matches finite differences") {
  Rng rng(22);
  const auto pf = hippo_init(2, 3, rng);
  const auto pb = hippo_init(2, 3, rng);
  const Tensor x = random_input(6, 2, rng);
  Tensor weights = random_input(6, 2, rng);
  BidirCache cache;
  bidirectional_scan(pf, pb, x, MergeRule::Mean, &cache);
  const Tensor grad = bidirectional_backward(pf, pb, cache, weights);
  const Tensor fd = finite_diff_grad(
      [&](const Tensor& probe) {
        const Tensor y = bidirectional_scan(pf, pb, probe);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += weights[i] * y[i];
        return acc;
      },
      x, 1e-6);
  CHECK(max_rel(grad, fd) <= 1e-5);
}

TEST_CASE("params serialize to tensor containers plus a manifest") {
  Rng rng(23);
  const auto p = hippo_init(3, 5, rng);
  save_params("test_params", p, 23, Precision::Double);
  const auto back = load_params("test_params");
  CHECK(back.channels == 3);
  CHECK(back.state_dim == 5);
  for (std::size_t i = 0; i < p.A.size(); ++i) CHECK(back.A[i] == p.A[i]);
  for (std::size_t i = 0; i < p.w_delta.size(); ++i) CHECK(back.w_delta[i] == p.w_delta[i]);
  for (std::size_t i = 0; i < p.b_delta.size(); ++i) CHECK(back.b_delta[i] == p.b_delta[i]);
  for (const char* suffix : {".manifest", ".A.sfkt", ".D.sfkt", ".w_delta.sfkt",
                             ".b_delta.sfkt", ".w_b.sfkt", ".b_b.sfkt", ".w_c.sfkt",
                             ".b_c.sfkt"}) {
    std::remove((std::string("test_params") + suffix).c_str());
  }
}

TEST_CASE("params validation rejects non-negative dynamics") {
  Rng rng(24);
  auto p = hippo_init(2, 2, rng);
  p.A[0] = 0.0;
  CHECK_THROWS_AS(p.validate(), InputError);
}
