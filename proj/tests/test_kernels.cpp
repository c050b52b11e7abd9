#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "mmda/kernels.hpp"
#include "mmda/rng.hpp"

using namespace mmda;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
  Rng rng(7);
  // sizes straddling the parallel grain, including odd shapes
  const std::vector<std::pair<int, int>> shapes = {{3, 5}, {64, 64}, {129, 257}, {300, 301}};
  for (auto [m, n] : shapes) {
    auto w = random_vec(rng, static_cast<std::size_t>(m) * n);
    auto x = random_vec(rng, static_cast<std::size_t>(n));
    auto v = random_vec(rng, static_cast<std::size_t>(m));

    std::vector<double> y_ser(m), y_par(m);
    kernels::serial::matvec(w.data(), x.data(), y_ser.data(), m, n);
    kernels::set_parallel(true);
    kernels::matvec(w.data(), x.data(), y_par.data(), m, n);
    CHECK(y_ser == y_par);

    std::vector<double> t_ser(n, 0.5), t_par(n, 0.5);
    kernels::serial::matvec_t_acc(w.data(), v.data(), t_ser.data(), m, n);
    kernels::matvec_t_acc(w.data(), v.data(), t_par.data(), m, n);
    CHECK(t_ser == t_par);

    std::vector<double> g_ser = w, g_par = w;
    kernels::serial::ger_acc(v.data(), x.data(), g_ser.data(), m, n);
    kernels::ger_acc(v.data(), x.data(), g_par.data(), m, n);
    CHECK(g_ser == g_par);
  }
}

TEST_CASE("matmul variants match serial bitwise") {
  Rng rng(11);
  const int m = 65, k = 33, n = 47;
  auto a = random_vec(rng, static_cast<std::size_t>(m) * k);
  auto bt = random_vec(rng, static_cast<std::size_t>(n) * k);
  auto b = random_vec(rng, static_cast<std::size_t>(k) * n);
  auto g = random_vec(rng, static_cast<std::size_t>(m) * n);

  std::vector<double> c1s(static_cast<std::size_t>(m) * n), c1p = c1s;
  kernels::serial::matmul_nt(a.data(), bt.data(), c1s.data(), m, k, n);
  kernels::set_parallel(true);
  kernels::matmul_nt(a.data(), bt.data(), c1p.data(), m, k, n);
  CHECK(c1s == c1p);

  std::vector<double> c2s(static_cast<std::size_t>(m) * n, 0.25), c2p = c2s;
  kernels::serial::matmul_nn_acc(a.data(), b.data(), c2s.data(), m, k, n);
  kernels::matmul_nn_acc(a.data(), b.data(), c2p.data(), m, k, n);
  CHECK(c2s == c2p);

  std::vector<double> c3s(static_cast<std::size_t>(k) * n, -0.125), c3p = c3s;
  kernels::serial::matmul_tn_acc(a.data(), g.data(), c3s.data(), m, k, n);
  kernels::matmul_tn_acc(a.data(), g.data(), c3p.data(), m, k, n);
  CHECK(c3s == c3p);

  std::vector<double> s1(n, 0.0), s2(n, 0.0);
  kernels::serial::colsum_acc(g.data(), s1.data(), m, n);
  kernels::colsum_acc(g.data(), s2.data(), m, n);
  CHECK(s1 == s2);
}

TEST_CASE("conv1d matches serial bitwise and handles padding") {
  Rng rng(13);
  for (int n : {1, 5, 400}) {
    for (int k : {1, 3, 7}) {
      auto x = random_vec(rng, static_cast<std::size_t>(n));
      auto ker = random_vec(rng, static_cast<std::size_t>(k));
      std::vector<double> ys(n), yp(n);
      kernels::serial::conv1d(x.data(), ker.data(), ys.data(), n, k);
      kernels::set_parallel(true);
      kernels::conv1d(x.data(), ker.data(), yp.data(), n, k);
      CHECK(ys == yp);
    }
  }
}

TEST_CASE("disabling parallel mode falls back to serial") {
  kernels::set_parallel(false);
  CHECK(kernels::thread_count() == 1);
  Rng rng(3);
  const int m = 200, n = 200;
  auto w = random_vec(rng, static_cast<std::size_t>(m) * n);
  auto x = random_vec(rng, static_cast<std::size_t>(n));
  std::vector<double> y1(m), y2(m);
  kernels::matvec(w.data(), x.data(), y1.data(), m, n);
  kernels::serial::matvec(w.data(), x.data(), y2.data(), m, n);
  CHECK(y1 == y2);
  kernels::set_parallel(true);
}
