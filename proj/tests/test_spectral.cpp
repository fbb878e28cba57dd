#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bulkedge/lattice_model.hpp"
#include "bulkedge/spectral_engine.hpp"

using namespace bulkedge;
using Catch::Approx;

namespace {

Mat random_hermitian(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = cplx(nd(gen), nd(gen));
  return Mat(0.5 * (A + A.adjoint()));
}

}  // namespace

TEST_CASE("diagonalization reconstructs the operator") {
  const Mat H = random_hermitian(40, 1);
  const SpectralData sd = diagonalize(H);
  CHECK(sd.residual < 1e-12);
  const Mat R = sd.vectors * sd.eigenvalues.asDiagonal() * sd.vectors.adjoint();
  CHECK((R - H).cwiseAbs().maxCoeff() < 1e-11);
  for (int i = 1; i < sd.dim(); ++i) CHECK(sd.eigenvalues[i] >= sd.eigenvalues[i - 1]);
}

TEST_CASE("fermi projectors are orthogonal projections of the right rank") {
  const Mat H = random_hermitian(30, 2);
  const SpectralData sd = diagonalize(H);
  const double EF = 0.5 * (sd.eigenvalues[14] + sd.eigenvalues[15]);
  const Mat P = fermi_projector(sd, EF);
  CHECK((P * P - P).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((P - P.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(P.trace().real() == Approx(15.0).margin(1e-10));
  // placing the level exactly on an eigenvalue is rejected
  CHECK_THROWS_AS(fermi_projector(sd, sd.eigenvalues[7]), NumericalError);
}

TEST_CASE("spectral calculus applies scalar functions exactly") {
  const Mat H = random_hermitian(25, 3);
  const SpectralData sd = diagonalize(H);
  const Mat H2 = apply_function_spectral(sd, [](double x) { return x * x; });
  CHECK((H2 - H * H).cwiseAbs().maxCoeff() < 1e-10);
  const Mat U = evolve_operator(sd, 0.37);
  CHECK((U * U.adjoint() - Mat::Identity(25, 25)).cwiseAbs().maxCoeff() < 1e-12);
  Vec psi = Vec::Zero(25);
  psi[3] = 1.0;
  const Vec ev = evolve_state(sd, psi, 0.37);
  CHECK((U * psi - ev).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(ev.norm() == Approx(1.0).margin(1e-12));
}

TEST_CASE("time-average filters match their defining integrals") {
  // uniform: (1/T) int_0^T e^{i t delta} dt, checked by fine midpoint sums
  for (double T : {0.5, 3.0, 40.0})
    for (double delta : {-1.3, -0.02, 0.4, 2.0}) {
      const int N = 40000;
      cplx acc = 0.0;
      for (int k = 0; k < N; ++k) {
        const double t = (k + 0.5) * T / N;
        acc += std::exp(I1 * (t * delta));
      }
      acc /= N;
      const cplx f = kernel_filter(TimeAverageKernel::uniform, T, delta);
      CHECK(std::abs(f - acc) < 1e-8);
    }
  // exponential: (1/T) int_0^inf e^{-t/T} e^{i t delta} dt = 1/(1 - i T delta)
  for (double T : {0.5, 10.0})
    for (double delta : {-0.7, 1.9}) {
      const int N = 400000;
      const double tmax = 40.0 * T;
      cplx acc = 0.0;
      for (int k = 0; k < N; ++k) {
        const double t = (k + 0.5) * tmax / N;
        acc += std::exp(-t / T) * std::exp(I1 * (t * delta));
      }
      acc *= tmax / N / T;
      CHECK(std::abs(kernel_filter(TimeAverageKernel::exponential, T, delta) - acc) < 1e-6);
    }
}

TEST_CASE("filters are continuous through zero frequency and exact at T=0") {
  for (auto k : {TimeAverageKernel::uniform, TimeAverageKernel::exponential}) {
    CHECK(kernel_filter(k, 0.0, 1.7) == cplx(1.0, 0.0));
    CHECK(std::abs(kernel_filter(k, 5.0, 1e-14) - kernel_filter(k, 5.0, 1e-11)) < 1e-9);
    CHECK(std::abs(kernel_filter(k, 5.0, 0.0) - cplx(1.0, 0.0)) < 1e-10);
  }
}

TEST_CASE("kernel-averaged evolution matches a direct time quadrature") {
  const Mat H = random_hermitian(12, 4);
  const SpectralData sd = diagonalize(H);
  const Mat A = random_hermitian(12, 5);
  const double T = 2.0;
  const Mat avg = heisenberg_time_average(sd, A, T, TimeAverageKernel::uniform);
  const int N = 4000;
  Mat acc = Mat::Zero(12, 12);
  for (int k = 0; k < N; ++k) {
    const double t = (k + 0.5) * T / N;
    const Mat U = evolve_operator(sd, t);
    acc += U.adjoint() * A * U;
  }
  acc /= N;
  CHECK((avg - acc).cwiseAbs().maxCoeff() < 1e-5);
  // conjugation direction: averaging commutes with the spectral projectors
  const Mat avg0 = heisenberg_time_average(sd, A, 0.0, TimeAverageKernel::uniform);
  CHECK((avg0 - A).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("long averages suppress off-diagonal matrix elements") {
  const Mat H = random_hermitian(15, 6);
  const SpectralData sd = diagonalize(H);
  const Mat A = random_hermitian(15, 7);
  const Mat big = heisenberg_time_average(sd, A, 1e8, TimeAverageKernel::uniform);
  // the T -> inf limit is the diagonal part in the eigenbasis
  Mat diag_part = sd.vectors.adjoint() * A * sd.vectors;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j)
      if (i != j) diag_part(i, j) = 0.0;
  const Mat lim = sd.vectors * diag_part * sd.vectors.adjoint();
  CHECK((big - lim).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("erf switch derivatives agree with finite differences") {
  const ErfSwitch sw(2.1, 3.17, 6.0);
  CHECK(sw.g(1.0) == 1.0);
  CHECK(sw.g(4.0) == 0.0);
  CHECK(sw.g(2.1) == Approx(1.0).margin(1e-12));
  const double h = 1e-6;
  for (double x : {2.3, 2.6, 3.0}) {
    const double fd1 = (sw.g(x + h) - sw.g(x - h)) / (2 * h);
    CHECK(sw.dg(x, 1) == Approx(fd1).margin(1e-6 * std::max(1.0, std::abs(fd1))));
    const double fd2 = (sw.dg(x + h, 1) - sw.dg(x - h, 1)) / (2 * h);
    CHECK(sw.dg(x, 2) == Approx(fd2).epsilon(1e-5));
    const double fd3 = (sw.dg(x + h, 2) - sw.dg(x - h, 2)) / (2 * h);
    CHECK(sw.dg(x, 3) == Approx(fd3).epsilon(1e-4));
  }
}

TEST_CASE("the erf switch primitive differentiates back to minus the switch") {
  const ErfSwitch sw(2.1, 3.17, 6.0);
  const double h = 1e-6;
  for (double x : {1.5, 2.3, 2.64, 3.0, 3.5}) {
    const double fd = (sw.G(x + h) - sw.G(x - h)) / (2 * h);
    CHECK(fd == Approx(-sw.g(x)).margin(1e-8));
  }
  // far above the window the primitive vanishes
  CHECK(sw.G(5.0) == Approx(0.0).margin(1e-14));
  // far below it grows linearly with unit slope
  CHECK(sw.G(0.0) - sw.G(1.0) == Approx(1.0).margin(1e-12));
}
