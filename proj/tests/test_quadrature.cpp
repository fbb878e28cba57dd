#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bulkedge/lattice_model.hpp"
#include "bulkedge/spectral_engine.hpp"

using namespace bulkedge;
using Catch::Approx;

namespace {

struct Fixture {
  HamiltonianMatrix hm;
  SpectralData sd;
  EnergyWindow win{2.1, 3.17};
  ErfSwitch sw{2.1, 3.17, 6.0};
  Mat gtrue, gptrue;

  Fixture() {
    ModelSpec s;
    s.geometry.Lx = 12;
    s.geometry.Ly = 12;
    s.flux = {1, 3};
    s.disorder.W_electric = 0.5;
    s.disorder.seed = 1;
    hm = build_bulk(s);
    sd = diagonalize(hm);
    gtrue = apply_function_spectral(sd, [this](double x) { return sw.g(x); });
    gptrue = apply_function_spectral(
        sd, [this](double x) { return (x <= sw.lo || x >= sw.hi) ? 0.0 : sw.dg(x, 1); });
  }
};

Fixture& fx() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("resolvent quadrature reproduces the window switch without diagonalizing") {
  QuasiAnalyticExtension q;
  q.refine = 1;
  q.threads = 4;
  const HSApplied a2 = apply_function_hs(fx().hm.H, fx().win, q, HSVariant::primitive_second_order);
  CHECK((a2.result - fx().gtrue).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(a2.nodes > 1000);
  const HSApplied a1 = apply_function_hs(fx().hm.H, fx().win, q, HSVariant::first_order);
  CHECK((a1.result - fx().gtrue).cwiseAbs().maxCoeff() < 1e-6);
  // the two reconstruction orders are independent routes to the same operator
  CHECK((a1.result - a2.result).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("the third-order variant reproduces the switch derivative") {
  QuasiAnalyticExtension q;
  q.refine = 1;
  q.threads = 4;
  const HSApplied ap = apply_function_hs(fx().hm.H, fx().win, q, HSVariant::derivative_third_order);
  CHECK((ap.result - fx().gptrue).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("grid refinement quadruples the node count and collapses the error") {
  QuasiAnalyticExtension q0;
  q0.threads = 4;
  QuasiAnalyticExtension q1 = q0;
  q1.refine = 1;
  const HSApplied c = apply_function_hs(fx().hm.H, fx().win, q0, HSVariant::primitive_second_order);
  const HSApplied f = apply_function_hs(fx().hm.H, fx().win, q1, HSVariant::primitive_second_order);
  CHECK(f.nodes == Approx(4.0 * c.nodes).epsilon(0.05));
  const double e0 = (c.result - fx().gtrue).cwiseAbs().maxCoeff();
  const double e1 = (f.result - fx().gtrue).cwiseAbs().maxCoeff();
  // once the switch width is resolved the quadrature error falls off a cliff
  CHECK(e1 < e0 / 16.0);
  CHECK(e1 < 1e-6);
}

TEST_CASE("the worker count does not change the quadrature result") {
  QuasiAnalyticExtension q1;
  q1.threads = 1;
  QuasiAnalyticExtension q3 = q1;
  q3.threads = 3;
  const HSApplied r1 = apply_function_hs(fx().hm.H, fx().win, q1, HSVariant::primitive_second_order);
  const HSApplied r3 = apply_function_hs(fx().hm.H, fx().win, q3, HSVariant::primitive_second_order);
  CHECK(r1.nodes == r3.nodes);
  CHECK((r1.result - r3.result).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quadrature settings are validated") {
  QuasiAnalyticExtension q;
  q.N = 0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = {};
  q.hu = 0.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = {};
  q.chi_hi = q.chi_lo;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  q = {};
  q.vmax = 0.5 * q.chi_hi;
  CHECK_THROWS_AS(q.validate(), ConfigError);
  // non-hermitian input is rejected
  Mat bad = Mat::Zero(4, 4);
  bad(0, 1) = 1.0;
  QuasiAnalyticExtension ok;
  CHECK_THROWS_AS(apply_function_hs(bad, fx().win, ok, HSVariant::first_order),
                  ConfigError);
}
