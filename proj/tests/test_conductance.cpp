#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bulkedge/conductance.hpp"
#include "bulkedge/lattice_model.hpp"
#include "bulkedge/spectral_engine.hpp"

using namespace bulkedge;
using Catch::Approx;

namespace {

ModelSpec torus_13(double W = 0.0, uint64_t seed = 0) {
  ModelSpec s;
  s.geometry.Lx = 24;
  s.geometry.Ly = 24;
  s.flux = {1, 3};
  s.disorder.W_electric = W;
  s.disorder.seed = seed;
  return s;
}

ModelSpec clean_cylinder() {
  ModelSpec s;
  s.geometry.Lx = 32;
  s.geometry.Ly = 24;
  s.geometry.bc_x1 = BC::open;
  s.flux = {1, 3};
  s.wall.present = true;
  s.wall.distance_a = 8.0;
  s.wall.width = 2.0;
  s.wall.height = 6.0;
  return s;
}

struct EdgeFixture {
  ModelSpec spec = clean_cylinder();
  HamiltonianMatrix hm;
  SpectralData sd;
  RVec l1, l2;
  EdgeOperators eo;
  EnergyWindow win{2.1, 3.17};

  EdgeFixture() {
    hm = build_edge(spec);
    sd = diagonalize(hm);
    SwitchProfile prof;
    l1 = switch_diagonal(spec.geometry, prof, 1);
    l2 = switch_diagonal(spec.geometry, prof, 2, true);
    eo = make_edge_operators(hm, sd, l1, l2);
  }
};

EdgeFixture& edge_fx() {
  static EdgeFixture f;
  return f;
}

Mat random_projector(int n, int rank, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = cplx(nd(gen), nd(gen));
  const Eigen::HouseholderQR<Mat> qr(A);
  const Mat Q = qr.householderQ() * Mat::Identity(n, rank);
  return Q * Q.adjoint();
}

}  // namespace

TEST_CASE("clean transport at one third flux sits on the quantized plateau") {
  const ModelSpec spec = torus_13();
  const SpectralData sd = diagonalize(build_bulk(spec));
  const Mat P = fermi_projector(sd, 2.63);
  SwitchProfile prof;
  const RVec l1 = switch_diagonal(spec.geometry, prof, 1, true);
  const RVec l2 = switch_diagonal(spec.geometry, prof, 2, true);
  const HallResult h = hall_switch(P, l1, l2, spec.geometry);
  CHECK(h.value == Approx(0.99344337965136).margin(1e-4));
  CHECK(h.imag_residual < 1e-10);
  CHECK_FALSE(h.imag_flagged);
  // the double-commutator density is the same number, not merely close
  const HallResult hdc = hall_double_commutator(P, l1, l2, spec.geometry);
  CHECK(std::abs(hdc.value - h.value) < 1e-10);
  // the position-local marker lands on the same plateau
  const PositionLocalResult pl = hall_position_local(P, spec.geometry);
  CHECK(pl.value == Approx(0.9990467263).margin(1e-3));
  CHECK(std::abs(pl.value - h.value) < 0.05);
  CHECK_FALSE(pl.boundary_flagged);
  // the momentum-space invariant agrees
  CHECK(chern_oracle(spec.flux, 1) == 1);
}

TEST_CASE("transport identities hold at machine precision for random projectors") {
  Geometry g;
  g.Lx = 5;
  g.Ly = 8;
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  double worst_dec = 0.0, worst_pair = 0.0, worst_pie = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int rank = 1 + static_cast<int>(gen() % 38);
    const Mat P = random_projector(40, rank, 1000 + k);
    RVec l1(40), l2(40);
    for (int i = 0; i < 40; ++i) {
      l1[i] = ud(gen);
      l2[i] = ud(gen);
    }
    worst_dec = std::max(worst_dec, check_dec_hall(P, l1, l2));
    const HallResult a = hall_switch(P, l1, l2, g, 1.5);
    const HallResult b = hall_double_commutator(P, l1, l2, g, 1.5);
    worst_pair = std::max(worst_pair, std::abs(a.value - b.value));
    worst_pie = std::max(worst_pie, std::abs(pi_E(P, l1, l2).trace()));
  }
  CHECK(worst_dec < 1e-9);
  CHECK(worst_pair < 1e-8);
  CHECK(worst_pie < 1e-9);
}

TEST_CASE("transport identities hold for disordered ground-state projectors") {
  ModelSpec s;
  s.geometry.Lx = 12;
  s.geometry.Ly = 12;
  s.flux = {1, 3};
  s.disorder.W_electric = 1.0;
  SwitchProfile prof;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    s.disorder.seed = seed;
    const SpectralData sd = diagonalize(build_bulk(s));
    const Mat P = fermi_projector(sd, 2.9);
    const RVec l1 = switch_diagonal(s.geometry, prof, 1, true);
    const RVec l2 = switch_diagonal(s.geometry, prof, 2, true);
    CHECK(check_dec_hall(P, l1, l2) < 1e-9);
    const HallResult a = hall_switch(P, l1, l2, s.geometry, 3.0);
    const HallResult b = hall_double_commutator(P, l1, l2, s.geometry, 3.0);
    CHECK(std::abs(a.value - b.value) < 1e-8);
  }
}

TEST_CASE("the transport coefficient is constant across a spectral gap") {
  const ModelSpec spec = torus_13(0.5, 4);
  const SpectralData sd = diagonalize(build_bulk(spec));
  SwitchProfile prof;
  const RVec l1 = switch_diagonal(spec.geometry, prof, 1, true);
  const RVec l2 = switch_diagonal(spec.geometry, prof, 2, true);
  // no eigenvalues inside the realized gap, so the projector cannot change
  int inside = 0;
  for (int i = 0; i < sd.dim(); ++i)
    if (sd.eigenvalues[i] > 2.4 && sd.eigenvalues[i] < 3.4) ++inside;
  REQUIRE(inside == 0);
  const double h1 = hall_switch(fermi_projector(sd, 2.4), l1, l2, spec.geometry).value;
  const double h2 = hall_switch(fermi_projector(sd, 2.9), l1, l2, spec.geometry).value;
  const double h3 = hall_switch(fermi_projector(sd, 3.4), l1, l2, spec.geometry).value;
  CHECK(h1 == h2);
  CHECK(h2 == h3);
  CHECK(h2 == Approx(1.0).margin(0.03));
}

TEST_CASE("momentum-space invariants across fluxes, with gap-closure rejection") {
  CHECK(chern_oracle(FluxSpec{1, 3}, 1) == 1);
  CHECK(chern_oracle(FluxSpec{1, 3}, 2) == -1);
  CHECK(chern_oracle(FluxSpec{1, 5}, 1) == 1);
  CHECK(chern_oracle(FluxSpec{2, 5}, 2) == 1);
  // at half flux the two bands touch: the oracle must refuse, not guess
  CHECK_THROWS_AS(chern_oracle(FluxSpec{1, 2}, 1), ChernOracleError);
}

TEST_CASE("seam-aware current agrees with the commutator away from the seam") {
  const EdgeFixture& f = edge_fx();
  const Geometry& g = f.spec.geometry;
  const Mat M = cut_current(f.hm.H, f.l2, g);
  const Mat C = f.hm.H * f.l2.asDiagonal().toDenseMatrix() -
                f.l2.asDiagonal().toDenseMatrix() * f.hm.H;
  // wrap bonds (minimal-image distance through the seam) are dropped
  for (int ix = 0; ix < g.Lx; ix += 7) {
    CHECK(std::abs(M(g.site(ix, 0), g.site(ix, g.Ly - 1))) == 0.0);
    CHECK(std::abs(C(g.site(ix, 0), g.site(ix, g.Ly - 1))) > 0.0);
  }
  // all other entries match the commutator exactly
  Mat D = M - C;
  for (int ix = 0; ix < g.Lx; ++ix) {
    D(g.site(ix, 0), g.site(ix, g.Ly - 1)) = 0.0;
    D(g.site(ix, g.Ly - 1), g.site(ix, 0)) = 0.0;
  }
  CHECK(D.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("on open geometry the current operator is exactly the commutator") {
  ModelSpec s = clean_cylinder();
  s.geometry.bc_x2 = BC::open;
  const HamiltonianMatrix hm = build_edge(s);
  SwitchProfile prof;
  const RVec l2 = switch_diagonal(s.geometry, prof, 2);
  const Mat M = cut_current(hm.H, l2, s.geometry);
  const Mat C = hm.H * l2.asDiagonal().toDenseMatrix() -
                l2.asDiagonal().toDenseMatrix() * hm.H;
  CHECK((M - C).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("clean boundary conductance matches the bulk plateau and is flat in T") {
  const EdgeFixture& f = edge_fx();
  const double s0 = edge_conductance_regularized(f.eo, f.win, 0.0);
  CHECK(s0 == Approx(0.9895).margin(5e-3));
  for (double T : {10.0, 1e3, 1e4}) {
    const double sT = edge_conductance_regularized(f.eo, f.win, T);
    CHECK(sT == Approx(s0).margin(5e-3));
  }
  // and both averaging kernels agree once converged
  const double su = edge_conductance_regularized(f.eo, f.win, 1e3, TimeAverageKernel::uniform);
  const double se = edge_conductance_regularized(f.eo, f.win, 1e3, TimeAverageKernel::exponential);
  CHECK(su == Approx(se).margin(0.05));
}

TEST_CASE("the whole-line switch variant nearly cancels on a two-boundary sample") {
  const EdgeFixture& f = edge_fx();
  const double with_step = edge_integrand(f.eo, f.win, 0.0);
  const double whole_line = edge_integrand(f.eo, f.win, 0.0, true);
  CHECK(std::abs(with_step) > 0.5);
  CHECK(std::abs(whole_line) < 0.05);
}

TEST_CASE("the gapped-trace certificate vanishes identically") {
  const EdgeFixture& f = edge_fx();
  CHECK(zero_trace_check(f.sd, f.l1, f.l2, f.win) < 1e-12);
}

TEST_CASE("translation symmetry kills the regularization remainder on the cylinder") {
  const EdgeFixture& f = edge_fx();
  for (double T : {10.0, 1e3}) CHECK(std::abs(remainder_trace_average(f.eo, f.win, T)) < 1e-10);
}

TEST_CASE("without translation symmetry the remainder decays with the averaging time") {
  ModelSpec s = clean_cylinder();
  s.geometry.Lx = 24;
  s.geometry.bc_x2 = BC::open;  // both directions open: no translation symmetry
  const HamiltonianMatrix hm = build_edge(s);
  const SpectralData sd = diagonalize(hm);
  SwitchProfile prof;
  const RVec l1 = switch_diagonal(s.geometry, prof, 1);
  const RVec l2 = switch_diagonal(s.geometry, prof, 2);
  const EdgeOperators eo = make_edge_operators(hm, sd, l1, l2);
  const EnergyWindow win{2.1, 3.17};
  const double r1 = std::abs(remainder_trace_average(eo, win, 10.0));
  const double r3 = std::abs(remainder_trace_average(eo, win, 1e3));
  CHECK(r1 > 1e-6);
  CHECK(r3 < r1 / 20.0);
}

TEST_CASE("projected current averages decay for localized disordered spectra") {
  const ModelSpec spec = torus_13(1.0, 0);
  const SpectralData sd = diagonalize(build_bulk(spec));
  SwitchProfile prof;
  const RVec l1 = switch_diagonal(spec.geometry, prof, 1, true);
  const RVec l2 = switch_diagonal(spec.geometry, prof, 2, true);
  const double v1 = std::abs(pi_E_trace_average(sd, l1, l2, 2.9, 10.0));
  const double v2 = std::abs(pi_E_trace_average(sd, l1, l2, 2.9, 1e3));
  CHECK(v1 > 0.0);
  CHECK(v2 < 0.2 * v1);
}

TEST_CASE("the comparator trace starts at zero average and its target is an exact zero") {
  const ModelSpec spec = torus_13();
  const SpectralData sd = diagonalize(build_bulk(spec));
  SwitchProfile prof;
  const RVec l1 = switch_diagonal(spec.geometry, prof, 1, true);
  const RVec l2 = switch_diagonal(spec.geometry, prof, 2, true);
  const EnergyWindow win{2.1, 3.17};
  CHECK(bulk_comparator_trace(sd, l1, l2, win, 0.0) == 0.0);
  CHECK(std::abs(gprime_weighted_pi_trace(sd, l1, l2, win)) < 1e-9);
}

TEST_CASE("wall-distance table construction and its guard rails") {
  ModelSpec base = clean_cylinder();
  base.geometry.Lx = 24;
  const EnergyWindow win{2.1, 3.17};
  SwitchProfile prof;
  const auto rows = convergence_in_a(base, {4.0, 6.0}, RVec(), win, 100.0,
                                     TimeAverageKernel::uniform, 0.0, prof, prof);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].a == 4.0);
  CHECK(std::isfinite(rows[0].edge_trace));
  CHECK(rows[1].deviation >= 0.0);
  CHECK_THROWS_AS(convergence_in_a(base, {11.0}, RVec(), win, 100.0, TimeAverageKernel::uniform,
                                   0.0, prof, prof),
                  ConfigError);
}
