#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "bulkedge/lattice_model.hpp"
#include "bulkedge/spectral_engine.hpp"

using namespace bulkedge;
using Catch::Approx;

namespace {

ModelSpec torus_13() {
  ModelSpec s;
  s.geometry.Lx = 24;
  s.geometry.Ly = 24;
  s.flux = {1, 3};
  return s;
}

}  // namespace

TEST_CASE("site indexing round trips and physical coordinates are centered") {
  Geometry g;
  g.Lx = 6;
  g.Ly = 4;
  std::set<int> seen;
  for (int ix = 0; ix < g.Lx; ++ix)
    for (int iy = 0; iy < g.Ly; ++iy) {
      const int s = g.site(ix, iy);
      REQUIRE(s == ix * g.Ly + iy);
      seen.insert(s);
    }
  CHECK(static_cast<int>(seen.size()) == g.sites());
  CHECK(g.x1(0) == -3.0);
  CHECK(g.x1(g.Lx - 1) == 2.0);
  CHECK(g.x2(g.Ly / 2) == 0.0);
}

TEST_CASE("clean torus Hamiltonian is hermitian with the expected bandwidth") {
  const HamiltonianMatrix hm = build_bulk(torus_13());
  CHECK(hm.herm_residual < 1e-14);
  const SpectralData sd = diagonalize(hm);
  // flux 1/3 spectrum of 4 - 2cos k1 - 2cos k2 analogues: three bands
  CHECK(sd.eigenvalues.minCoeff() == Approx(1.2679491924311228).margin(1e-9));
  CHECK(sd.eigenvalues.maxCoeff() == Approx(6.7320508075688776).margin(1e-9));
}

TEST_CASE("clean band intervals at flux 1/3 and the inter-band gaps") {
  FluxSpec f{1, 3};
  const auto b0 = clean_band_interval(f, 0);
  const auto b1 = clean_band_interval(f, 1);
  const auto b2 = clean_band_interval(f, 2);
  CHECK(b0.first == Approx(1.2679491924311228).margin(1e-6));
  CHECK(b0.second == Approx(2.0).margin(1e-6));
  CHECK(b1.first == Approx(3.2679491924311228).margin(1e-6));
  CHECK(b1.second == Approx(4.7320508075688776).margin(1e-6));
  CHECK(b2.first == Approx(6.0).margin(1e-6));
  CHECK(b2.second == Approx(6.7320508075688776).margin(1e-6));
  CHECK(b1.first > b0.second);  // gaps open
  CHECK(b2.first > b1.second);
}

TEST_CASE("every clean plaquette carries the configured flux") {
  const HamiltonianMatrix hm = build_bulk(torus_13());
  for (int ix = 0; ix < 24; ++ix)
    for (int iy = 0; iy < 24; iy += 5) {
      const double fl = plaquette_flux(hm, ix, iy);
      const double frac = fl - std::floor(fl + 0.5);
      CHECK(std::abs(frac - (1.0 / 3.0 - std::floor(1.0 / 3.0 + 0.5))) ==
            Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("electric disorder moves the diagonal only, by W times a unit uniform") {
  ModelSpec clean = torus_13();
  ModelSpec dis = clean;
  dis.disorder.W_electric = 0.8;
  dis.disorder.seed = 7;
  const Mat Hc = build_bulk(clean).H;
  const Mat Hd = build_bulk(dis).H;
  const Mat D = Hd - Hc;
  double offdiag = 0.0;
  for (int i = 0; i < D.rows(); ++i)
    for (int j = 0; j < D.cols(); ++j)
      if (i != j) offdiag = std::max(offdiag, std::abs(D(i, j)));
  CHECK(offdiag == 0.0);
  for (int i = 0; i < D.rows(); ++i) {
    CHECK(D(i, i).real() >= 0.0);
    CHECK(D(i, i).real() < 0.8);
    CHECK(D(i, i).imag() == 0.0);
  }
}

TEST_CASE("magnetic disorder preserves hopping magnitudes and the diagonal") {
  ModelSpec clean = torus_13();
  ModelSpec dis = clean;
  dis.disorder.W_magnetic = 0.5;
  dis.disorder.seed = 3;
  const Mat Hc = build_bulk(clean).H;
  const Mat Hd = build_bulk(dis).H;
  for (int i = 0; i < Hc.rows(); ++i)
    for (int j = 0; j < Hc.cols(); ++j)
      CHECK(std::abs(Hd(i, j)) == Approx(std::abs(Hc(i, j))).margin(1e-13));
}

TEST_CASE("disorder is a deterministic function of seed and physical coordinates") {
  ModelSpec a = torus_13();
  a.disorder.W_electric = 1.0;
  a.disorder.seed = 42;
  const Mat H1 = build_bulk(a).H;
  const Mat H2 = build_bulk(a).H;
  REQUIRE((H1 - H2).cwiseAbs().maxCoeff() == 0.0);
  ModelSpec b = a;
  b.disorder.seed = 43;
  CHECK((build_bulk(b).H - H1).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("samples of different sizes share disorder bitwise where they overlap") {
  DisorderSpec dis;
  dis.W_electric = 1.0;
  dis.W_magnetic = 0.3;
  dis.seed = 11;
  Geometry small;  // 24 x 24
  Geometry wide;
  wide.Lx = 32;
  wide.Ly = 24;
  const DisorderRealization rs = sample_disorder(dis, small);
  const DisorderRealization rw = sample_disorder(dis, wide);
  // physical x1 = ix - Lx/2, so wide column ix+4 sits over small column ix
  for (int ix = 0; ix < 24; ++ix)
    for (int iy = 0; iy < 24; ++iy) {
      REQUIRE(rs.electric[small.site(ix, iy)] == rw.electric[wide.site(ix + 4, iy)]);
      REQUIRE(rs.mag_phase[small.site(ix, iy)] == rw.mag_phase[wide.site(ix + 4, iy)]);
    }
}

TEST_CASE("the electric wall ramps the diagonal from full height to zero") {
  ModelSpec s = torus_13();
  s.geometry.Lx = 32;
  s.geometry.bc_x1 = BC::open;
  s.wall.present = true;
  s.wall.distance_a = 8.0;
  s.wall.width = 2.0;
  s.wall.height = 6.0;
  const HamiltonianMatrix hm = build_edge(s);
  const Geometry& g = s.geometry;
  auto diag_at = [&](int ix) { return hm.H(g.site(ix, 12), g.site(ix, 12)).real(); };
  // deep left of the ramp (x1 <= -a-w): full height
  CHECK(diag_at(0) == Approx(4.0 + 6.0).margin(1e-12));
  CHECK(diag_at(4) == Approx(4.0 + 6.0).margin(1e-12));
  // right of the ramp (x1 >= -a+w): no wall
  CHECK(diag_at(12) == Approx(4.0).margin(1e-12));
  CHECK(diag_at(31) == Approx(4.0).margin(1e-12));
  // monotone ramp in between
  double prev = diag_at(4);
  for (int ix = 5; ix <= 12; ++ix) {
    CHECK(diag_at(ix) <= prev + 1e-12);
    prev = diag_at(ix);
  }
}

TEST_CASE("the magnetic wall adds flux inside the ramp and nothing outside") {
  ModelSpec s = torus_13();
  s.geometry.Lx = 32;
  s.geometry.bc_x1 = BC::open;
  s.wall.present = true;
  s.wall.kind = WallSpec::Kind::magnetic;
  s.wall.distance_a = 8.0;
  s.wall.width = 2.0;
  s.wall.height = 0.1;  // extra flux per plaquette at full strength
  const HamiltonianMatrix hm = build_edge(s);
  auto frac = [](double v) { return v - std::floor(v + 0.5); };
  // far from the ramp the plaquette flux is the background value
  CHECK(frac(plaquette_flux(hm, 20, 12) - 1.0 / 3.0) == Approx(0.0).margin(1e-10));
  // deep inside the wall the extra flux is the full height
  CHECK(frac(plaquette_flux(hm, 2, 12) - 1.0 / 3.0 - 0.1) == Approx(0.0).margin(1e-10));
}

TEST_CASE("bulk construction rejects walls and non-commensurate sizes") {
  ModelSpec s = torus_13();
  s.wall.present = true;
  CHECK_THROWS_AS(build_bulk(s), ConfigError);
  ModelSpec t = torus_13();
  t.geometry.Lx = 25;  // not a multiple of q on the torus
  CHECK_THROWS_AS(build_bulk(t), ConfigError);
}

TEST_CASE("magnetic translations commute with the clean torus Hamiltonian") {
  const ModelSpec s = torus_13();
  const HamiltonianMatrix hm = build_bulk(s);
  for (auto [a1, a2] : {std::pair{1, 0}, {0, 1}, {2, 3}}) {
    const Mat U = magnetic_translate(s.geometry, s.flux, a1, a2);
    CHECK((U * U.adjoint() - Mat::Identity(U.rows(), U.cols())).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((U * hm.H - hm.H * U).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("disorder breaks exact translation covariance") {
  ModelSpec s = torus_13();
  s.disorder.W_electric = 0.5;
  s.disorder.seed = 1;
  const HamiltonianMatrix hm = build_bulk(s);
  const Mat U = magnetic_translate(s.geometry, s.flux, 1, 0);
  CHECK((U * hm.H - hm.H * U).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("magnetic translation preconditions are enforced") {
  Geometry g;
  g.Ly = 25;  // phi * alpha1 * Ly = 25/3 not an integer
  g.Lx = 24;
  CHECK_THROWS_AS(magnetic_translate(g, FluxSpec{1, 3}, 1, 0), ConfigError);
  Geometry open_g;
  open_g.bc_x1 = BC::open;
  CHECK_THROWS_AS(magnetic_translate(open_g, FluxSpec{1, 3}, 1, 0), ConfigError);
}

TEST_CASE("switch diagonals are one deep on the step side and zero on the other") {
  Geometry g;
  g.Lx = 24;
  g.Ly = 24;
  g.bc_x1 = BC::open;
  SwitchProfile prof;  // centered at 0, half width 2
  const RVec v = switch_diagonal(g, prof, 1);
  CHECK(v[g.site(0, 3)] == 1.0);
  CHECK(v[g.site(23, 3)] == 0.0);
  // smooth and monotone across the step
  for (int ix = 1; ix < 24; ++ix)
    CHECK(v[g.site(ix, 0)] <= v[g.site(ix - 1, 0)] + 1e-14);
  // the same column value repeats along x2
  for (int iy = 0; iy < 24; ++iy) CHECK(v[g.site(11, iy)] == v[g.site(11, 0)]);
}

TEST_CASE("switch diagonals on a periodic axis need the explicit opt-in") {
  Geometry g;  // fully periodic
  SwitchProfile prof;
  CHECK_THROWS_AS(switch_diagonal(g, prof, 1), ConfigError);
  CHECK_NOTHROW(switch_diagonal(g, prof, 1, true));
}

TEST_CASE("open boundaries have no wrap bonds") {
  ModelSpec s = torus_13();
  s.geometry.bc_x1 = BC::open;
  s.geometry.bc_x2 = BC::open;
  const HamiltonianMatrix hm = build_edge(s);
  const Geometry& g = s.geometry;
  CHECK(std::abs(hm.H(g.site(0, 0), g.site(23, 0))) == 0.0);
  CHECK(std::abs(hm.H(g.site(5, 0), g.site(5, 23))) == 0.0);
  CHECK(hm.max_offdiag <= g.Ly);
}

TEST_CASE("bloch matrices reproduce the free dispersion at zero flux") {
  FluxSpec f{0, 1};
  for (double k1 : {0.0, 0.7})
    for (double k2 : {0.0, -1.1}) {
      const Mat h = bloch_matrix(f, k1, k2);
      REQUIRE(h.rows() == 1);
      CHECK(h(0, 0).real() == Approx(4.0 - 2 * std::cos(k1) - 2 * std::cos(k2)).margin(1e-12));
    }
}
