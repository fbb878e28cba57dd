#pragma once

// Tight-binding magnetic lattice models on finite rectangles: bulk torus,
// edge cylinder/box with a confining wall, deterministic disorder sampling,
// magnetic translations, and the momentum-space (Bloch) reference matrix.
//
// Conventions (frozen; several downstream quantities depend on them):
//   site index  i = ix*Ly + iy,  ix in [0,Lx), iy in [0,Ly)
//   physical coords  x1 = ix - Lx/2,  x2 = iy - Ly/2
//   H = (4 + shift) I - (hopping);  the x2-bond in column ix carries the
//   Landau-gauge phase exp(i*2*pi*phi*ix) with the raw column index ix.
//   Electric disorder adds W*u_i on the diagonal, u_i ~ U[0,1).
//   Magnetic disorder adds phase W*v to x2-bonds, v ~ U[-1/2,1/2).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "bulkedge/common.hpp"
#include "bulkedge/profiles.hpp"

namespace bulkedge {

enum class BC { periodic, open };

inline const char* to_string(BC b) { return b == BC::periodic ? "periodic" : "open"; }

struct Geometry {
  int Lx = 24;
  int Ly = 24;
  BC bc_x1 = BC::periodic;
  BC bc_x2 = BC::periodic;

  int sites() const { return Lx * Ly; }
  int site(int ix, int iy) const { return ix * Ly + iy; }
  double x1(int ix) const { return ix - Lx / 2; }
  double x2(int iy) const { return iy - Ly / 2; }

  void validate() const {
    if (Lx < 2 || Ly < 2) throw ConfigError("Geometry: Lx and Ly must be >= 2");
  }
};

struct FluxSpec {
  int p = 1;
  int q = 3;  // flux per plaquette is p/q

  double phi() const { return static_cast<double>(p) / q; }
  void validate() const {
    if (q < 1) throw ConfigError("FluxSpec: q must be >= 1");
  }
};

struct DisorderSpec {
  double W_electric = 0.0;   // diagonal amplitude, values W*U[0,1)
  double W_magnetic = 0.0;   // x2-bond phase amplitude, values W*U[-1/2,1/2)
  std::uint64_t seed = 0;

  bool any() const { return W_electric != 0.0 || W_magnetic != 0.0; }
  void validate() const {
    if (W_electric < 0 || W_magnetic < 0)
      throw ConfigError("DisorderSpec: amplitudes must be >= 0");
  }
};

// Confining wall along x1 near the left boundary: a C1 ramp (smoothstep3)
// that reaches full strength at physical x1 <= -(a + width) and vanishes for
// x1 >= -(a - width). kind electric adds a diagonal potential of the given
// height; kind magnetic adds that much extra flux per plaquette under the
// ramp (realized through accumulated x2-bond phases, so it requires open x1).
struct WallSpec {
  bool present = false;
  enum class Kind { electric, magnetic } kind = Kind::electric;
  double distance_a = 8.0;
  double width = 2.0;
  double height = 6.0;

  void validate() const {
    if (!present) return;
    if (width <= 0) throw ConfigError("WallSpec: width must be > 0");
    if (distance_a < 0) throw ConfigError("WallSpec: distance_a must be >= 0");
  }
  // Ramp profile in [0,1]: 1 deep inside the wall, 0 outside.
  double profile(double x1) const {
    return 1.0 - smoothstep3((x1 + distance_a + width) / (2.0 * width));
  }
};

inline const char* to_string(WallSpec::Kind k) {
  return k == WallSpec::Kind::electric ? "electric" : "magnetic";
}

struct ModelSpec {
  Geometry geometry;
  FluxSpec flux;
  DisorderSpec disorder;
  WallSpec wall;
  double shift = 0.0;  // diagonal is 4 + shift before disorder/wall

  void validate() const {
    geometry.validate();
    flux.validate();
    disorder.validate();
    wall.validate();
    if (geometry.bc_x1 == BC::periodic) {
      if (geometry.Lx % flux.q != 0)
        throw ConfigError("ModelSpec: periodic x1 requires q | Lx (flux commensurability)");
      if (wall.present)
        throw ConfigError("ModelSpec: a wall requires open x1");
    }
  }
};

// ---------------------------------------------------------------------------
// Deterministic disorder realization. Values are keyed by the *physical* site
// coordinates, so two geometries of different extent sample bitwise identical
// values on their overlap (bulk/edge pairing relies on this), and results do
// not depend on evaluation order or worker count.

struct DisorderRealization {
  RVec electric;   // per site, raw u in [0,1); empty if W_electric == 0
  RVec mag_phase;  // per site = per x2-bond (ix,iy)-(ix,iy+1), raw v in [-1/2,1/2)
};

namespace detail {
inline constexpr std::uint64_t kElectricTag = 0x45;
inline constexpr std::uint64_t kMagneticTag = 0x4d;
inline constexpr std::int64_t kCoordOffset = 1 << 20;

inline double site_unit(std::uint64_t seed, std::uint64_t tag, int px, int py) {
  std::uint64_t h = hash_mix(seed, tag);
  h = hash_mix(h, static_cast<std::uint64_t>(px + kCoordOffset));
  h = hash_mix(h, static_cast<std::uint64_t>(py + kCoordOffset));
  return unit_real(h);
}
}  // namespace detail

inline DisorderRealization sample_disorder(const DisorderSpec& dis, const Geometry& geom) {
  dis.validate();
  geom.validate();
  DisorderRealization r;
  const int n = geom.sites();
  if (dis.W_electric != 0.0) {
    r.electric.resize(n);
    for (int ix = 0; ix < geom.Lx; ++ix)
      for (int iy = 0; iy < geom.Ly; ++iy)
        r.electric[geom.site(ix, iy)] = detail::site_unit(
            dis.seed, detail::kElectricTag, ix - geom.Lx / 2, iy - geom.Ly / 2);
  }
  if (dis.W_magnetic != 0.0) {
    r.mag_phase.resize(n);
    for (int ix = 0; ix < geom.Lx; ++ix)
      for (int iy = 0; iy < geom.Ly; ++iy)
        r.mag_phase[geom.site(ix, iy)] = detail::site_unit(
            dis.seed, detail::kMagneticTag, ix - geom.Lx / 2, iy - geom.Ly / 2) - 0.5;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Assembled Hamiltonian with provenance and basic structural metadata.

struct HamiltonianMatrix {
  Mat H;
  ModelSpec spec;
  int max_offdiag = 0;       // largest |i-j| over nonzero entries, wrap bonds excluded
  double herm_residual = 0;  // max |H - H^dagger|

  int dim() const { return static_cast<int>(H.rows()); }
};

namespace detail {

inline HamiltonianMatrix assemble(const ModelSpec& spec) {
  spec.validate();
  const Geometry& g = spec.geometry;
  const int n = g.sites();
  const DisorderRealization dis = sample_disorder(spec.disorder, g);

  // Column-dependent x2-bond phase angle. A magnetic wall adds extra flux per
  // plaquette under its ramp, accumulated column by column.
  std::vector<double> theta(g.Lx, 0.0);
  if (spec.wall.present && spec.wall.kind == WallSpec::Kind::magnetic) {
    double acc = 0.0;
    for (int ix = 0; ix < g.Lx; ++ix) {
      theta[ix] = TWO_PI * acc;
      const double x1c = (ix + 0.5) - g.Lx / 2;  // plaquette between columns ix, ix+1
      acc += spec.flux.phi() + spec.wall.height * spec.wall.profile(x1c);
    }
  } else {
    for (int ix = 0; ix < g.Lx; ++ix) theta[ix] = TWO_PI * spec.flux.phi() * ix;
  }

  HamiltonianMatrix hm;
  hm.spec = spec;
  hm.H = Mat::Zero(n, n);
  Mat& H = hm.H;

  for (int ix = 0; ix < g.Lx; ++ix) {
    for (int iy = 0; iy < g.Ly; ++iy) {
      const int i = g.site(ix, iy);
      double d = 4.0 + spec.shift;
      if (dis.electric.size()) d += spec.disorder.W_electric * dis.electric[i];
      if (spec.wall.present && spec.wall.kind == WallSpec::Kind::electric)
        d += spec.wall.height * spec.wall.profile(g.x1(ix));
      H(i, i) = d;

      const bool x1_wraps = (ix + 1 == g.Lx);
      if (!x1_wraps || g.bc_x1 == BC::periodic) {
        const int j = g.site((ix + 1) % g.Lx, iy);
        H(j, i) += -1.0;
        H(i, j) += -1.0;
        if (!x1_wraps) hm.max_offdiag = std::max(hm.max_offdiag, std::abs(j - i));
      }
      const bool x2_wraps = (iy + 1 == g.Ly);
      if (!x2_wraps || g.bc_x2 == BC::periodic) {
        const int j = g.site(ix, (iy + 1) % g.Ly);
        double ang = theta[ix];
        if (dis.mag_phase.size()) ang += spec.disorder.W_magnetic * dis.mag_phase[i];
        const cplx t = std::exp(I1 * ang);
        H(j, i) += -t;
        H(i, j) += -std::conj(t);
        hm.max_offdiag = std::max(hm.max_offdiag, std::abs(j - i));
      }
    }
  }

  hm.herm_residual = (H - H.adjoint()).cwiseAbs().maxCoeff();
  if (hm.herm_residual > 1e-14)
    throw NumericalError("assemble: Hamiltonian is not Hermitian to 1e-14");
  return hm;
}

}  // namespace detail

// Bulk model: torus (both directions periodic), no wall.
inline HamiltonianMatrix build_bulk(ModelSpec spec) {
  spec.geometry.bc_x1 = BC::periodic;
  spec.geometry.bc_x2 = BC::periodic;
  if (spec.wall.present) throw ConfigError("build_bulk: bulk model cannot have a wall");
  return detail::assemble(spec);
}

// Edge model: open x1 (x2 periodic for a cylinder, open for a box), with an
// optional confining wall near the left boundary.
inline HamiltonianMatrix build_edge(ModelSpec spec) {
  spec.geometry.bc_x1 = BC::open;
  return detail::assemble(spec);
}

// ---------------------------------------------------------------------------
// Magnetic translation adapted to the Landau gauge used here:
//   (U_alpha psi)(ix,iy) = exp(+i*2*pi*phi*alpha1*iy) * psi(ix-alpha1, iy-alpha2)
// (the phase sign pairs with the orientation of the x2-bond phases). On the
// torus this is unitary and commutes with the clean Hamiltonian iff
// phi*alpha1*Ly is an integer; the precondition is checked directly.

inline Mat magnetic_translate(const Geometry& geom, const FluxSpec& flux, int alpha1, int alpha2) {
  geom.validate();
  flux.validate();
  if (geom.bc_x1 != BC::periodic || geom.bc_x2 != BC::periodic)
    throw ConfigError("magnetic_translate: requires a torus (both directions periodic)");
  const double pheck = flux.phi() * alpha1 * geom.Ly;
  if (std::abs(pheck - std::round(pheck)) > 1e-12)
    throw ConfigError("magnetic_translate: phi*alpha1*Ly must be an integer");
  const int n = geom.sites();
  Mat U = Mat::Zero(n, n);
  for (int ix = 0; ix < geom.Lx; ++ix) {
    for (int iy = 0; iy < geom.Ly; ++iy) {
      const int to = geom.site(ix, iy);
      const int fx = ((ix - alpha1) % geom.Lx + geom.Lx) % geom.Lx;
      const int fy = ((iy - alpha2) % geom.Ly + geom.Ly) % geom.Ly;
      U(to, geom.site(fx, fy)) = std::exp(I1 * (TWO_PI * flux.phi() * alpha1 * iy));
    }
  }
  return U;
}

// ---------------------------------------------------------------------------
// Per-plaquette flux audit: the gauge-invariant phase around the plaquette
// with lower-left corner (ix,iy), in units of flux quanta (arg/2pi), from the
// assembled matrix itself. For the clean bulk model every plaquette holds
// exactly p/q (mod 1).

inline double plaquette_flux(const HamiltonianMatrix& hm, int ix, int iy) {
  const Geometry& g = hm.spec.geometry;
  const int ix2 = (ix + 1) % g.Lx, iy2 = (iy + 1) % g.Ly;
  if ((ix + 1 == g.Lx && g.bc_x1 == BC::open) || (iy + 1 == g.Ly && g.bc_x2 == BC::open))
    throw ConfigError("plaquette_flux: plaquette crosses an open boundary");
  const int a = g.site(ix, iy), b = g.site(ix2, iy), c = g.site(ix2, iy2), d = g.site(ix, iy2);
  const cplx w = hm.H(b, a) * hm.H(c, b) * hm.H(d, c) * hm.H(a, d);
  if (std::abs(w) < 1e-14) throw NumericalError("plaquette_flux: missing bond");
  return std::arg(w) / TWO_PI;
}

// ---------------------------------------------------------------------------
// Momentum-space reference: the q x q Bloch matrix of the clean periodic
// model at flux p/q and momenta (k1,k2). Its eigenvalue sweep gives the clean
// band structure; its eigenvector frames feed the curvature-based invariant.

inline Mat bloch_matrix(const FluxSpec& flux, double k1, double k2, double shift = 0.0) {
  flux.validate();
  const int q = flux.q;
  if (q == 1) {
    Mat h(1, 1);
    h(0, 0) = 4.0 + shift - 2.0 * std::cos(k2) - 2.0 * std::cos(k1);
    return h;
  }
  Mat h = Mat::Zero(q, q);
  for (int j = 0; j < q; ++j) {
    h(j, j) = 4.0 + shift - 2.0 * std::cos(TWO_PI * flux.phi() * j - k2);
    if (j + 1 < q) {
      h(j, j + 1) += -1.0;
      h(j + 1, j) += -1.0;
    }
  }
  h(0, q - 1) += -std::exp(-I1 * k1);
  h(q - 1, 0) += -std::exp(I1 * k1);
  return h;
}

// Clean band interval [min,max] of band `b` (0-based, ascending) on an
// nk x nk momentum grid.
inline std::pair<double, double> clean_band_interval(const FluxSpec& flux, int b, int nk = 24,
                                                     double shift = 0.0) {
  double lo = 1e300, hi = -1e300;
  for (int i1 = 0; i1 < nk; ++i1)
    for (int i2 = 0; i2 < nk; ++i2) {
      const double k1 = TWO_PI * i1 / nk, k2 = TWO_PI * i2 / nk;
      Eigen::SelfAdjointEigenSolver<Mat> es(bloch_matrix(flux, k1, k2, shift),
                                            Eigen::EigenvaluesOnly);
      const double e = es.eigenvalues()[b];
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
  return {lo, hi};
}

// Diagonal of a spatial switch along axis 1 or 2, as a real vector over sites.
// Placing a step along a periodic direction is rejected unless explicitly
// allowed (the seam-aware edge-current construction passes allow_periodic).
inline RVec switch_diagonal(const Geometry& geom, const SwitchProfile& prof, int axis,
                            bool allow_periodic = false) {
  geom.validate();
  if (axis != 1 && axis != 2) throw ConfigError("switch_diagonal: axis must be 1 or 2");
  const BC bc = (axis == 1) ? geom.bc_x1 : geom.bc_x2;
  if (bc == BC::periodic && !allow_periodic)
    throw ConfigError("switch_diagonal: step along a periodic direction (pass allow_periodic "
                      "for seam-aware constructions)");
  RVec v(geom.sites());
  for (int ix = 0; ix < geom.Lx; ++ix)
    for (int iy = 0; iy < geom.Ly; ++iy)
      v[geom.site(ix, iy)] = prof(axis == 1 ? geom.x1(ix) : geom.x2(iy));
  return v;
}

}  // namespace bulkedge
