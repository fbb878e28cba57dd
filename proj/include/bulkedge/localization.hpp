#pragma once

// Localization probes: amplified dynamical moments and their kernel-weighted
// time averages, spatial decay fits of projector and commutator kernels, and
// off-axis resolvent decay with its distance-to-spectrum monotonicity.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "bulkedge/common.hpp"
#include "bulkedge/lattice_model.hpp"
#include "bulkedge/profiles.hpp"
#include "bulkedge/spectral_engine.hpp"

namespace bulkedge {

// ---------------------------------------------------------------------------
// DecayFit: log-linear fit of a kernel's spatial profile,
// |K(x,y)| ~ C exp(-m d(x,y)^zeta). zeta defaults to 1 at lattice scale.

struct DecayFit {
  double C = 0.0;
  double m = 0.0;             // decay rate (positive = decaying)
  double zeta = 1.0;
  double fit_residual = 0.0;  // rms of the log-linear fit
  double window_lo = 0.0;     // distance range used
  double window_hi = 0.0;
  int bins = 0;
};

// Distance-binned mean log-norm profile (the exported CSV rows).
struct DecayBin {
  double distance = 0.0;
  double mean_lognorm = 0.0;
  long count = 0;
};

namespace detail {

// l1 distance between sites with per-axis minimal image under periodic bc.
inline int site_distance(const Geometry& g, int a, int b) {
  const int dx = min_image(a / g.Ly - b / g.Ly, g.bc_x1 == BC::periodic ? g.Lx : 0);
  const int dy = min_image(a % g.Ly - b % g.Ly, g.bc_x2 == BC::periodic ? g.Ly : 0);
  return dx + dy;
}

inline DecayFit fit_profile(const std::vector<DecayBin>& prof, double zeta, double lo, double hi) {
  std::vector<double> xs, ys;
  for (const auto& b : prof)
    if (b.distance >= lo && b.distance <= hi && b.count > 0) {
      xs.push_back(std::pow(b.distance, zeta));
      ys.push_back(b.mean_lognorm);
    }
  if (xs.size() < 4) throw NumericalError("decay fit: fewer than 4 distance bins");
  const LineFit lf = fit_line(xs, ys);
  DecayFit f;
  f.C = std::exp(lf.intercept);
  f.m = -lf.slope;
  f.zeta = zeta;
  f.fit_residual = lf.rms;
  f.window_lo = lo;
  f.window_hi = hi;
  f.bins = static_cast<int>(xs.size());
  return f;
}

// Bin log|K_xy| by distance over sampled source sites (stride over x), all
// targets y, skipping exact zeros and the on-site bin.
inline std::vector<DecayBin> binned_profile(const Mat& K, const Geometry& g, int stride,
                                            double floor_value = 1e-300) {
  std::map<int, std::pair<double, long>> acc;
  const int n = g.sites();
  for (int ix = 0; ix < g.Lx; ix += stride)
    for (int iy = 0; iy < g.Ly; iy += stride) {
      const int x = g.site(ix, iy);
      for (int y = 0; y < n; ++y) {
        if (y == x) continue;
        const double v = std::abs(K(x, y));
        if (v <= floor_value) continue;
        const int d = site_distance(g, x, y);
        auto& slot = acc[d];
        slot.first += std::log(v);
        slot.second += 1;
      }
    }
  std::vector<DecayBin> out;
  for (const auto& [d, s] : acc)
    out.push_back({static_cast<double>(d), s.first / s.second, s.second});
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Amplified dynamical moment at a single time:
//   M(t) = sum_x exp(m * d(x,x0)^zeta) |(e^{-itH} X(H) delta_{x0})(x)|^2
// with d the (periodic) l1 lattice distance from the launch site. Equal to
// the squared Hilbert-Schmidt norm of the weighted evolved kernel against the
// single-site indicator.

inline double moment(const SpectralData& sd, const Geometry& geom, int site,
                     const EnergyBump& bump, double m, double zeta, double t) {
  bump.validate();
  if (site < 0 || site >= geom.sites() || geom.sites() != sd.dim())
    throw ConfigError("moment: bad site or dimension mismatch");
  const int n = sd.dim();
  // worst-case exponent check
  const double dmax = (geom.bc_x1 == BC::periodic ? geom.Lx / 2 : geom.Lx) +
                      (geom.bc_x2 == BC::periodic ? geom.Ly / 2 : geom.Ly);
  const double emax = m * std::pow(dmax, zeta);
  if (emax > 690.0)
    throw ConfigError("moment: weight overflow, max exponent " + std::to_string(emax));
  Vec c(n);
  for (int k = 0; k < n; ++k)
    c[k] = bump(sd.eigenvalues[k]) * std::conj(sd.vectors(site, k)) *
           std::exp(-I1 * (sd.eigenvalues[k] * t));
  const Vec psi = sd.vectors * c;
  double acc = 0.0;
  for (int x = 0; x < n; ++x) {
    const int d = detail::site_distance(geom, x, site);
    acc += std::exp(m * std::pow(d, zeta)) * std::norm(psi[x]);
  }
  return acc;
}

// Kernel-weighted time average of the moment for one realization, closed form
// in the eigenbasis (no time quadrature), averaged over the given launch
// sites. Default kernel is the exponential weight (1/T) int e^{-t/T} dt.
inline double averaged_moment_single(const SpectralData& sd, const Geometry& geom,
                                     const std::vector<int>& sites, const EnergyBump& bump,
                                     double m, double zeta, double T,
                                     TimeAverageKernel kernel = TimeAverageKernel::exponential) {
  bump.validate();
  if (sites.empty()) throw ConfigError("averaged_moment_single: no launch sites");
  const int n = sd.dim();
  const double dmax = (geom.bc_x1 == BC::periodic ? geom.Lx / 2 : geom.Lx) +
                      (geom.bc_x2 == BC::periodic ? geom.Ly / 2 : geom.Ly);
  if (m * std::pow(dmax, zeta) > 690.0)
    throw ConfigError("averaged_moment_single: weight overflow");
  RVec xw(n);
  for (int k = 0; k < n; ++k) xw[k] = bump(sd.eigenvalues[k]);

  double total = 0.0;
  RVec w(n);
  for (int s : sites) {
    if (s < 0 || s >= geom.sites()) throw ConfigError("averaged_moment_single: bad site");
    for (int x = 0; x < n; ++x)
      w[x] = std::exp(m * std::pow(detail::site_distance(geom, x, s), zeta));
    // G = V^dagger diag(w) V ; value = sum_{ab} conj(c_a) c_b G_ab K(T, lam_a - lam_b)
    const Mat G = sd.vectors.adjoint() * (w.asDiagonal() * sd.vectors);
    Vec c(n);
    for (int k = 0; k < n; ++k) c[k] = xw[k] * std::conj(sd.vectors(s, k));
    cplx acc = 0.0;
    for (int a = 0; a < n; ++a) {
      if (c[a] == cplx(0.0)) continue;
      for (int b = 0; b < n; ++b) {
        if (c[b] == cplx(0.0)) continue;
        acc += std::conj(c[a]) * c[b] * G(a, b) *
               kernel_filter(kernel, T, sd.eigenvalues[a] - sd.eigenvalues[b]);
      }
    }
    total += acc.real();
  }
  return total / sites.size();
}

// Ensemble mean and standard error over per-realization values.
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& vals) {
  if (vals.empty()) throw ConfigError("mean_stderr: empty sample");
  MeanStderr r;
  r.n = static_cast<int>(vals.size());
  for (double v : vals) r.mean += v;
  r.mean /= r.n;
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : vals) ss += sqr(v - r.mean);
    r.stderr_ = std::sqrt(ss / (r.n - 1.0) / r.n);
  }
  return r;
}

// Centered stride grid of launch sites (the moment probes sample a few sites
// rather than all of them).
inline std::vector<int> sample_sites(const Geometry& g, int stride) {
  std::vector<int> out;
  for (int ix = stride / 2; ix < g.Lx; ix += stride)
    for (int iy = stride / 2; iy < g.Ly; iy += stride) out.push_back(g.site(ix, iy));
  return out;
}

// ---------------------------------------------------------------------------
// Spatial decay of the projector kernel: bins log|P_xy| by minimal-image l1
// distance and fits the log profile over the given distance window.

struct ProjectorDecayResult {
  DecayFit fit;
  std::vector<DecayBin> profile;
};

inline ProjectorDecayResult projector_kernel_decay(const Mat& P, const Geometry& geom,
                                                   double zeta = 1.0, double fit_lo = 3.0,
                                                   double fit_hi = 12.0, int stride = 6) {
  if (P.rows() != geom.sites()) throw ConfigError("projector_kernel_decay: dimension mismatch");
  ProjectorDecayResult r;
  r.profile = detail::binned_profile(P, geom, stride, 1e-280);
  r.fit = detail::fit_profile(r.profile, zeta, fit_lo, fit_hi);
  return r;
}

// ---------------------------------------------------------------------------
// Decay structure of [P, L2]: rate along the step line (|x1-y1|), and rates
// in the distances |x2|, |y2| of either endpoint from the step. Blocks with
// both endpoints deep on the same side of the step vanish identically (L2 is
// locally constant there).

struct CommutatorDecayResult {
  DecayFit along_step;   // vs |x1 - y1| with both endpoints near the step line
  DecayFit endpoint_x;   // vs |x2| of the source, other coordinates held near the step
  DecayFit endpoint_y;   // vs |y2| of the target
  double same_side_deep_max = 0.0;
  std::vector<DecayBin> along_profile;
};

inline CommutatorDecayResult commutator_kernel_decay(const Mat& P, const RVec& l2,
                                                     const Geometry& geom, double zeta = 1.0,
                                                     double near_band = 2.0, double deep = 5.0) {
  const int n = geom.sites();
  if (P.rows() != n || l2.size() != n)
    throw ConfigError("commutator_kernel_decay: dimension mismatch");
  Mat K(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) K(a, b) = P(a, b) * (l2[b] - l2[a]);

  auto x1_of = [&](int s) { return geom.x1(s / geom.Ly); };
  auto x2_of = [&](int s) { return geom.x2(s % geom.Ly); };

  std::map<int, std::pair<double, long>> along, ex, ey;
  double same_side = 0.0;
  for (int a = 0; a < n; ++a) {
    const double ax2 = x2_of(a);
    for (int b = 0; b < n; ++b) {
      const double bx2 = x2_of(b);
      const double v = std::abs(K(a, b));
      if (ax2 >= deep && bx2 >= deep) same_side = std::max(same_side, v);
      if (ax2 <= -deep && bx2 <= -deep) same_side = std::max(same_side, v);
      if (v <= 1e-280) continue;
      const int d1 = min_image(a / geom.Ly - b / geom.Ly,
                               geom.bc_x1 == BC::periodic ? geom.Lx : 0);
      if (std::abs(ax2) <= near_band && std::abs(bx2) <= near_band && d1 > 0) {
        auto& s = along[d1];
        s.first += std::log(v);
        s.second += 1;
      }
      if (std::abs(bx2) <= near_band && d1 <= static_cast<int>(near_band)) {
        const int dx2 = static_cast<int>(std::round(std::abs(ax2)));
        auto& s = ex[dx2];
        s.first += std::log(v);
        s.second += 1;
      }
      if (std::abs(ax2) <= near_band && d1 <= static_cast<int>(near_band)) {
        const int dy2 = static_cast<int>(std::round(std::abs(bx2)));
        auto& s = ey[dy2];
        s.first += std::log(v);
        s.second += 1;
      }
    }
  }
  auto to_bins = [](const std::map<int, std::pair<double, long>>& m) {
    std::vector<DecayBin> out;
    for (const auto& [d, s] : m)
      out.push_back({static_cast<double>(d), s.first / s.second, s.second});
    return out;
  };
  CommutatorDecayResult r;
  r.along_profile = to_bins(along);
  r.along_step = detail::fit_profile(r.along_profile, zeta, 1.0, 10.0);
  r.endpoint_x = detail::fit_profile(to_bins(ex), zeta, 1.0, 8.0);
  r.endpoint_y = detail::fit_profile(to_bins(ey), zeta, 1.0, 8.0);
  r.same_side_deep_max = same_side;
  return r;
}

// ---------------------------------------------------------------------------
// Resolvent kernel decay at complex energies: for each z (distance eta > 0
// from the spectrum), fit the decay rate of |(H-z)^{-1}|_{xy}. The fitted
// rate must be nondecreasing in eta; that monotonicity is the contract.

struct CombesThomasResult {
  cplx z;
  double eta = 0.0;
  DecayFit fit;
};

inline std::vector<CombesThomasResult> combes_thomas_check(const Mat& H, const Geometry& geom,
                                                           const std::vector<cplx>& z_list,
                                                           double zeta = 1.0, double fit_lo = 3.0,
                                                           double fit_hi = 12.0, int stride = 6) {
  if (H.rows() != geom.sites()) throw ConfigError("combes_thomas_check: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  const RVec lam = es.eigenvalues();
  std::vector<CombesThomasResult> out;
  const int n = geom.sites();
  for (const cplx& z : z_list) {
    double eta = 1e300;
    for (int i = 0; i < n; ++i) eta = std::min(eta, std::abs(z - cplx(lam[i])));
    if (eta < 1e-6)
      throw ConfigError("combes_thomas_check: z within 1e-6 of the spectrum");
    const Mat R = (H - z * Mat::Identity(n, n)).partialPivLu().solve(Mat::Identity(n, n));
    CombesThomasResult r;
    r.z = z;
    r.eta = eta;
    const auto prof = detail::binned_profile(R, geom, stride, 1e-280);
    r.fit = detail::fit_profile(prof, zeta, fit_lo, fit_hi);
    out.push_back(r);
  }
  return out;
}

}  // namespace bulkedge
