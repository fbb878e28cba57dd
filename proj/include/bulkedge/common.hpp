#pragma once

// Shared aliases, error types, deterministic hashing/RNG, and small numeric
// helpers used across the library.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bulkedge {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using RMat = Eigen::MatrixXd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;

inline constexpr double TWO_PI = 6.283185307179586476925286766559;
inline constexpr cplx I1{0.0, 1.0};

// Invalid or inconsistent user-facing configuration. CLI maps this to exit 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical contract was violated (residuals, degeneracies, non-integer
// invariants). CLI maps this to exit 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic hashing / per-site counter RNG.
// All randomness in the library is derived by hashing (seed, structured key)
// so results are independent of evaluation order, worker count, and geometry
// padding. splitmix64 is the standard 64-bit finalizer.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive combine: mix(a,b) != mix(b,a).
inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline std::uint64_t hash_string(const std::string& s, std::uint64_t seed = 0x243f6a8885a308d3ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : s) h = hash_mix(h, c);
  return splitmix64(h);
}

// Uniform double in [0,1) from a hash value, using the top 53 bits.
inline double unit_real(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Least-squares line fit y = slope*x + intercept.

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;  // rms residual of the fit
  int npts = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw NumericalError("fit_line: need at least two points");
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-300) throw NumericalError("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy - f.slope * sx) / n;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  f.npts = n;
  return f;
}

// ---------------------------------------------------------------------------
// Misc small helpers.

inline double sqr(double v) { return v * v; }

// Linear-interpolation quantile of a sample, q in [0,1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw NumericalError("quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw ConfigError("quantile: q outside [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1.0);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - lo;
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

// Minimal-image distance on a ring of circumference L (L<=0 means open).
inline int min_image(int d, int L) {
  if (L <= 0) return std::abs(d);
  d %= L;
  if (d < 0) d += L;
  return std::min(d, L - d);
}

// Hash of a complex matrix's byte content (used to tag derived data with the
// operator it came from).
inline std::uint64_t hash_matrix(const Mat& m) {
  std::uint64_t h = hash_mix(static_cast<std::uint64_t>(m.rows()),
                             static_cast<std::uint64_t>(m.cols()));
  const auto* p = reinterpret_cast<const std::uint64_t*>(m.data());
  const std::size_t nwords = static_cast<std::size_t>(m.size()) * 2;  // re+im per entry
  for (std::size_t i = 0; i < nwords; ++i) h = hash_mix(h, p[i]);
  return h;
}

}  // namespace bulkedge
