#pragma once

// Smooth switch profiles (spatial and spectral), window functions, and the
// smooth bump used as a spectral weight by the transport probes.

#include <algorithm>
#include <cmath>

#include "bulkedge/common.hpp"

namespace bulkedge {

// Polynomial smoothsteps on [0,1]: value 0 at 0, 1 at 1.
inline double smoothstep3(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}
inline double smoothstep3_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 6.0 * u * (1.0 - u);
}
inline double smoothstep5(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
inline double smoothstep5_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}

enum class Smoothness { smoothstep3, smoothstep5, erf_profile };

inline const char* to_string(Smoothness s) {
  switch (s) {
    case Smoothness::smoothstep3: return "smoothstep3";
    case Smoothness::smoothstep5: return "smoothstep5";
    case Smoothness::erf_profile: return "erf";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// SwitchProfile: monotone step between 1 and 0 along a coordinate.
// With one_on_left=true (default), value is 1 for x <= center-half_width and
// 0 for x >= center+half_width. The erf profile reaches its limits only
// asymptotically (tails ~0.2% at the nominal edges); the polynomial profiles
// reach them exactly.

struct SwitchProfile {
  double center = 0.0;
  double half_width = 2.0;
  bool one_on_left = true;
  Smoothness smoothness = Smoothness::smoothstep5;

  double operator()(double x) const {
    const double u = (x - (center - half_width)) / (2.0 * half_width);
    double s;
    switch (smoothness) {
      case Smoothness::smoothstep3: s = smoothstep3(u); break;
      case Smoothness::smoothstep5: s = smoothstep5(u); break;
      case Smoothness::erf_profile:
        s = 0.5 * (1.0 + std::erf(2.0 * (x - center) / half_width));
        break;
      default: s = 0.0;
    }
    return one_on_left ? 1.0 - s : s;
  }

  double derivative(double x) const {
    double d;
    switch (smoothness) {
      case Smoothness::smoothstep3: {
        const double u = (x - (center - half_width)) / (2.0 * half_width);
        d = smoothstep3_d(u) / (2.0 * half_width);
        break;
      }
      case Smoothness::smoothstep5: {
        const double u = (x - (center - half_width)) / (2.0 * half_width);
        d = smoothstep5_d(u) / (2.0 * half_width);
        break;
      }
      case Smoothness::erf_profile: {
        const double y = 2.0 * (x - center) / half_width;
        d = (2.0 / half_width) * std::exp(-y * y) / std::sqrt(M_PI);
        break;
      }
      default: d = 0.0;
    }
    return one_on_left ? -d : d;
  }
};

// ---------------------------------------------------------------------------
// EnergyWindow: a closed interval [lo,hi] of energies, plus the decreasing
// smooth window switch g (1 below lo, 0 above hi) used by the transport
// formulas, and its derivative g' (supported inside the window).

struct EnergyWindow {
  double lo = 0.0;
  double hi = 1.0;
  Smoothness smoothness = Smoothness::smoothstep5;

  void validate() const {
    if (!(hi > lo)) throw ConfigError("EnergyWindow: hi must exceed lo");
  }
  double width() const { return hi - lo; }

  double g(double e) const {
    const double u = (e - lo) / (hi - lo);
    switch (smoothness) {
      case Smoothness::smoothstep3: return 1.0 - smoothstep3(u);
      case Smoothness::smoothstep5: return 1.0 - smoothstep5(u);
      case Smoothness::erf_profile: {
        if (e <= lo) return 1.0;
        if (e >= hi) return 0.0;
        return 0.5 * (1.0 - std::erf(4.0 * (u - 0.5)));
      }
    }
    return 0.0;
  }

  double gprime(double e) const {
    const double u = (e - lo) / (hi - lo);
    switch (smoothness) {
      case Smoothness::smoothstep3: return -smoothstep3_d(u) / (hi - lo);
      case Smoothness::smoothstep5: return -smoothstep5_d(u) / (hi - lo);
      case Smoothness::erf_profile: {
        if (u <= 0.0 || u >= 1.0) return 0.0;
        const double y = 4.0 * (u - 0.5);
        return -(4.0 / (hi - lo)) * std::exp(-y * y) / std::sqrt(M_PI);
      }
    }
    return 0.0;
  }
};

// ---------------------------------------------------------------------------
// EnergyBump: smooth nonnegative bump supported in [lo,hi] with max value 1,
// built as the square of a product of smoothstep shoulders. shoulder_frac is
// the fraction of the window width taken by each shoulder; states deeper than
// one shoulder from either edge sit on the flat plateau at exactly 1.

struct EnergyBump {
  double lo = 0.0;
  double hi = 1.0;
  double shoulder_frac = 0.25;

  void validate() const {
    if (!(hi > lo)) throw ConfigError("EnergyBump: hi must exceed lo");
    if (!(shoulder_frac > 0.0 && shoulder_frac <= 0.5))
      throw ConfigError("EnergyBump: shoulder_frac must be in (0, 0.5]");
  }

  double operator()(double e) const {
    if (e <= lo || e >= hi) return 0.0;
    const double sw = shoulder_frac * (hi - lo);
    const double rise = smoothstep5(std::clamp((e - lo) / sw, 0.0, 1.0));
    const double fall = smoothstep5(std::clamp((hi - e) / sw, 0.0, 1.0));
    return sqr(rise * fall);
  }
};

}  // namespace bulkedge
