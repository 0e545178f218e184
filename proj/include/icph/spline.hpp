#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace icph {

enum class BasisKind { Log, Linear, Quadratic, ISpline };

// Description of the basis functions b_l used to represent the cumulative
// baseline hazard as sum_l gamma_l * b_l(t). Parametric kinds fix the basis
// outright; ISpline needs a degree and a knot sequence.
struct BasisSpec {
  BasisKind kind = BasisKind::ISpline;
  int degree = 2;                        // ISpline only
  std::vector<double> interior_knots;    // ISpline only, strictly increasing
  double t_min = 0.0;                    // ISpline boundary knots
  double t_max = 1.0;
};

inline std::string basis_kind_name(BasisKind k) {
  switch (k) {
    case BasisKind::Log: return "log";
    case BasisKind::Linear: return "linear";
    case BasisKind::Quadratic: return "quadratic";
    case BasisKind::ISpline: return "ispline";
  }
  return "?";
}

// Monotone basis evaluator. Each b_l is nondecreasing with b_l(0) = 0, so any
// nonnegative coefficient vector yields a valid cumulative hazard. For
// ISpline the b_l are integrated M-splines on the given knots; they are 0 at
// or below t_min and saturate at 1 from t_max on.
//
// Immutable after construction; concurrent read-only use is safe.
class Basis {
 public:
  explicit Basis(const BasisSpec& spec) : spec_(spec) {
    switch (spec.kind) {
      case BasisKind::Log:
      case BasisKind::Linear:
        k_ = 1;
        return;
      case BasisKind::Quadratic:
        k_ = 2;
        return;
      case BasisKind::ISpline:
        break;
    }
    if (spec.degree < 1) throw std::invalid_argument("basis degree must be >= 1");
    if (!(spec.t_min < spec.t_max))
      throw std::invalid_argument("boundary knots must satisfy t_min < t_max");
    double prev = spec.t_min;
    for (double xi : spec.interior_knots) {
      if (!(xi > prev)) throw std::invalid_argument("knots must be strictly increasing");
      prev = xi;
    }
    if (!spec.interior_knots.empty() && !(spec.interior_knots.back() < spec.t_max))
      throw std::invalid_argument("knots must be strictly increasing");

    // Extended sequence with boundaries stacked to multiplicity degree+1,
    // as needed by the order-(degree+1) M-splines in the I-spline formula.
    const int d = spec.degree;
    knots_.assign(d + 1, spec.t_min);
    knots_.insert(knots_.end(), spec.interior_knots.begin(), spec.interior_knots.end());
    knots_.insert(knots_.end(), d + 1, spec.t_max);
    k_ = static_cast<int>(spec.interior_knots.size()) + d;
  }

  int size() const { return k_; }
  const BasisSpec& spec() const { return spec_; }

  // Writes (b_1(t), ..., b_k(t)) to out.
  void eval(double t, double* out) const {
    switch (spec_.kind) {
      case BasisKind::Log:
        out[0] = std::log1p(t);
        return;
      case BasisKind::Linear:
        out[0] = t;
        return;
      case BasisKind::Quadratic:
        out[0] = t;
        out[1] = t * t;
        return;
      case BasisKind::ISpline:
        eval_ispline(t, out);
        return;
    }
  }

  std::vector<double> eval(double t) const {
    std::vector<double> v(k_);
    eval(t, v.data());
    return v;
  }

 private:
  void eval_ispline(double t, double* out) const {
    const int d = spec_.degree;
    const int n_knots = static_cast<int>(knots_.size());
    if (t <= spec_.t_min) {
      std::fill(out, out + k_, 0.0);
      return;
    }
    if (t >= spec_.t_max) {
      std::fill(out, out + k_, 1.0);
      return;
    }
    // Span index j (1-based): knots_[j-1] <= t < knots_[j].
    int j = d + 1;
    while (j < n_knots && knots_[j] <= t) ++j;

    // M-splines of order 1..d+1 at t (full arrays; the sequences are short).
    std::vector<double> m(n_knots - 1, 0.0);
    for (int i = 0; i + 1 < n_knots; ++i) {
      if (knots_[i] <= t && t < knots_[i + 1]) m[i] = 1.0 / (knots_[i + 1] - knots_[i]);
    }
    for (int ord = 2; ord <= d + 1; ++ord) {
      for (int i = 0; i + ord < n_knots; ++i) {
        const double width = knots_[i + ord] - knots_[i];
        m[i] = width > 0.0
                   ? ord * ((t - knots_[i]) * m[i] + (knots_[i + ord] - t) * m[i + 1]) /
                         ((ord - 1) * width)
                   : 0.0;
      }
    }

    // Closed-form partial sums; raw index i runs over 1..q+d+1 and the first
    // (degenerate) member is dropped, leaving k = q + d basis functions.
    for (int i = 2; i <= k_ + 1; ++i) {
      double v;
      if (i > j) {
        v = 0.0;
      } else if (i <= j - d) {
        v = 1.0;
      } else {
        v = 0.0;
        for (int mm = i; mm <= j; ++mm)
          v += (knots_[mm + d] - knots_[mm - 1]) * m[mm - 1] / (d + 1);
      }
      out[i - 2] = v;
    }
  }

  BasisSpec spec_;
  std::vector<double> knots_;  // extended sequence (ISpline only)
  int k_ = 0;
};

inline Basis build_basis(const BasisSpec& spec) { return Basis(spec); }

inline Basis parametric_basis(BasisKind kind) {
  BasisSpec spec;
  spec.kind = kind;
  return Basis(spec);
}

// Dense evaluation of the basis at many points; entry (i, l) = b_l(t_i).
struct BasisMatrix {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<double> values;  // row-major
  double at(std::size_t i, std::size_t l) const { return values[i * k + l]; }
};

inline BasisMatrix basis_matrix(const Basis& basis, const std::vector<double>& points) {
  BasisMatrix bm;
  bm.n = points.size();
  bm.k = static_cast<std::size_t>(basis.size());
  bm.values.resize(bm.n * bm.k);
  for (std::size_t i = 0; i < bm.n; ++i) basis.eval(points[i], &bm.values[i * bm.k]);
  return bm;
}

// Type-7 quantile (linear interpolation of order statistics) of sorted data.
inline double quantile_type7(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("quantile of empty set");
  const double h = (static_cast<double>(n) - 1.0) * q;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted.back();
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

// Knot rule: boundaries at the min and max of the observed finite nonzero
// interval endpoints, interior knots at equally spaced quantiles of the same
// set (n_interior = 1 places the single knot at the median).
inline BasisSpec default_knots_from_endpoints(std::vector<double> endpoints, int n_interior,
                                              int degree = 2) {
  std::sort(endpoints.begin(), endpoints.end());
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < endpoints.size(); ++i)
    if (i == 0 || endpoints[i] != endpoints[i - 1]) ++distinct;
  if (distinct < 2) throw std::invalid_argument("degenerate endpoint set");

  BasisSpec spec;
  spec.kind = BasisKind::ISpline;
  spec.degree = degree;
  spec.t_min = endpoints.front();
  spec.t_max = endpoints.back();
  spec.interior_knots.reserve(n_interior);
  for (int j = 1; j <= n_interior; ++j)
    spec.interior_knots.push_back(
        quantile_type7(endpoints, static_cast<double>(j) / (n_interior + 1)));
  return spec;
}

// Quantile-based interior knots may collide with a boundary or with each
// other (heavily tied data). Shift each duplicate to the midpoint of its
// nearest distinct neighbors so the spec becomes valid for build_basis.
inline BasisSpec resolve_knots(BasisSpec spec) {
  if (spec.kind != BasisKind::ISpline) return spec;
  if (!(spec.t_min < spec.t_max))
    throw std::invalid_argument("cannot resolve knots: t_min == t_max");
  std::sort(spec.interior_knots.begin(), spec.interior_knots.end());
  double prev = spec.t_min;
  for (std::size_t i = 0; i < spec.interior_knots.size(); ++i) {
    double v = spec.interior_knots[i];
    if (v <= prev || v >= spec.t_max) {
      const double upper = (i + 1 < spec.interior_knots.size() &&
                            spec.interior_knots[i + 1] > prev &&
                            spec.interior_knots[i + 1] < spec.t_max)
                               ? spec.interior_knots[i + 1]
                               : spec.t_max;
      v = 0.5 * (prev + upper);
      spec.interior_knots[i] = v;
    }
    if (!(v > prev && v < spec.t_max))
      throw std::invalid_argument("cannot resolve duplicate interior knots");
    prev = v;
  }
  return spec;
}

}  // namespace icph
