#pragma once

// Second-order forward-mode jets.  A Jet carries a value, a gradient and a
// packed symmetric Hessian with respect to at most kMaxJetVars variables.
// Ambient maps are written as templates over the scalar type and evaluated
// either on doubles or on Jets seeded from a chart's Taylor model.

#include <array>
#include <cmath>
#include <cstddef>

namespace conormal {

// Templates call sin/cos/exp/sqrt unqualified; these bring the double
// overloads next to the Jet ones so both scalar types resolve.
using std::cos;
using std::exp;
using std::sin;
using std::sqrt;

inline constexpr int kMaxJetVars = 8;
inline constexpr int kMaxJetHess = kMaxJetVars * (kMaxJetVars + 1) / 2;

inline constexpr int hessIndex(int i, int j) {
    return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i;
}

struct Jet {
    double v = 0.0;
    int n = 0;      // number of active variables
    int ord = 2;    // 1 skips Hessian bookkeeping
    std::array<double, kMaxJetVars> g{};
    std::array<double, kMaxJetHess> h{};

    Jet() = default;
    Jet(double value) : v(value) {}  // NOLINT: implicit constants are convenient in templates

    static Jet variable(double value, int index, int nvars, int order = 2) {
        Jet j(value);
        j.n = nvars;
        j.ord = order;
        j.g[index] = 1.0;
        return j;
    }
    static Jet constant(double value, int nvars, int order = 2) {
        Jet j(value);
        j.n = nvars;
        j.ord = order;
        return j;
    }

    double hess(int i, int j) const { return h[hessIndex(i, j)]; }
    int hessSize() const { return n * (n + 1) / 2; }
};

namespace detail {

inline void matchShape(Jet& out, const Jet& a, const Jet& b) {
    out.n = a.n > b.n ? a.n : b.n;
    out.ord = (a.n == 0) ? b.ord : (b.n == 0 ? a.ord : (a.ord < b.ord ? a.ord : b.ord));
}

// Apply a scalar function with derivatives f0, f1, f2 to a jet.
inline Jet chain(const Jet& a, double f0, double f1, double f2) {
    Jet r(f0);
    r.n = a.n;
    r.ord = a.ord;
    for (int i = 0; i < a.n; ++i) r.g[i] = f1 * a.g[i];
    if (a.ord >= 2) {
        for (int i = 0; i < a.n; ++i)
            for (int j = 0; j <= i; ++j) {
                const int k = hessIndex(i, j);
                r.h[k] = f1 * a.h[k] + f2 * a.g[i] * a.g[j];
            }
    }
    return r;
}

}  // namespace detail

inline Jet operator+(const Jet& a, const Jet& b) {
    Jet r(a.v + b.v);
    detail::matchShape(r, a, b);
    for (int i = 0; i < r.n; ++i) r.g[i] = a.g[i] + b.g[i];
    if (r.ord >= 2)
        for (int k = 0; k < r.hessSize(); ++k) r.h[k] = a.h[k] + b.h[k];
    return r;
}

inline Jet operator-(const Jet& a, const Jet& b) {
    Jet r(a.v - b.v);
    detail::matchShape(r, a, b);
    for (int i = 0; i < r.n; ++i) r.g[i] = a.g[i] - b.g[i];
    if (r.ord >= 2)
        for (int k = 0; k < r.hessSize(); ++k) r.h[k] = a.h[k] - b.h[k];
    return r;
}

inline Jet operator-(const Jet& a) {
    Jet r(-a.v);
    r.n = a.n;
    r.ord = a.ord;
    for (int i = 0; i < r.n; ++i) r.g[i] = -a.g[i];
    if (r.ord >= 2)
        for (int k = 0; k < r.hessSize(); ++k) r.h[k] = -a.h[k];
    return r;
}

inline Jet operator*(const Jet& a, const Jet& b) {
    Jet r(a.v * b.v);
    detail::matchShape(r, a, b);
    for (int i = 0; i < r.n; ++i) r.g[i] = a.v * b.g[i] + b.v * a.g[i];
    if (r.ord >= 2) {
        for (int i = 0; i < r.n; ++i)
            for (int j = 0; j <= i; ++j) {
                const int k = hessIndex(i, j);
                r.h[k] = a.v * b.h[k] + b.v * a.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
            }
    }
    return r;
}

inline Jet operator*(double s, const Jet& a) {
    Jet r(s * a.v);
    r.n = a.n;
    r.ord = a.ord;
    for (int i = 0; i < r.n; ++i) r.g[i] = s * a.g[i];
    if (r.ord >= 2)
        for (int k = 0; k < r.hessSize(); ++k) r.h[k] = s * a.h[k];
    return r;
}
inline Jet operator*(const Jet& a, double s) { return s * a; }

inline Jet operator+(const Jet& a, double s) {
    Jet r = a;
    r.v += s;
    return r;
}
inline Jet operator+(double s, const Jet& a) { return a + s; }
inline Jet operator-(const Jet& a, double s) { return a + (-s); }
inline Jet operator-(double s, const Jet& a) { return (-a) + s; }

inline Jet reciprocal(const Jet& a) {
    const double iv = 1.0 / a.v;
    return detail::chain(a, iv, -iv * iv, 2.0 * iv * iv * iv);
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(const Jet& a, double s) { return (1.0 / s) * a; }
inline Jet operator/(double s, const Jet& a) { return s * reciprocal(a); }

inline Jet& operator+=(Jet& a, const Jet& b) { return a = a + b; }
inline Jet& operator-=(Jet& a, const Jet& b) { return a = a - b; }
inline Jet& operator*=(Jet& a, const Jet& b) { return a = a * b; }

inline Jet sin(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return detail::chain(a, s, c, -s);
}
inline Jet cos(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return detail::chain(a, c, -s, -c);
}
inline Jet exp(const Jet& a) {
    const double e = std::exp(a.v);
    return detail::chain(a, e, e, e);
}
inline Jet sqrt(const Jet& a) {
    const double s = std::sqrt(a.v);
    return detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

inline double value(double x) { return x; }
inline double value(const Jet& x) { return x.v; }

// Quintic smoothstep: 0 for t <= 0, 1 for t >= 1, C2 in between.
template <class S>
S smoothstep5(const S& t) {
    const double tv = value(t);
    if (tv <= 0.0) return S(0.0) * t;  // keeps the jet shape, all zeros
    if (tv >= 1.0) return S(0.0) * t + 1.0;
    const S t3 = t * t * t;
    return t3 * (10.0 + t * (-15.0 + 6.0 * t));
}

// Quintic smoothstep on [a, b].
template <class S>
S smoothstep5(const S& x, double a, double b) {
    return smoothstep5<S>((x - a) / (b - a));
}

}  // namespace conormal
