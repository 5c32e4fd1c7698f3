#pragma once

// Rate splitting of transmitter 2 into virtual users U, V with Y = max(U, V).
//
// a = P(U=1) = 1 - (1-q)^eps and b = P(V=1) = 1 - (1-q)^(1-eps), so that
// (1-a)(1-b) = 1-q for every eps. At q = 1 std::pow(0, 0) = 1 gives the
// indicator limit a = [eps > 0]; that corner is flagged, not smoothed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "macres/probcore.hpp"

namespace macres::ratesplit {

inline constexpr double kSolveTol = 1e-6;
inline constexpr std::size_t kScanPoints = 1001;

struct SplitPoint {
    double eps = 0.0;
    double q = 0.0;  // P(Y = 1)
    Dist p_u;
    Dist p_v;
    double r1 = 0.0;   // I(X;Z|U)
    double r_u = 0.0;  // I(U;Z)
    double r_v = 0.0;  // I(V;Z|UX)
    bool discontinuous_corner = false;  // q == 1

    [[nodiscard]] double a() const { return p_u[1]; }
    [[nodiscard]] double b() const { return p_v[1]; }
    [[nodiscard]] double r2() const { return r_u + r_v; }
};

inline void check_unit(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
}

inline std::pair<Dist, Dist> split_dists(double q, double eps) {
    check_unit(q, "P(Y=1)");
    check_unit(eps, "eps");
    const double a = 1.0 - std::pow(1.0 - q, eps);
    const double b = 1.0 - std::pow(1.0 - q, 1.0 - eps);
    return {Dist::bernoulli(a), Dist::bernoulli(b)};
}

namespace detail {

inline void check_two_user_binary(const MacChannel& ch, const Dist& p_x) {
    if (ch.num_inputs() != 2 || ch.input_sizes()[0] != 2 || ch.input_sizes()[1] != 2)
        throw std::invalid_argument("rate splitting needs a two-user binary-input channel");
    if (p_x.size() != 2) throw std::invalid_argument("p_X must be binary");
}

}  // namespace detail

/// Joint pmf over axes (U, V, X, Y, Z) with U, V, X independent and Y = max(U, V).
inline JointDist split_joint(const MacChannel& ch, const Dist& p_x, const Dist& p_u, const Dist& p_v) {
    detail::check_two_user_binary(ch, p_x);
    const std::size_t nz = ch.output_size();
    std::vector<double> pmf(2 * 2 * 2 * 2 * nz, 0.0);
    for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t v = 0; v < 2; ++v)
            for (std::size_t x = 0; x < 2; ++x) {
                const std::size_t y = std::max(u, v);
                const double w = p_u[u] * p_v[v] * p_x[x];
                const std::size_t t = x * 2 + y;
                for (std::size_t z = 0; z < nz; ++z) pmf[(((u * 2 + v) * 2 + x) * 2 + y) * nz + z] = w * ch.prob(z, t);
            }
    return JointDist({2, 2, 2, 2, nz}, std::move(pmf), true);
}

inline SplitPoint split_rates(const MacChannel& ch, const Dist& p_x, double q, double eps) {
    auto [pu, pv] = split_dists(q, eps);
    const JointDist j = split_joint(ch, p_x, pu, pv);
    SplitPoint sp;
    sp.eps = eps;
    sp.q = q;
    sp.r1 = mutual_information(j, Axes{2}, Axes{4}, Axes{0});
    sp.r_u = mutual_information(j, Axes{0}, Axes{4});
    sp.r_v = mutual_information(j, Axes{1}, Axes{4}, Axes{0, 2});
    sp.p_u = std::move(pu);
    sp.p_v = std::move(pv);
    sp.discontinuous_corner = q >= 1.0;
    return sp;
}

/// Dominant-face interval [I(X;Z), I(X;Z|Y)] for transmitter 1.
inline std::pair<double, double> r1_interval(const MacChannel& ch, const Dist& p_x, double q) {
    detail::check_two_user_binary(ch, p_x);
    const std::vector<Dist> in{p_x, Dist::bernoulli(q)};
    const JointDist j = channel_joint(ch, in);
    return {mutual_information(j, Axes{0}, Axes{2}), mutual_information(j, Axes{0}, Axes{2}, Axes{1})};
}

/// Finds eps with |R1(eps) - target| <= 1e-6. A grid pre-scan locates a
/// bracketing cell; only continuity of R1 is assumed, not monotonicity.
inline SplitPoint solve_eps(const MacChannel& ch, const Dist& p_x, double q, double target_r1) {
    const auto [lo, hi] = r1_interval(ch, p_x, q);
    if (target_r1 < lo - kSolveTol || target_r1 > hi + kSolveTol) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "target R1 = %.9g outside the dominant-face interval [%.9g, %.9g]", target_r1, lo, hi);
        throw std::domain_error(buf);
    }
    auto f = [&](double e) { return split_rates(ch, p_x, q, e).r1 - target_r1; };

    if (std::abs(f(0.0)) <= kSolveTol) return split_rates(ch, p_x, q, 0.0);
    if (std::abs(f(1.0)) <= kSolveTol) return split_rates(ch, p_x, q, 1.0);

    double prev_e = 0.0;
    double prev_f = f(0.0);
    for (std::size_t g = 1; g < kScanPoints; ++g) {
        const double e = static_cast<double>(g) / static_cast<double>(kScanPoints - 1);
        const double fe = f(e);
        if (std::abs(fe) <= kSolveTol) return split_rates(ch, p_x, q, e);
        if ((prev_f < 0.0) != (fe < 0.0)) {
            double a = prev_e, b = e, fa = prev_f;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b);
                const double fm = f(m);
                if (std::abs(fm) <= kSolveTol) return split_rates(ch, p_x, q, m);
                if ((fa < 0.0) == (fm < 0.0)) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return split_rates(ch, p_x, q, 0.5 * (a + b));
        }
        prev_e = e;
        prev_f = fe;
    }
    // Within tolerance of an endpoint but no sign change: take the closer end.
    return std::abs(f(0.0)) <= std::abs(f(1.0)) ? split_rates(ch, p_x, q, 0.0) : split_rates(ch, p_x, q, 1.0);
}

}  // namespace macres::ratesplit
