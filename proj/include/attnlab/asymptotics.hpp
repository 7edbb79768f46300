#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "attnlab/constructions.hpp"

namespace attnlab {

// x^e, exact (binary powering) when e is a small nonnegative integer, via
// exp(e ln x) otherwise.
template <class R>
R real_pow(const R& x, double e) {
    using std::exp;
    using std::log;
    if (e >= 0 && e <= 1024 && e == std::floor(e)) {
        long k = long(e);
        R acc(1), base = x;
        while (k > 0) {
            if (k & 1) acc *= base;
            base *= base;
            k >>= 1;
        }
        return acc;
    }
    return exp(RealOps<R>::from_double(e) * log(x));
}

// S_alpha(n) = 1^alpha + ... + n^alpha by direct summation; exact on integer
// exponents within the backend's exact-integer range.
template <class R = double>
R power_sum(double alpha, long n) {
    if (alpha < 0) throw DomainError("power_sum: alpha must be nonnegative");
    if (n < 1) throw DomainError("power_sum: n must be positive");
    R s(0);
    for (long i = 1; i <= n; ++i) s += real_pow(R(double(i)), alpha);
    if (!RealOps<R>::finite(s)) throw PrecisionError("power_sum");
    return s;
}

// Truncated Faulhaber expansion of S_alpha(n):
//   order 0:  n^(a+1)/(a+1)                              (alpha in [0, 100])
//   order 1:  + n^a / 2                                  (alpha in [2, 100])
//   order 2:  + a n^(a-1) / 12                           (alpha in [5, 100])
template <class R = double>
R faulhaber_expansion(double alpha, long n, int order) {
    if (order < 0 || order > 2) throw DomainError("faulhaber: order must be 0, 1 or 2");
    static const double lo[3] = {0.0, 2.0, 5.0};
    if (alpha < lo[order] || alpha > 100.0)
        throw DomainError("faulhaber: alpha outside the lemma range for this order");
    if (n < 1) throw DomainError("faulhaber: n must be positive");
    const R a = RealOps<R>::from_double(alpha);
    const R nn = R(double(n));
    R v = real_pow(nn, alpha + 1) / (a + R(1));
    if (order >= 1) v += real_pow(nn, alpha) / R(2);
    if (order >= 2) v += a * real_pow(nn, alpha - 1) / R(12);
    if (!RealOps<R>::finite(v)) throw PrecisionError("faulhaber_expansion");
    return v;
}

// ---- remainder-ratio reports ------------------------------------------------

// An O(.) claim is operationalized as ratio boundedness over a geometric
// n-grid: the series is stable when the maximum over the top half of the grid
// is at most twice the ratio at the grid midpoint.
inline bool stable_series(std::span<const double> ratios, double* midpoint = nullptr,
                          double* top_max = nullptr) {
    if (ratios.size() < 2) return false;
    const size_t mid = ratios.size() / 2;
    double mx = ratios[mid];
    for (size_t i = mid; i < ratios.size(); ++i) mx = std::max(mx, ratios[i]);
    if (midpoint) *midpoint = ratios[mid];
    if (top_max) *top_max = mx;
    return mx <= 2.0 * ratios[mid];
}

struct SeriesResult {
    std::string label;
    std::vector<long> grid;
    std::vector<double> ratios;
    double midpoint_ratio = 0;
    double top_half_max = 0;
    bool stable = false;
};

struct LemmaReport {
    std::string lemma;
    std::vector<SeriesResult> series;
    bool pass = false;
    std::vector<std::string> notes;
};

inline std::vector<long> geometric_grid(long lo, long hi) {
    std::vector<long> g;
    for (long n = lo; n <= hi; n *= 2) g.push_back(n);
    return g;
}

// Remainder ratios |S_alpha(n) - expansion| / n^(alpha - order).
template <class R = double>
LemmaReport check_faulhaber(const std::vector<double>& alphas, const std::vector<long>& ns,
                            int order) {
    using std::exp;
    using std::fabs;
    using std::log;
    LemmaReport rep;
    rep.lemma = "faulhaber-order-" + std::to_string(order);
    if (ns.size() < 4 || ns.back() < 64)
        rep.notes.push_back("warning: n-grid too short for an asymptotic claim");
    bool all = true;
    for (double a : alphas) {
        SeriesResult sr;
        sr.label = "alpha=" + RealOps<double>::to_string(a);
        for (long n : ns) {
            const R s = power_sum<R>(a, n);
            const R e = faulhaber_expansion<R>(a, n, order);
            const R scale = real_pow(R(double(n)), a - order);
            const R ratio = (s > e ? s - e : e - s) / scale;
            sr.grid.push_back(n);
            sr.ratios.push_back(RealOps<R>::to_double(ratio));
        }
        sr.stable = stable_series(sr.ratios, &sr.midpoint_ratio, &sr.top_half_max);
        all = all && sr.stable;
        rep.series.push_back(std::move(sr));
    }
    rep.pass = all;
    return rep;
}

// ---- Gamma ~ tau_n f(rho) ---------------------------------------------------

struct GammaBoundEntry {
    double rho = 0;
    double rel_err = 0;   // |Gamma/(tau_n f(rho)) - 1|
    double ratio = 0;     // rel_err / (rho/n^2 + 1/n^3)
    double gamma_over_tau = 0;
    double f_rho = 0;
};

// Single shared Gamma path: this calls exactly the Gamma_exact the model
// builder uses.
inline GammaBoundEntry check_gamma_bound(long Sigma, long n, double alpha) {
    const double rho = alpha * (1.0 / double(Sigma) - 1.0 / double(n));
    const double gamma = 10.0 / (1.0 + rho);
    const double G = Gamma_exact<double>(gamma, n);
    const double tf = tau_value<double>(n) * f_rho<double>(rho);
    GammaBoundEntry e;
    e.rho = rho;
    e.rel_err = std::fabs(G / tf - 1.0);
    e.ratio = e.rel_err / (rho / (double(n) * n) + 1.0 / (double(n) * n * n));
    e.gamma_over_tau = G / tau_value<double>(n);
    e.f_rho = f_rho<double>(rho);
    return e;
}

// Series over n for Sigma = 1, ceil(sqrt n) and n. Pass requires each ratio
// series stable and Gamma/tau_n inside the loose (f/2, 2f) envelope.
inline LemmaReport check_gamma_bound_grid(const std::vector<long>& ns, double alpha) {
    LemmaReport rep;
    rep.lemma = "gamma-bound";
    if (ns.size() < 4 || ns.back() < 64)
        rep.notes.push_back("warning: n-grid too short for an asymptotic claim");
    bool all = true;
    bool envelope = true;
    for (int which = 0; which < 3; ++which) {
        SeriesResult sr;
        sr.label = which == 0 ? "Sigma=1" : (which == 1 ? "Sigma=ceil(sqrt n)" : "Sigma=n");
        for (long n : ns) {
            const long Sigma =
                which == 0 ? 1 : (which == 1 ? (long)std::ceil(std::sqrt(double(n))) : n);
            const GammaBoundEntry e = check_gamma_bound(Sigma, n, alpha);
            sr.grid.push_back(n);
            sr.ratios.push_back(e.ratio);
            if (n >= 16)
                envelope = envelope && e.gamma_over_tau > e.f_rho / 2 &&
                           e.gamma_over_tau < 2 * e.f_rho;
        }
        sr.stable = stable_series(sr.ratios, &sr.midpoint_ratio, &sr.top_half_max);
        all = all && sr.stable;
        rep.series.push_back(std::move(sr));
    }
    if (!envelope) rep.notes.push_back("Gamma/tau left the (f/2, 2f) envelope");
    rep.pass = all && envelope;
    return rep;
}

// ---- W_i bounds --------------------------------------------------------------

struct WBoundEntry {
    double w_sigma_scaled = 0;  // -W_Sigma * Sigma^4 / alpha^4, must stay bounded
    double min_neg_ratio = 0;   // min_{i != Sigma} -W_i / (alpha^2 (1/i - 1/Sigma)^2)
};

inline WBoundEntry check_W_bounds(double alpha, long Sigma, long n) {
    if (Sigma < 1 || Sigma > n) throw DomainError("check_W_bounds: Sigma outside [1, n]");
    const double f0 = 11.0 / 21.0;
    const double fp0 = -100.0 / 441.0;
    const double rho = alpha * (1.0 / double(Sigma) - 1.0 / double(n));
    const double frho = f_rho<double>(rho);
    WBoundEntry e;
    e.min_neg_ratio = 0;
    bool first = true;
    for (long i = 1; i <= n; ++i) {
        const double inner = frho - f0 - fp0 * alpha * (1.0 / double(i) - 1.0 / double(n));
        const double W = -inner * inner;
        if (i == Sigma) {
            const double s4 = double(Sigma) * Sigma * Sigma * Sigma;
            e.w_sigma_scaled = -W * s4 / (alpha * alpha * alpha * alpha);
        } else {
            const double diff = 1.0 / double(i) - 1.0 / double(Sigma);
            const double denom = alpha * alpha * diff * diff;
            const double r = -W / denom;
            if (first || r < e.min_neg_ratio) {
                e.min_neg_ratio = r;
                first = false;
            }
        }
    }
    return e;
}

// Over a geometric n-grid with Sigma up to sqrt(n): the scaled W_Sigma series
// must stay bounded (stable) and the -W_i ratio must stay away from zero.
inline LemmaReport check_W_bounds_grid(const std::vector<long>& ns, double alpha) {
    LemmaReport rep;
    rep.lemma = "W-bounds";
    SeriesResult top, bottom;
    top.label = "max over Sigma of -W_Sigma Sigma^4/alpha^4";
    bottom.label = "min over Sigma,i of -W_i/(alpha^2 (1/i-1/Sigma)^2)";
    bool positive = true;
    for (long n : ns) {
        double worst_top = 0;
        double worst_bottom = 0;
        bool first = true;
        const long smax = std::max<long>(1, (long)std::floor(std::sqrt(double(n))));
        for (long Sigma = 1; Sigma <= smax; ++Sigma) {
            const WBoundEntry e = check_W_bounds(alpha, Sigma, n);
            worst_top = std::max(worst_top, e.w_sigma_scaled);
            if (first || e.min_neg_ratio < worst_bottom) worst_bottom = e.min_neg_ratio;
            first = false;
        }
        top.grid.push_back(n);
        top.ratios.push_back(worst_top);
        bottom.grid.push_back(n);
        bottom.ratios.push_back(worst_bottom);
        positive = positive && worst_bottom > 0;
    }
    top.stable = stable_series(top.ratios, &top.midpoint_ratio, &top.top_half_max);
    // for the lower bound, stability means the floor does not collapse:
    // minimum over the top half at least half the midpoint value
    {
        const size_t mid = bottom.ratios.size() / 2;
        double mn = bottom.ratios[mid];
        for (size_t i = mid; i < bottom.ratios.size(); ++i) mn = std::min(mn, bottom.ratios[i]);
        bottom.midpoint_ratio = bottom.ratios[mid];
        bottom.top_half_max = mn;
        bottom.stable = mn >= 0.5 * bottom.midpoint_ratio && mn > 0;
    }
    rep.series.push_back(top);
    rep.series.push_back(bottom);
    if (!positive) rep.notes.push_back("-W_i ratio reached zero or below");
    rep.pass = top.stable && bottom.stable && positive;
    return rep;
}

}  // namespace attnlab
