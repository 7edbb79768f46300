#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "attnlab/linalg.hpp"
#include "attnlab/precision.hpp"
#include "attnlab/softmax.hpp"

namespace attnlab {

// i^10 by binary powering; the one way every module computes this power.
template <class R>
R pow10i(long i) {
    const R x = R(double(i));
    const R x2 = x * x;
    const R x4 = x2 * x2;
    const R x8 = x4 * x4;
    return x8 * x2;
}

// f(rho) = (11 + rho) / (21 + 11 rho); pole at rho = -21/11.
template <class R = double>
R f_rho(const R& rho) {
    const R denom = R(21) + R(11) * rho;
    if (denom == R(0)) throw DomainError("f_rho: pole at rho = -21/11");
    if (denom < R(0)) throw DomainError("f_rho: argument below the pole");
    return (R(11) + rho) / denom;
}

// tau_n = n^10 (1 + 5/n - 5/(3 n^2)).
template <class R = double>
R tau_value(long n) {
    if (n < 1) throw DomainError("tau: n must be positive");
    const R nn = R(double(n));
    return pow10i<R>(n) * (R(1) + R(5) / nn - R(5) / (R(3) * nn * nn));
}

// Parameters of the explicit PARITY construction. alpha is the off-bit
// attention weight scale, c bounds the certified popcount fraction, M is the
// number of split strings (even, M > 2/c), n_min the smallest input length of
// the certified range.
struct ConstructionParams {
    double alpha = 0.6;
    double c = 0.34;
    int M = 6;
    int n_min = 9;
    PrecisionConfig precision;

    // Largest alpha the calibration scan certifies (0.65 already breaks the
    // attention gap at concrete lengths) and the largest length the scan
    // covers. kPinnedGapRatio is a floor on gap/n^6 over the whole certified
    // grid, recorded by the calibration run.
    static constexpr double kAlphaMax = 0.60;
    static constexpr int kCertifiedLengthMax = 512;
    static constexpr double kPinnedGapRatio = 1.0;

    static ConstructionParams calibrated_defaults() { return {}; }

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw InvalidInputError("alpha must lie in (0, 1)");
        if (!(c > 0.0 && c < 1.0)) throw InvalidInputError("c must lie in (0, 1)");
        if (M < 2 || M % 2 != 0) throw InvalidInputError("M must be a positive even integer");
        if (!(double(M) > 2.0 / c)) throw InvalidInputError("M must exceed 2/c");
        if (n_min < 1) throw InvalidInputError("n_min must be positive");
    }

    bool within_calibrated_range() const { return alpha <= kAlphaMax; }
};

// Constants of the third-layer score W_i = -(f(rho) + C/i + A_n)^2:
// f0 = f(0), fprime0 = f'(0), C = -f'(0) * alpha, A(n) = -f0 + f'(0)*alpha/n.
// The i-independent offset B_{n,rho} is never materialized; softmax shift
// invariance makes it irrelevant.
template <class R>
struct DerivedConstants {
    R f0;
    R fprime0;
    R alpha;
    R C;

    explicit DerivedConstants(double alpha_in)
        : f0(R(11) / R(21)),
          fprime0(R(-100) / R(441)),
          alpha(RealOps<R>::from_double(alpha_in)),
          C(fprime0 * R(-1) * alpha) {}

    R A(long n) const { return -f0 + fprime0 * alpha / R(double(n)); }
    R tau(long n) const { return tau_value<R>(n); }
};

// gamma = 10 Sigma / (Sigma + (alpha/n)(n - Sigma)); always in [10/(1+alpha), 10].
template <class R = double>
R gamma_exact(long Sigma, long n, double alpha) {
    if (Sigma == 0)
        throw DomainError("gamma: Sigma = 0 is outside the restricted case");
    if (Sigma < 0 || Sigma > n) throw DomainError("gamma: Sigma must lie in [1, n]");
    const R s = R(double(Sigma));
    const R nn = R(double(n));
    const R a = RealOps<R>::from_double(alpha);
    return R(10) * s / (s + (a / nn) * (nn - s));
}

// Gamma = (sum_i i^gamma * i^10) / (sum_i i^gamma) by direct summation. This
// is the single shared reference for the layer-2 output; the asymptotics
// checks call exactly this function.
template <class R = double>
R Gamma_exact(const R& gamma, long n) {
    using std::exp;
    using std::log;
    if (n < 1) throw DomainError("Gamma: n must be positive");
    R num(0), den(0);
    for (long i = 1; i <= n; ++i) {
        const R ig = (i == 1) ? R(1) : exp(gamma * log(R(double(i))));
        num += ig * pow10i<R>(i);
        den += ig;
    }
    const R out = num / den;
    if (!RealOps<R>::finite(out)) throw PrecisionError("Gamma_exact");
    return out;
}

// Third-layer attention logit
//   L_{i,n} = -2 Gamma (C/i) - tau_n (C/i)^2 - 2 tau_n A_n (C/i).
template <class R = double>
R layer3_logit(long i, long n, const R& Gamma, const DerivedConstants<R>& k) {
    const R Ci = k.C / R(double(i));
    const R tau_n = k.tau(n);
    return R(-2) * Gamma * Ci - tau_n * Ci * Ci - R(2) * tau_n * k.A(n) * Ci;
}

// All third-layer logits for a given (n, Sigma), with Gamma computed through
// gamma_exact and Gamma_exact.
template <class R = double>
Vec<R> layer3_logits(long n, long Sigma, const ConstructionParams& p) {
    const DerivedConstants<R> k(p.alpha);
    const R gamma = gamma_exact<R>(Sigma, n, p.alpha);
    const R Gamma = Gamma_exact<R>(gamma, n);
    Vec<R> out(size_t(n), R(0));
    for (long i = 1; i <= n; ++i) out[size_t(i - 1)] = layer3_logit<R>(i, n, Gamma, k);
    return out;
}

// Smallest lead of the Sigma-th logit over the rest; negative when the score
// is not maximized at i = Sigma. Adding any i-independent constant to all
// logits leaves this unchanged.
template <class R>
R min_gap_at(const Vec<R>& logits, long Sigma) {
    if (Sigma < 1 || Sigma > long(logits.size()))
        throw DomainError("gap: Sigma outside [1, n]");
    if (logits.size() < 2) throw DomainError("gap: need at least two positions");
    const R& ls = logits[size_t(Sigma - 1)];
    bool first = true;
    R best(0);
    for (size_t i = 0; i < logits.size(); ++i) {
        if (long(i) == Sigma - 1) continue;
        const R g = ls - logits[i];
        if (first || g < best) {
            best = g;
            first = false;
        }
    }
    return best;
}

template <class R = double>
R attention_gap(long n, long Sigma, const ConstructionParams& p) {
    if (Sigma < 1 || double(Sigma) > p.c * double(n))
        throw DomainError("attention_gap: Sigma outside the restricted range [1, c*n]");
    return min_gap_at(layer3_logits<R>(n, Sigma, p), Sigma);
}

// z = sum_i e^{L_i} (-1)^i / sum_i e^{L_i}; 0.1-close to (-1)^Sigma on the
// certified range.
template <class R = double>
R z_value(const std::vector<int>& bits, const ConstructionParams& p) {
    const long n = long(bits.size());
    long Sigma = 0;
    for (int b : bits) Sigma += (b != 0);
    if (n < p.n_min) throw DomainError("z_value: n below the certified n_min");
    if (Sigma < 1 || double(Sigma) > p.c * double(n))
        throw DomainError("z_value: Sigma outside the restricted range [1, c*n]");
    const Vec<R> logits = layer3_logits<R>(n, Sigma, p);
    const Vec<R> w = stable_softmax(logits);
    R z(0);
    for (long i = 1; i <= n; ++i) {
        if (i % 2 == 0)
            z += w[size_t(i - 1)];
        else
            z -= w[size_t(i - 1)];
    }
    return z;
}

// Split of x into M strings: x^r keeps the bits at positions congruent to r
// mod M and forces a 1 at position r+1 (which lies outside that residue
// class). The parities of the pieces XOR to the parity of x because M is even.
inline std::vector<std::vector<int>> split_strings(const std::vector<int>& bits, int M) {
    if (M < 2 || M % 2 != 0) throw DomainError("split: M must be a positive even integer");
    const int n = int(bits.size());
    if (n < M) throw InvalidInputError("split: input shorter than M");
    std::vector<std::vector<int>> out(size_t(M), std::vector<int>(size_t(n), 0));
    for (int r = 0; r < M; ++r) {
        for (int i = 1; i <= n; ++i) {
            const int residue = (i % M == r) ? 1 : 0;
            const int start = (i == r + 1) ? 1 : 0;
            const int relu = std::max(0, bits[size_t(i - 1)] + residue - 1);
            out[size_t(r)][size_t(i - 1)] = relu + start;
        }
    }
    return out;
}

// ---- coordinate layout ----------------------------------------------------

// Named coordinates of the construction's embedding space. M = 0 describes
// the single-head restricted layout. All stored positional values are
// nonnegative; signs live in the weight matrices so identity feed-forward
// rows can pass coordinates through the ReLU.
struct CoordinateLayout {
    int M = 0;
    int bit = -1;
    int res0 = -1, start0 = -1;
    int ln = -1, i10 = -1, inv = -1, inv2 = -1, tau = -1, tau_a = -1;
    int even = -1, odd = -1;
    int x0 = -1, gam0 = -1, Gam0 = -1, z0 = -1;
    int acc = -1;
    int dim = 0;

    static CoordinateLayout restricted() {
        CoordinateLayout L;
        L.M = 0;
        int c = 0;
        L.bit = c++;
        L.ln = c++;
        L.i10 = c++;
        L.inv = c++;
        L.inv2 = c++;
        L.tau = c++;
        L.tau_a = c++;
        L.even = c++;
        L.odd = c++;
        L.gam0 = c++;
        L.Gam0 = c++;
        L.z0 = c++;
        L.dim = c;
        return L;
    }

    static CoordinateLayout full(int M) {
        CoordinateLayout L;
        L.M = M;
        int c = 0;
        L.bit = c++;
        L.res0 = c;
        c += M;
        L.start0 = c;
        c += M;
        L.ln = c++;
        L.i10 = c++;
        L.inv = c++;
        L.inv2 = c++;
        L.tau = c++;
        L.tau_a = c++;
        L.even = c++;
        L.odd = c++;
        L.x0 = c;
        c += M;
        L.gam0 = c;
        c += M;
        L.Gam0 = c;
        c += M;
        L.z0 = c;
        c += M;
        L.acc = c++;
        L.dim = c;
        return L;
    }

    // Coordinates free for reuse as hidden slots of the final feed-forward
    // net: everything the sign-pattern sum no longer reads (it reads z^r,
    // even, odd and writes acc).
    std::vector<int> reusable_slots() const {
        std::vector<int> s;
        for (int c = 0; c < dim; ++c) {
            if (c == even || c == odd || c == acc) continue;
            if (M > 0 && c >= z0 && c < z0 + M) continue;
            if (M == 0 && c == z0) continue;
            s.push_back(c);
        }
        return s;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> v(size_t(dim), "scratch");
        auto set = [&](int idx, const std::string& name) {
            if (idx >= 0) v[size_t(idx)] = name;
        };
        set(bit, "bit");
        for (int r = 0; r < M; ++r) {
            v[size_t(res0 + r)] = "res" + std::to_string(r);
            v[size_t(start0 + r)] = "start" + std::to_string(r);
            v[size_t(x0 + r)] = "x" + std::to_string(r);
            v[size_t(gam0 + r)] = "gamma" + std::to_string(r);
            v[size_t(Gam0 + r)] = "Gamma" + std::to_string(r);
            v[size_t(z0 + r)] = "z" + std::to_string(r);
        }
        if (M == 0) {
            set(gam0, "gamma");
            set(Gam0, "Gamma");
            set(z0, "z");
        }
        set(ln, "ln_i");
        set(i10, "i^10");
        set(inv, "1/i");
        set(inv2, "1/i^2");
        set(tau, "tau_i");
        set(tau_a, "|tau_i A_i|");
        set(even, "even");
        set(odd, "odd");
        set(acc, "acc");
        return v;
    }
};

}  // namespace attnlab
