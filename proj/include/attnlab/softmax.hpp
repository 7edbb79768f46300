#pragma once

#include <cmath>
#include <span>

#include "attnlab/linalg.hpp"

namespace attnlab {

// Softmax computed as shifted exponentials: every logit is reduced by the
// maximum before exponentiation. By shift invariance the result is the
// mathematical softmax, but no exponentiation can overflow.
template <class R>
Vec<R> stable_softmax(std::span<const R> logits) {
    using std::exp;
    if (logits.empty()) throw InvalidInputError("stable_softmax: empty logit list");
    for (const R& l : logits)
        if (!RealOps<R>::finite(l)) throw InvalidInputError("stable_softmax: non-finite logit");

    const R* mx = &logits[0];
    for (const R& l : logits)
        if (l > *mx) mx = &l;

    Vec<R> w(logits.size());
    R denom(0);
    for (size_t i = 0; i < logits.size(); ++i) {
        const R d = logits[i] - *mx;
        w[i] = (d == R(0)) ? R(1) : exp(d);
        denom += w[i];
    }
    for (R& x : w) x /= denom;
    return w;
}

template <class R>
Vec<R> stable_softmax(const Vec<R>& logits) {
    return stable_softmax(std::span<const R>(logits.data(), logits.size()));
}

}  // namespace attnlab
