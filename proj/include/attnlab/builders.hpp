#pragma once

#include <cmath>
#include <memory>

#include "attnlab/constructions.hpp"
#include "attnlab/model.hpp"

namespace attnlab {

inline constexpr int kMaxModelDim = 4096;

// Positional encoding of the PARITY construction: residue and start
// indicators (full variant only), ln i, i^10, 1/i, 1/i^2, tau_i, |tau_i A_i|
// and the even/odd pair that encodes (-1)^i nonnegatively. Length-independent
// and bounded by a constant multiple of i^10.
template <class R>
class ParityPositionalEncoding final : public PositionalEncoding<R> {
  public:
    ParityPositionalEncoding(CoordinateLayout layout, double alpha, int dim)
        : layout_(layout), alpha_(alpha), dim_(dim), k_(alpha) {}

    int dim() const override { return dim_; }
    bool length_independent() const override { return true; }
    std::string kind() const override { return "parity_layout"; }

    void add_to(int i, int, Vec<R>& out) const override {
        using std::log;
        const CoordinateLayout& L = layout_;
        const R ri = R(double(i));
        if (L.M > 0) {
            out[size_t(L.res0 + (i % L.M))] += R(1);
            if (i <= L.M) out[size_t(L.start0 + (i - 1))] += R(1);
        }
        out[size_t(L.ln)] += log(ri);
        out[size_t(L.i10)] += pow10i<R>(i);
        const R inv = R(1) / ri;
        out[size_t(L.inv)] += inv;
        out[size_t(L.inv2)] += inv * inv;
        const R tau_i = tau_value<R>(i);
        out[size_t(L.tau)] += tau_i;
        out[size_t(L.tau_a)] += tau_i * (k_.f0 + k_.C * inv);  // |tau_i A_i|, A_i < 0
        out[size_t(i % 2 == 0 ? L.even : L.odd)] += R(1);
    }

    const CoordinateLayout& layout() const { return layout_; }
    double alpha() const { return alpha_; }

  private:
    CoordinateLayout layout_;
    double alpha_;
    int dim_;
    DerivedConstants<R> k_;
};

// Positional encoding of the majority model: the single value 1/(2i).
template <class R>
class MajorityPositionalEncoding final : public PositionalEncoding<R> {
  public:
    int dim() const override { return 3; }
    bool length_independent() const override { return true; }
    std::string kind() const override { return "majority"; }
    void add_to(int i, int, Vec<R>& out) const override {
        out[1] += R(1) / (R(2) * R(double(i)));
    }
};

namespace detail {

template <class R>
TransformerModel<R> model_shell(int dim, std::shared_ptr<const PositionalEncoding<R>> pe,
                                Masking masking, const PrecisionConfig& precision) {
    TransformerModel<R> m;
    m.vocab = {"0", "1", kBottomToken};
    m.embedding.token_embedding.assign(3, Vec<R>(size_t(dim), R(0)));
    m.embedding.positional = std::move(pe);
    m.output = Mat<R>(3, dim);
    m.masking = masking;
    m.precision = precision;
    return m;
}

template <class R>
void identity_ffn(AttentionLayerParams<R>& L) {
    L.ffn1 = Mat<R>::identity(L.dim);
    L.ffn2 = Mat<R>::identity(L.dim);
}

// Layer computing gamma = 10 Sigma / (Sigma + (alpha/n)(n - Sigma)) per head:
// logits (delta - ln n)(1 - x_i) with delta = ln alpha, values 10 x_i. The
// bit read by head r sits at coordinate bit_coord(r); the result lands in
// gam_coord(r). Queries are premultiplied by sqrt(d) to cancel the 1/sqrt(d)
// of the dot-product attention.
template <class R, class BitFn, class GamFn>
AttentionLayerParams<R> gamma_layer(const CoordinateLayout& L, int dim, int heads, const R& delta,
                                    BitFn bit_coord, GamFn gam_coord) {
    using std::sqrt;
    auto lay = AttentionLayerParams<R>::zeros(dim, heads);
    const R sd = sqrt(R(double(dim)));
    for (int r = 0; r < heads; ++r) {
        auto& Q = lay.query[r];
        auto& K = lay.key[r];
        auto& V = lay.value[r];
        Q(0, L.even) = delta * sd;
        Q(0, L.odd) = delta * sd;
        Q(0, L.ln) = -sd;
        K(0, L.even) = R(1);
        K(0, L.odd) = R(1);
        K(0, bit_coord(r)) = R(-1);
        V(gam_coord(r), bit_coord(r)) = R(10);
        for (int c = 0; c < dim; ++c) lay.head_mix(c, r * dim + c) = R(1);
    }
    identity_ffn(lay);
    return lay;
}

}  // namespace detail

// 3-layer single-head model computing PARITY(x) for 1 <= popcount(x) <= c*n,
// n >= n_min: gamma at layer 1, Gamma at layer 2, the signed softmax average
// z at layer 3, readout (z, -z, 0).
template <class R = double>
TransformerModel<R> build_restricted_model(const ConstructionParams& p,
                                           Masking masking = Masking::kCausal) {
    using std::log;
    using std::sqrt;
    p.validate();
    const CoordinateLayout L = CoordinateLayout::restricted();
    const int d = L.dim;
    const R sd = sqrt(R(double(d)));
    const DerivedConstants<R> k(p.alpha);
    const R delta = log(k.alpha);

    auto pe = std::make_shared<ParityPositionalEncoding<R>>(L, p.alpha, d);
    TransformerModel<R> m = detail::model_shell<R>(d, pe, masking, p.precision);
    m.embedding.token_embedding[1][size_t(L.bit)] = R(1);

    // layer 1: gamma
    m.layers.push_back(detail::gamma_layer<R>(L, d, 1, delta, [&](int) { return L.bit; },
                                              [&](int) { return L.gam0; }));

    // layer 2: Gamma via logits gamma * ln i, values i^10
    {
        auto lay = AttentionLayerParams<R>::zeros(d, 1);
        lay.query[0](0, L.gam0) = sd;
        lay.key[0](0, L.ln) = R(1);
        lay.value[0](L.Gam0, L.i10) = R(1);
        lay.head_mix = Mat<R>::identity(d);
        detail::identity_ffn(lay);
        m.layers.push_back(lay);
    }

    // layer 3: z via the three logit channels, value (-1)^i; the feed-forward
    // net splits z into ReLU(z) - ReLU(-z) to survive the ReLU
    {
        auto lay = AttentionLayerParams<R>::zeros(d, 1);
        auto& Q = lay.query[0];
        auto& K = lay.key[0];
        Q(0, L.Gam0) = R(-2) * k.C * sd;
        K(0, L.inv) = R(1);
        Q(1, L.tau) = -k.C * k.C * sd;
        K(1, L.inv2) = R(1);
        Q(2, L.tau_a) = R(2) * k.C * sd;
        K(2, L.inv) = R(1);
        lay.value[0](L.z0, L.even) = R(1);
        lay.value[0](L.z0, L.odd) = R(-1);
        lay.head_mix = Mat<R>::identity(d);
        lay.ffn1(L.gam0, L.z0) = R(1);
        lay.ffn1(L.Gam0, L.z0) = R(-1);
        lay.ffn2(L.z0, L.gam0) = R(1);
        lay.ffn2(L.z0, L.Gam0) = R(-1);
        m.layers.push_back(lay);
    }

    m.output(0, L.z0) = R(1);
    m.output(1, L.z0) = R(-1);
    return m;
}

// 4-layer M-head model computing PARITY on all of {0,1}^n for n >= n_min.
// Layer 1 splits the input into M strings with popcount in [1, c*n]; layers
// 2-4 run the restricted construction per head; the final feed-forward net
// sums ReLU(<sigma, z> - M + 0.1) over the 2^(M-1) even sign patterns.
template <class R = double>
TransformerModel<R> build_full_model(const ConstructionParams& p,
                                     Masking masking = Masking::kCausal) {
    using std::log;
    using std::sqrt;
    p.validate();
    const int M = p.M;
    CoordinateLayout L = CoordinateLayout::full(M);

    std::vector<int> slots = L.reusable_slots();
    const long patterns = 1L << (M - 1);
    int dim = L.dim;
    if (patterns > long(slots.size())) {
        // not enough consumed coordinates to host the sign-pattern rows;
        // append scratch coordinates
        const long extra = patterns - long(slots.size());
        for (long e = 0; e < extra; ++e) slots.push_back(dim + int(e));
        dim += int(extra);
    }
    if (dim > kMaxModelDim) {
        throw BuildError("full model needs dimension " + std::to_string(dim) +
                         " (> " + std::to_string(kMaxModelDim) +
                         "); the 2^(M-1) sign-pattern rows do not fit");
    }

    const R sd = sqrt(R(double(dim)));
    const DerivedConstants<R> k(p.alpha);
    const R delta = log(k.alpha);

    auto pe = std::make_shared<ParityPositionalEncoding<R>>(L, p.alpha, dim);
    TransformerModel<R> m = detail::model_shell<R>(dim, pe, masking, p.precision);
    m.embedding.token_embedding[1][size_t(L.bit)] = R(1);

    // layer 1: attention is inert; the feed-forward net computes the split
    // x^r_i = ReLU(x_i + res^r_i - 1) + start^r_i
    {
        auto lay = AttentionLayerParams<R>::zeros(dim, 1);
        lay.head_mix = Mat<R>::identity(dim);
        for (int r = 0; r < M; ++r) {
            lay.ffn1(L.res0 + r, L.bit) = R(1);
            lay.ffn1(L.res0 + r, L.res0 + r) = R(1);
            lay.bias1[size_t(L.res0 + r)] = R(-1);
            lay.ffn1(L.start0 + r, L.start0 + r) = R(1);
            lay.ffn2(L.x0 + r, L.res0 + r) = R(1);
            lay.ffn2(L.x0 + r, L.start0 + r) = R(1);
        }
        for (int c : {L.ln, L.i10, L.inv, L.inv2, L.tau, L.tau_a, L.even, L.odd}) {
            lay.ffn1(c, c) = R(1);
            lay.ffn2(c, c) = R(1);
        }
        m.layers.push_back(lay);
    }

    // layer 2: gamma^r per head
    m.layers.push_back(detail::gamma_layer<R>(L, dim, M, delta,
                                              [&](int r) { return L.x0 + r; },
                                              [&](int r) { return L.gam0 + r; }));

    // layer 3: Gamma^r per head
    {
        auto lay = AttentionLayerParams<R>::zeros(dim, M);
        for (int r = 0; r < M; ++r) {
            lay.query[r](0, L.gam0 + r) = sd;
            lay.key[r](0, L.ln) = R(1);
            lay.value[r](L.Gam0 + r, L.i10) = R(1);
            for (int c = 0; c < dim; ++c) lay.head_mix(c, r * dim + c) = R(1);
        }
        detail::identity_ffn(lay);
        m.layers.push_back(lay);
    }

    // layer 4: z^r per head, then the sign-pattern sum
    {
        auto lay = AttentionLayerParams<R>::zeros(dim, M);
        for (int r = 0; r < M; ++r) {
            auto& Q = lay.query[r];
            auto& K = lay.key[r];
            Q(0, L.Gam0 + r) = R(-2) * k.C * sd;
            K(0, L.inv) = R(1);
            Q(1, L.tau) = -k.C * k.C * sd;
            K(1, L.inv2) = R(1);
            Q(2, L.tau_a) = R(2) * k.C * sd;
            K(2, L.inv) = R(1);
            lay.value[r](L.z0 + r, L.even) = R(1);
            lay.value[r](L.z0 + r, L.odd) = R(-1);
            for (int c = 0; c < dim; ++c) lay.head_mix(c, r * dim + c) = R(1);
        }
        const R bias = RealOps<R>::from_double(0.1) - R(double(M));
        int used = 0;
        for (long mask = 0; mask < (1L << M); ++mask) {
            if (__builtin_popcountll(static_cast<unsigned long long>(mask)) % 2 != 0) continue;
            const int s = slots[size_t(used++)];
            for (int r = 0; r < M; ++r)
                lay.ffn1(s, L.z0 + r) = ((mask >> r) & 1) ? R(-1) : R(1);
            lay.bias1[size_t(s)] = bias;
            lay.ffn2(L.acc, s) = R(1);
        }
        lay.ffn1(L.even, L.even) = R(1);
        lay.ffn1(L.odd, L.odd) = R(1);
        lay.ffn2(L.even, L.even) = R(1);
        lay.ffn2(L.odd, L.odd) = R(1);
        m.layers.push_back(lay);
    }

    // parity 0 leaves acc near 0.1, parity 1 leaves it exactly 0; readout
    // margins are +-0.05 against the tie token
    const R t = RealOps<R>::from_double(0.05);
    m.output(0, L.acc) = R(2);
    m.output(0, L.even) = -t;
    m.output(0, L.odd) = -t;
    m.output(1, L.acc) = R(-2);
    m.output(1, L.even) = t;
    m.output(1, L.odd) = t;
    return m;
}

// 1-layer 1-head majority model: uniform attention averages the input bits;
// the feed-forward net subtracts 1/2 + 1/(4n) (the offset is half the stored
// 1/(2n) so the comparison is strict for odd n as well) and the readout puts
// the signed slack on the 1/0 tokens.
template <class R = double>
TransformerModel<R> build_majority_model(Masking masking = Masking::kCausal,
                                         PrecisionConfig precision = {}) {
    const int d = 3;
    const int kBit = 0, kHalf = 1, kAcc = 2;
    auto pe = std::make_shared<MajorityPositionalEncoding<R>>();
    TransformerModel<R> m = detail::model_shell<R>(d, pe, masking, precision);
    m.embedding.token_embedding[1][kBit] = R(1);

    auto lay = AttentionLayerParams<R>::zeros(d, 1);
    lay.value[0](kAcc, kBit) = R(1);
    lay.head_mix = Mat<R>::identity(d);
    const R half = RealOps<R>::from_double(0.5);
    lay.ffn1(kBit, kAcc) = R(1);
    lay.ffn1(kBit, kHalf) = -half;
    lay.bias1[kBit] = -half;
    lay.ffn1(kHalf, kAcc) = R(-1);
    lay.ffn1(kHalf, kHalf) = half;
    lay.bias1[kHalf] = half;
    lay.ffn2(kAcc, kBit) = R(1);
    lay.ffn2(kAcc, kHalf) = R(-1);
    m.layers.push_back(lay);

    m.output(1, kAcc) = R(1);
    m.output(0, kAcc) = R(-1);
    return m;
}

}  // namespace attnlab
