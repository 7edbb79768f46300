#pragma once

#include <cmath>
#include <vector>

#include "attnlab/linalg.hpp"
#include "attnlab/softmax.hpp"

namespace attnlab {

enum class Masking { kFull, kCausal };

inline const char* masking_name(Masking m) {
    return m == Masking::kFull ? "full" : "causal";
}

inline Masking masking_from_name(const std::string& s) {
    if (s == "full") return Masking::kFull;
    if (s == "causal") return Masking::kCausal;
    throw InvalidInputError("unknown masking '" + s + "'");
}

// One attention layer: per-head query/key/value projections, the head-mixing
// matrix and the position-wise feed-forward net that closes the layer. The
// feed-forward output replaces the stream; the residual is added before it.
template <class R>
struct AttentionLayerParams {
    int dim = 0;
    int heads = 0;
    std::vector<Mat<R>> query, key, value;  // heads matrices, each dim x dim
    Mat<R> head_mix;                        // dim x (dim * heads)
    Mat<R> ffn1, ffn2;                      // dim x dim
    Vec<R> bias1, bias2;                    // dim

    static AttentionLayerParams zeros(int dim, int heads) {
        AttentionLayerParams p;
        p.dim = dim;
        p.heads = heads;
        p.query.assign(heads, Mat<R>(dim, dim));
        p.key.assign(heads, Mat<R>(dim, dim));
        p.value.assign(heads, Mat<R>(dim, dim));
        p.head_mix = Mat<R>(dim, dim * heads);
        p.ffn1 = Mat<R>(dim, dim);
        p.ffn2 = Mat<R>(dim, dim);
        p.bias1.assign(dim, R(0));
        p.bias2.assign(dim, R(0));
        return p;
    }

    void validate() const {
        if (dim <= 0) throw DimensionError("layer dimension must be positive");
        if (heads <= 0) throw DimensionError("layer must have at least one head");
        if (int(query.size()) != heads || int(key.size()) != heads ||
            int(value.size()) != heads) {
            throw DimensionError("per-head matrix count does not match head count");
        }
        auto square = [&](const Mat<R>& m, const char* what) {
            if (m.rows() != dim || m.cols() != dim)
                throw DimensionError(std::string(what) + " is not dim x dim");
        };
        for (int k = 0; k < heads; ++k) {
            square(query[k], "query matrix");
            square(key[k], "key matrix");
            square(value[k], "value matrix");
        }
        if (head_mix.rows() != dim || head_mix.cols() != dim * heads)
            throw DimensionError("head-mixing matrix is not dim x (dim*heads)");
        square(ffn1, "ffn matrix W1");
        square(ffn2, "ffn matrix W2");
        if (int(bias1.size()) != dim || int(bias2.size()) != dim)
            throw DimensionError("bias vector is not dim-sized");
    }
};

// Evaluator for one layer over a fixed input sequence. Projections of every
// position through the per-head matrices are computed once, restricted to the
// rows that can contribute (structurally zero rows are skipped; the skipped
// terms are exact zeros).
template <class R>
class AttentionEval {
  public:
    AttentionEval(const AttentionLayerParams<R>& layer, const std::vector<Vec<R>>& inputs,
                  Masking masking)
        : layer_(layer), inputs_(inputs), masking_(masking), n_(int(inputs.size())) {
        using std::sqrt;
        layer.validate();
        if (n_ == 0) throw InvalidInputError("attention over an empty sequence");
        for (const Vec<R>& v : inputs) {
            if (int(v.size()) != layer.dim)
                throw DimensionError("input vector dimension does not match layer");
        }
        sqrt_d_ = sqrt(R(layer.dim));
        heads_.reserve(layer.heads);
        for (int k = 0; k < layer.heads; ++k) heads_.push_back(make_head(k));
        ffn1_rows_ = row_cols(layer.ffn1);
        ffn2_rows_ = row_cols(layer.ffn2);
    }

    int positions() const { return n_; }
    int window(int j) const { return masking_ == Masking::kCausal ? j + 1 : n_; }

    // Logits of position j against 1..window(j) in head k: <K a_i, Q a_j>/sqrt(d).
    Vec<R> logits(int head, int j) const {
        check_head_pos(head, j);
        const HeadCtx& H = heads_[head];
        const int lim = window(j);
        Vec<R> out(lim);
        for (int i = 0; i < lim; ++i) out[i] = logit(H, i, j);
        return out;
    }

    // Softmax-weighted average of projected values over the window, returned
    // as a dense dim-vector.
    Vec<R> head_value(int head, int j) {
        check_head_pos(head, j);
        const HeadCtx& H = heads_[head];
        Vec<R> out(layer_.dim, R(0));
        accumulate_head(H, j, [&](int row, const R& x) { out[row] += x; });
        return out;
    }

    // h_j + alpha_j: mixed head values plus the residual, before the
    // feed-forward net.
    Vec<R> pre_ffn(int j) {
        if (j < 0 || j >= n_) throw DimensionError("position index out of range");
        Vec<R> z(layer_.dim, R(0));
        for (const HeadCtx& H : heads_) {
            accumulate_head(H, j, [&](int vrow, const R& x) {
                for (const auto& [out_row, coeff] : H.mix[vrow]) z[out_row] += coeff * x;
            });
        }
        for (int c = 0; c < layer_.dim; ++c) z[c] += inputs_[j][c];
        require_finite(z, "attention output");
        return z;
    }

    // Full layer output at position j: head mixing, residual, feed-forward.
    Vec<R> position_output(int j) {
        const Vec<R> z = pre_ffn(j);

        // hidden = ReLU(W1 z + b1), out = W2 hidden + b2
        Vec<R> hidden(layer_.dim);
        for (int r = 0; r < layer_.dim; ++r) {
            R acc = layer_.bias1[r];
            for (int c : ffn1_rows_[r]) acc += layer_.ffn1(r, c) * z[c];
            hidden[r] = acc > R(0) ? acc : R(0);
        }
        Vec<R> out(layer_.dim);
        for (int r = 0; r < layer_.dim; ++r) {
            R acc = layer_.bias2[r];
            for (int c : ffn2_rows_[r]) acc += layer_.ffn2(r, c) * hidden[c];
            out[r] = acc;
        }
        require_finite(out, "feed-forward output");
        return out;
    }

  private:
    struct HeadCtx {
        std::vector<int> logit_rows;  // rows live in both K and Q projections
        std::vector<int> vrows;       // rows live in the V projection
        std::vector<R> pk, pq;        // n x |logit_rows|, row-major
        std::vector<R> pv;            // n x |vrows|
        // per V-row: (output row, coefficient) entries of the mixing matrix
        std::vector<std::vector<std::pair<int, R>>> mix;
    };

    static std::vector<std::vector<int>> row_cols(const Mat<R>& m) {
        std::vector<std::vector<int>> rc(m.rows());
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c)
                if (!(m(r, c) == R(0))) rc[r].push_back(c);
        return rc;
    }

    HeadCtx make_head(int k) const {
        const int d = layer_.dim;
        const auto krows = row_cols(layer_.key[k]);
        const auto qrows = row_cols(layer_.query[k]);
        const auto vr = row_cols(layer_.value[k]);
        HeadCtx H;
        for (int r = 0; r < d; ++r)
            if (!krows[r].empty() && !qrows[r].empty()) H.logit_rows.push_back(r);
        for (int r = 0; r < d; ++r)
            if (!vr[r].empty()) H.vrows.push_back(r);

        const int W = int(H.logit_rows.size());
        const int VW = int(H.vrows.size());
        H.pk.assign(size_t(n_) * W, R(0));
        H.pq.assign(size_t(n_) * W, R(0));
        H.pv.assign(size_t(n_) * VW, R(0));
        for (int i = 0; i < n_; ++i) {
            const Vec<R>& a = inputs_[i];
            for (int t = 0; t < W; ++t) {
                const int r = H.logit_rows[t];
                R acck(0), accq(0);
                for (int c : krows[r]) acck += layer_.key[k](r, c) * a[c];
                for (int c : qrows[r]) accq += layer_.query[k](r, c) * a[c];
                H.pk[size_t(i) * W + t] = acck;
                H.pq[size_t(i) * W + t] = accq;
            }
            for (int t = 0; t < VW; ++t) {
                const int r = H.vrows[t];
                R acc(0);
                for (int c : vr[r]) acc += layer_.value[k](r, c) * a[c];
                H.pv[size_t(i) * VW + t] = acc;
            }
        }
        H.mix.resize(VW);
        for (int t = 0; t < VW; ++t) {
            const int col = k * d + H.vrows[t];
            for (int r = 0; r < d; ++r)
                if (!(layer_.head_mix(r, col) == R(0)))
                    H.mix[t].push_back({r, layer_.head_mix(r, col)});
        }
        return H;
    }

    R logit(const HeadCtx& H, int i, int j) const {
        const int W = int(H.logit_rows.size());
        R acc(0);
        for (int t = 0; t < W; ++t) acc += H.pk[size_t(i) * W + t] * H.pq[size_t(j) * W + t];
        return acc / sqrt_d_;
    }

    // Applies softmax over the window of j and streams w_i * (V alpha_i)
    // into sink(v_row_index, contribution), using the stable_softmax recipe.
    template <class Sink>
    void accumulate_head(const HeadCtx& H, int j, Sink&& sink) {
        using std::exp;
        const int lim = window(j);
        const int VW = int(H.vrows.size());
        scratch_.resize(lim);

        R mx = logit(H, 0, j);
        scratch_[0] = mx;
        for (int i = 1; i < lim; ++i) {
            scratch_[i] = logit(H, i, j);
            if (scratch_[i] > mx) mx = scratch_[i];
        }
        if (!RealOps<R>::finite(mx)) throw PrecisionError("attention logits");

        // exp of the shifted logits; a 2-slot memo catches rows that take only
        // a couple of distinct values (common in the constructed models)
        R memo_in[2], memo_out[2];
        int memo_n = 0;
        R denom(0);
        for (int i = 0; i < lim; ++i) {
            const R d = scratch_[i] - mx;
            R e;
            if (d == R(0)) {
                e = R(1);
            } else {
                int hit = -1;
                for (int t = 0; t < memo_n; ++t)
                    if (memo_in[t] == d) { hit = t; break; }
                if (hit >= 0) {
                    e = memo_out[hit];
                } else {
                    e = exp(d);
                    const int slot = memo_n < 2 ? memo_n++ : 1;
                    memo_in[slot] = d;
                    memo_out[slot] = e;
                }
            }
            scratch_[i] = e;
            denom += e;
        }
        if (VW == 0) return;
        acc_.assign(VW, R(0));
        for (int i = 0; i < lim; ++i) {
            const R w = scratch_[i] / denom;
            for (int t = 0; t < VW; ++t) acc_[t] += w * H.pv[size_t(i) * VW + t];
        }
        for (int t = 0; t < VW; ++t) sink(t, acc_[t]);
    }

    void check_head_pos(int head, int j) const {
        if (head < 0 || head >= layer_.heads) throw DimensionError("head index out of range");
        if (j < 0 || j >= n_) throw DimensionError("position index out of range");
    }

    const AttentionLayerParams<R>& layer_;
    const std::vector<Vec<R>>& inputs_;
    Masking masking_;
    int n_;
    R sqrt_d_;
    std::vector<HeadCtx> heads_;
    std::vector<std::vector<int>> ffn1_rows_, ffn2_rows_;
    std::vector<R> scratch_, acc_;
};

// Scaled dot-product logits of position j over its attention window.
template <class R>
Vec<R> attention_logits(const AttentionLayerParams<R>& layer, const std::vector<Vec<R>>& inputs,
                        int head, int j, Masking masking) {
    AttentionEval<R> ev(layer, inputs, masking);
    return ev.logits(head, j);
}

// Value of head k at position j; under causal masking the window stops at j.
template <class R>
Vec<R> head_value(const AttentionLayerParams<R>& layer, const std::vector<Vec<R>>& inputs,
                  int head, int j, Masking masking) {
    AttentionEval<R> ev(layer, inputs, masking);
    return ev.head_value(head, j);
}

// h_j + alpha_j, the feed-forward input, exposed for the affine-decomposition
// check.
template <class R>
Vec<R> pre_ffn_state(const AttentionLayerParams<R>& layer, const std::vector<Vec<R>>& inputs,
                     int j, Masking masking) {
    AttentionEval<R> ev(layer, inputs, masking);
    return ev.pre_ffn(j);
}

// Full layer map: one output vector per position.
template <class R>
std::vector<Vec<R>> layer_forward(const AttentionLayerParams<R>& layer,
                                  const std::vector<Vec<R>>& inputs, Masking masking) {
    AttentionEval<R> ev(layer, inputs, masking);
    std::vector<Vec<R>> out(inputs.size());
    for (int j = 0; j < int(inputs.size()); ++j) out[j] = ev.position_output(j);
    return out;
}

// Output of a single position; identical arithmetic to layer_forward at j.
template <class R>
Vec<R> layer_forward_at(const AttentionLayerParams<R>& layer, const std::vector<Vec<R>>& inputs,
                        int j, Masking masking) {
    AttentionEval<R> ev(layer, inputs, masking);
    return ev.position_output(j);
}

}  // namespace attnlab
