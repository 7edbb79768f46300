#pragma once

#include <algorithm>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "attnlab/attention.hpp"
#include "attnlab/precision.hpp"

namespace attnlab {

inline constexpr const char* kBottomToken = "⊥";  // the tie output

// Positional encoding: a map from the 1-based position index (and, when not
// length-independent, the sequence length) to a d-vector added on top of the
// token embedding.
template <class R>
class PositionalEncoding {
  public:
    virtual ~PositionalEncoding() = default;
    virtual int dim() const = 0;
    virtual bool length_independent() const = 0;
    virtual std::string kind() const = 0;
    // Adds PE(i, n) into out (out must have dim() entries).
    virtual void add_to(int i, int n, Vec<R>& out) const = 0;

    Vec<R> at(int i, int n) const {
        Vec<R> v(dim(), R(0));
        add_to(i, n, v);
        return v;
    }
};

template <class R>
class ZeroPositionalEncoding final : public PositionalEncoding<R> {
  public:
    explicit ZeroPositionalEncoding(int dim) : dim_(dim) {}
    int dim() const override { return dim_; }
    bool length_independent() const override { return true; }
    std::string kind() const override { return "zero"; }
    void add_to(int, int, Vec<R>&) const override {}

  private:
    int dim_;
};

// Explicit per-position table; positions beyond the stored range are an error.
template <class R>
class TablePositionalEncoding final : public PositionalEncoding<R> {
  public:
    explicit TablePositionalEncoding(std::vector<Vec<R>> values)
        : values_(std::move(values)) {
        if (values_.empty()) throw InvalidInputError("empty positional-encoding table");
    }
    int dim() const override { return int(values_[0].size()); }
    bool length_independent() const override { return true; }
    std::string kind() const override { return "table"; }
    void add_to(int i, int, Vec<R>& out) const override {
        if (i < 1 || i > int(values_.size()))
            throw InvalidInputError("position outside the positional-encoding table");
        const Vec<R>& v = values_[i - 1];
        for (size_t c = 0; c < v.size(); ++c) out[c] += v[c];
    }
    const std::vector<Vec<R>>& values() const { return values_; }

  private:
    std::vector<Vec<R>> values_;
};

// Standard-form input embedding E(x, i, n) = TE(x) + PE(i, n) with a 0/1
// token embedding.
template <class R>
struct EmbeddingSpec {
    std::vector<Vec<R>> token_embedding;  // one 0/1 vector per token id
    std::shared_ptr<const PositionalEncoding<R>> positional;

    bool length_independent() const { return positional->length_independent(); }

    Vec<R> embed(int token, int i, int n) const {
        Vec<R> v = token_embedding.at(size_t(token));
        positional->add_to(i, n, v);
        return v;
    }
};

template <class R>
struct TransformerModel {
    std::vector<std::string> vocab;  // must contain kBottomToken
    EmbeddingSpec<R> embedding;
    std::vector<AttentionLayerParams<R>> layers;
    Mat<R> output;  // |vocab| x dim
    Masking masking = Masking::kCausal;
    PrecisionConfig precision;

    int dim() const { return layers.empty() ? 0 : layers[0].dim; }

    int token_id(const std::string& name) const {
        for (size_t t = 0; t < vocab.size(); ++t)
            if (vocab[t] == name) return int(t);
        return -1;
    }

    int bottom_id() const { return token_id(kBottomToken); }
};

template <class R>
void validate_model(const TransformerModel<R>& m) {
    if (m.vocab.empty()) throw DimensionError("empty vocabulary");
    if (m.bottom_id() < 0)
        throw DimensionError("vocabulary does not contain the tie token");
    if (m.layers.empty()) throw DimensionError("model must have at least one layer");
    const int d = m.layers[0].dim;
    for (const auto& L : m.layers) {
        L.validate();
        if (L.dim != d) throw DimensionError("layers disagree on dimension");
    }
    if (m.output.rows() != int(m.vocab.size()) || m.output.cols() != d)
        throw DimensionError("output matrix must be |vocab| x dim");
    if (m.embedding.token_embedding.size() != m.vocab.size())
        throw DimensionError("token embedding count must match vocabulary");
    for (const Vec<R>& te : m.embedding.token_embedding) {
        if (int(te.size()) != d) throw DimensionError("token embedding has wrong dimension");
        for (const R& x : te)
            if (!(x == R(0) || x == R(1)))
                throw DimensionError("token embedding entries must be 0 or 1");
    }
    if (m.embedding.positional->dim() != d)
        throw DimensionError("positional encoding has wrong dimension");
}

template <class R>
std::vector<Vec<R>> embed_sequence(const TransformerModel<R>& m, std::span<const int> tokens) {
    if (tokens.empty()) throw InvalidInputError("empty input sequence");
    const int n = int(tokens.size());
    std::vector<Vec<R>> out;
    out.reserve(tokens.size());
    for (int i = 0; i < n; ++i) {
        const int t = tokens[i];
        if (t < 0 || t >= int(m.vocab.size()))
            throw InvalidInputError("token id outside vocabulary");
        out.push_back(m.embedding.embed(t, i + 1, n));
        require_finite(out.back(), "input embedding");
    }
    return out;
}

// State sequence after the first `upto` layers (upto = 0 gives the embeddings).
template <class R>
std::vector<Vec<R>> run_layers(const TransformerModel<R>& m, std::span<const int> tokens,
                               int upto) {
    if (upto < 0 || upto > int(m.layers.size()))
        throw DimensionError("layer count out of range");
    std::vector<Vec<R>> st = embed_sequence(m, tokens);
    for (int l = 0; l < upto; ++l) st = layer_forward(m.layers[l], st, m.masking);
    return st;
}

// State of the last position after the last layer (the readout input). The
// final layer is evaluated at the last position only; every earlier layer
// must be evaluated everywhere since its outputs feed later keys and values.
template <class R>
Vec<R> last_position_state(const TransformerModel<R>& m, std::span<const int> tokens) {
    if (m.layers.empty()) throw DimensionError("model must have at least one layer");
    std::vector<Vec<R>> st = embed_sequence(m, tokens);
    const int C = int(m.layers.size());
    for (int l = 0; l + 1 < C; ++l) st = layer_forward(m.layers[l], st, m.masking);
    return layer_forward_at(m.layers[C - 1], st, int(st.size()) - 1, m.masking);
}

template <class R>
Vec<R> readout_logits(const TransformerModel<R>& m, std::span<const int> tokens) {
    Vec<R> logits = m.output.apply(last_position_state(m, tokens));
    require_finite(logits, "readout");
    return logits;
}

// Output token: embed, run every layer, read the last position. The output
// softmax is strictly monotone, so the argmax runs directly on the readout
// logits. Ties are exact equality in the backend and map to the tie token.
template <class R>
int transformer_forward(const TransformerModel<R>& m, std::span<const int> tokens) {
    const Vec<R> logits = readout_logits(m, tokens);
    int best = 0;
    int winners = 1;
    for (int t = 1; t < int(logits.size()); ++t) {
        if (logits[t] > logits[best]) {
            best = t;
            winners = 1;
        } else if (logits[t] == logits[best]) {
            ++winners;
        }
    }
    return winners == 1 ? best : m.bottom_id();
}

template <class R>
int transformer_forward(const TransformerModel<R>& m, const std::vector<int>& tokens) {
    return transformer_forward(m, std::span<const int>(tokens.data(), tokens.size()));
}

// ---- bit-string helpers --------------------------------------------------

template <class R>
std::vector<int> tokens_from_bits(const TransformerModel<R>& m, const std::vector<int>& bits) {
    const int t0 = m.token_id("0");
    const int t1 = m.token_id("1");
    if (t0 < 0 || t1 < 0) throw InvalidInputError("vocabulary lacks 0/1 tokens");
    std::vector<int> out(bits.size());
    for (size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ? t1 : t0;
    return out;
}

inline std::string bits_to_string(const std::vector<int>& bits) {
    std::string s(bits.size(), '0');
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) s[i] = '1';
    return s;
}

inline std::vector<int> bits_from_string(const std::string& s) {
    std::vector<int> bits(s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '0' && s[i] != '1') throw InvalidInputError("bit string must be over 0/1");
        bits[i] = s[i] == '1';
    }
    return bits;
}

// Bits of x_1..x_n for index `idx` in standard binary order (x_1 is the most
// significant bit).
inline std::vector<int> bits_from_index(uint64_t idx, int n) {
    std::vector<int> bits(n);
    for (int t = 0; t < n; ++t) bits[t] = int((idx >> (n - 1 - t)) & 1u);
    return bits;
}

// Forward pass on a bit string; returns the output token id.
template <class R>
int forward_on_bits(const TransformerModel<R>& m, const std::vector<int>& bits) {
    return transformer_forward(m, tokens_from_bits(m, bits));
}

}  // namespace attnlab
