#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "attnlab/model.hpp"

namespace attnlab {

// Exact fraction for sensitivity averages; denominators are powers of two.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d) : num(n), den(d) { reduce(); }

    void reduce() {
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    double value() const { return double(num) / double(den); }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

// Truth table over {0,1}^n. Inputs are indexed in standard binary order with
// x_1 as the most significant bit, so majority on 3 bits reads
// [0,0,0,1,0,1,1,1].
class BooleanFunction {
  public:
    static constexpr int kArityCap = 20;

    BooleanFunction(int arity, std::vector<uint8_t> table, int cap = kArityCap)
        : arity_(arity), table_(std::move(table)) {
        if (arity < 1 || arity > cap)
            throw InvalidInputError("arity outside [1, " + std::to_string(cap) + "]");
        if (table_.size() != (size_t(1) << arity))
            throw DimensionError("truth table must have exactly 2^n entries");
        for (uint8_t v : table_)
            if (v > 1) throw InvalidInputError("truth table entries must be bits");
    }

    int arity() const { return arity_; }
    uint64_t inputs() const { return uint64_t(1) << arity_; }
    bool value(uint64_t x) const { return table_[size_t(x)] != 0; }

    static BooleanFunction constant(int n, bool v) {
        return BooleanFunction(n, std::vector<uint8_t>(size_t(1) << n, v ? 1 : 0));
    }

    static BooleanFunction parity(int n) {
        std::vector<uint8_t> t(size_t(1) << n);
        for (uint64_t x = 0; x < (uint64_t(1) << n); ++x)
            t[size_t(x)] = uint8_t(__builtin_popcountll(x) & 1);
        return BooleanFunction(n, std::move(t));
    }

    static BooleanFunction majority(int n) {
        std::vector<uint8_t> t(size_t(1) << n);
        for (uint64_t x = 0; x < (uint64_t(1) << n); ++x)
            t[size_t(x)] = uint8_t(2 * __builtin_popcountll(x) > n);
        return BooleanFunction(n, std::move(t));
    }

    // "n:hex" with table bit k in bit (k mod 4) of hex digit k/4.
    std::string to_hex() const {
        static const char* digits = "0123456789abcdef";
        std::string s = std::to_string(arity_) + ":";
        for (size_t base = 0; base < table_.size(); base += 4) {
            int nibble = 0;
            for (size_t b = 0; b < 4 && base + b < table_.size(); ++b)
                nibble |= int(table_[base + b]) << b;
            s.push_back(digits[nibble]);
        }
        return s;
    }

    static BooleanFunction from_hex(const std::string& s) {
        const size_t colon = s.find(':');
        if (colon == std::string::npos)
            throw InvalidInputError("hex truth table must look like n:digits");
        const int n = std::stoi(s.substr(0, colon));
        if (n < 1 || n > kArityCap) throw InvalidInputError("hex truth table arity out of range");
        const std::string hex = s.substr(colon + 1);
        std::vector<uint8_t> t(size_t(1) << n, 0);
        if (hex.size() * 4 < t.size())
            throw InvalidInputError("hex truth table too short for its arity");
        for (size_t k = 0; k < t.size(); ++k) {
            const char c = hex[k / 4];
            int v;
            if (c >= '0' && c <= '9')
                v = c - '0';
            else if (c >= 'a' && c <= 'f')
                v = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F')
                v = c - 'A' + 10;
            else
                throw InvalidInputError("bad hex digit in truth table");
            t[k] = uint8_t((v >> (k % 4)) & 1);
        }
        return BooleanFunction(n, std::move(t));
    }

  private:
    int arity_;
    std::vector<uint8_t> table_;
};

// Number of coordinates whose flip changes f at x.
inline int sensitivity_at(const BooleanFunction& f, uint64_t x) {
    if (x >= f.inputs()) throw InvalidInputError("input outside {0,1}^n");
    const bool v = f.value(x);
    int s = 0;
    for (int t = 0; t < f.arity(); ++t)
        if (f.value(x ^ (uint64_t(1) << t)) != v) ++s;
    return s;
}

// Hypercube edges whose endpoints receive different values.
inline uint64_t sensitive_edge_count(const BooleanFunction& f) {
    uint64_t cnt = 0;
    for (uint64_t x = 0; x < f.inputs(); ++x) {
        const bool v = f.value(x);
        for (int t = 0; t < f.arity(); ++t) {
            const uint64_t bit = uint64_t(1) << t;
            if ((x & bit) == 0 && f.value(x | bit) != v) ++cnt;
        }
    }
    return cnt;
}

// as(f) = sum_x s_x(f) / 2^n, exactly. Equals 2 * edges / 2^n since every
// sensitive edge is counted once from each end.
inline Rational average_sensitivity(const BooleanFunction& f) {
    return Rational(2 * (long long)sensitive_edge_count(f), (long long)f.inputs());
}

// ---- hyperplane edge cuts --------------------------------------------------

struct Hyperplane {
    std::vector<double> normal;  // indexed by input position 1..n
    double offset = 0.0;
};

// Edges whose endpoints fall on different sides of the predicate
// <w, x> > b. Points on the hyperplane group with the non-positive side, so
// an edge with exactly one endpoint on the plane counts as cut.
inline uint64_t cut_edges(const Hyperplane& h, int n) {
    if (n < 1 || n > BooleanFunction::kArityCap)
        throw InvalidInputError("cut_edges arity outside [1, cap]");
    if (int(h.normal.size()) != n) throw DimensionError("normal length must equal n");
    bool any = false;
    for (double w : h.normal) any = any || (w != 0.0);
    if (!any) throw InvalidInputError("cut_edges needs a nonzero normal");

    // input position t (1-based) lives in bit (n - t) of the index
    std::vector<double> dot(size_t(1) << n, 0.0);
    for (uint64_t x = 1; x < dot.size(); ++x) {
        const int low = __builtin_ctzll(x);
        dot[x] = dot[x & (x - 1)] + h.normal[size_t(n - 1 - low)];
    }
    uint64_t cnt = 0;
    for (uint64_t x = 0; x < dot.size(); ++x) {
        const bool side = dot[x] > h.offset;
        for (int t = 0; t < n; ++t) {
            const uint64_t bit = uint64_t(1) << t;
            if ((x & bit) == 0 && (dot[x | bit] > h.offset) != side) ++cnt;
        }
    }
    return cnt;
}

// ---- models as Boolean functions -------------------------------------------

// Evaluates the model on every x in {0,1}^n. Output must be a 0/1 token for
// every input; the first offending input is reported.
template <class R>
BooleanFunction truth_table(const TransformerModel<R>& model, int n, Masking masking,
                            int cap = BooleanFunction::kArityCap) {
    if (n < 1 || n > cap) throw InvalidInputError("truth_table arity outside [1, cap]");
    TransformerModel<R> m = model;
    m.masking = masking;
    const int t0 = m.token_id("0");
    const int t1 = m.token_id("1");
    if (t0 < 0 || t1 < 0) throw InvalidInputError("vocabulary lacks 0/1 tokens");
    std::vector<uint8_t> table(size_t(1) << n);
    std::vector<int> toks(size_t(n), 0);
    for (uint64_t x = 0; x < (uint64_t(1) << n); ++x) {
        for (int t = 0; t < n; ++t) toks[size_t(t)] = ((x >> (n - 1 - t)) & 1) ? t1 : t0;
        const int out = transformer_forward(m, toks);
        if (out == t0)
            table[size_t(x)] = 0;
        else if (out == t1)
            table[size_t(x)] = 1;
        else
            throw NotBooleanError("model output is not a 0/1 token",
                                  bits_to_string(bits_from_index(x, n)));
    }
    return BooleanFunction(n, std::move(table), cap);
}

// ---- affine decomposition of a 1-layer 1-head model ------------------------

// The last-position pre-feed-forward state of a 1-layer 1-head model with the
// last input bit fixed is a ratio of affine functions of the remaining bits:
// gamma_n(x) = (l_1(x), ..., l_d(x)) / l_0(x), with l_0 a sum of exponentials.
template <class R>
struct AffineDecomposition {
    int vars = 0;                // n - 1
    std::vector<Vec<R>> coeff;   // (d+1) rows, each with n-1 coefficients
    Vec<R> constant;             // d+1

    // l_0(x), ..., l_d(x)
    Vec<R> evaluate(const std::vector<int>& x) const {
        if (int(x.size()) != vars) throw DimensionError("affine evaluate: wrong arity");
        Vec<R> out(constant);
        for (size_t k = 0; k < out.size(); ++k)
            for (int i = 0; i < vars; ++i)
                if (x[size_t(i)]) out[k] += coeff[k][size_t(i)];
        return out;
    }

    // gamma = (l_1, ..., l_d) / l_0
    Vec<R> reconstruct(const std::vector<int>& x) const {
        Vec<R> l = evaluate(x);
        if (!(l[0] > R(0)))
            throw PrecisionError("affine reconstruction denominator");
        Vec<R> g(l.size() - 1);
        for (size_t k = 1; k < l.size(); ++k) g[k - 1] = l[k] / l[0];
        return g;
    }
};

template <class R>
AffineDecomposition<R> affine_decompose(const TransformerModel<R>& m, int n, int last_bit) {
    using std::exp;
    using std::sqrt;
    if (m.layers.size() != 1 || m.layers[0].heads != 1)
        throw DimensionError("affine decomposition needs a 1-layer 1-head model");
    if (n < 2) throw InvalidInputError("affine decomposition needs n >= 2");
    if (last_bit != 0 && last_bit != 1) throw InvalidInputError("last bit must be 0 or 1");

    const auto& lay = m.layers[0];
    const int d = lay.dim;
    const R sqrt_d = sqrt(R(double(d)));
    const int t0 = m.token_id("0");
    const int t1 = m.token_id("1");

    const Vec<R> alpha_n = m.embedding.embed(last_bit ? t1 : t0, n, n);
    const Vec<R> q_n = lay.query[0].apply(alpha_n);

    // e_i(b) and v_i(b) = e_i(b) * (alpha_n + W_O V alpha_i(b))
    auto term = [&](const Vec<R>& alpha_i) {
        const Vec<R> k_i = lay.key[0].apply(alpha_i);
        R logit(0);
        for (int c = 0; c < d; ++c) logit += k_i[size_t(c)] * q_n[size_t(c)];
        const R e = exp(logit / sqrt_d);
        Vec<R> v = lay.value[0].apply(alpha_i);
        // single head: W_O is the d x d mixing block
        Vec<R> mixed = lay.head_mix.apply(v);
        for (int c = 0; c < d; ++c) mixed[size_t(c)] = e * (alpha_n[size_t(c)] + mixed[size_t(c)]);
        mixed.push_back(e);  // carries the denominator term alongside
        return mixed;
    };

    AffineDecomposition<R> dec;
    dec.vars = n - 1;
    dec.coeff.assign(size_t(d) + 1, Vec<R>(size_t(n - 1), R(0)));
    dec.constant.assign(size_t(d) + 1, R(0));

    const Vec<R> last = term(alpha_n);
    dec.constant[0] = last[size_t(d)];
    for (int c = 0; c < d; ++c) dec.constant[size_t(c) + 1] = last[size_t(c)];

    for (int i = 1; i < n; ++i) {
        const Vec<R> off = term(m.embedding.embed(t0, i, n));
        const Vec<R> on = term(m.embedding.embed(t1, i, n));
        dec.constant[0] += off[size_t(d)];
        dec.coeff[0][size_t(i - 1)] = on[size_t(d)] - off[size_t(d)];
        for (int c = 0; c < d; ++c) {
            dec.constant[size_t(c) + 1] += off[size_t(c)];
            dec.coeff[size_t(c) + 1][size_t(i - 1)] = on[size_t(c)] - off[size_t(c)];
        }
    }
    return dec;
}

// ---- random models and the sensitivity sweep --------------------------------

struct RandomModelSpec {
    int dim = 4;
    int heads = 1;
    int layers = 1;
    int max_len = 16;   // positional-encoding table length
    double scale = 1.0;
};

// Random transformer over {0, 1, bottom}: weights and positional encodings
// uniform on [-scale, scale], token embeddings uniform over {0,1}^d.
template <class R = double>
TransformerModel<R> random_transformer_model(const RandomModelSpec& spec, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-spec.scale, spec.scale);
    auto draw = [&] { return RealOps<R>::from_double(uni(rng)); };

    TransformerModel<R> m;
    m.vocab = {"0", "1", kBottomToken};
    m.masking = Masking::kFull;
    for (int t = 0; t < 3; ++t) {
        Vec<R> te(size_t(spec.dim), R(0));
        for (auto& x : te) x = R(int(rng() & 1));
        m.embedding.token_embedding.push_back(std::move(te));
    }
    std::vector<Vec<R>> pe(size_t(spec.max_len), Vec<R>(size_t(spec.dim)));
    for (auto& row : pe)
        for (auto& x : row) x = draw();
    m.embedding.positional = std::make_shared<TablePositionalEncoding<R>>(std::move(pe));

    for (int l = 0; l < spec.layers; ++l) {
        auto lay = AttentionLayerParams<R>::zeros(spec.dim, spec.heads);
        auto fill = [&](Mat<R>& mat) {
            for (auto& x : mat.data()) x = draw();
        };
        for (int k = 0; k < spec.heads; ++k) {
            fill(lay.query[k]);
            fill(lay.key[k]);
            fill(lay.value[k]);
        }
        fill(lay.head_mix);
        fill(lay.ffn1);
        fill(lay.ffn2);
        for (auto& x : lay.bias1) x = draw();
        for (auto& x : lay.bias2) x = draw();
        m.layers.push_back(std::move(lay));
    }
    m.output = Mat<R>(3, spec.dim);
    for (auto& x : m.output.data()) x = draw();
    return m;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct SweepConfig {
    int trials = 200;
    std::vector<int> lengths = {6, 7, 8, 9, 10, 11, 12};
    int dim = 4;
    uint64_t seed = 0;
    std::vector<double> scales = {1.0, 10.0, 100.0};
    double flag_threshold = 1.5;
};

struct SweepEntry {
    int n = 0;
    int trial = 0;
    double scale = 0;
    double avg_sensitivity = 0;
    double ratio = 0;   // as / sqrt(n)
    std::string table;  // hex-packed truth table, kept for flagged entries
};

struct SweepReport {
    SweepConfig config;
    int evaluated = 0;
    int skipped_non_boolean = 0;
    double max_ratio = 0;
    std::optional<SweepEntry> max_entry;
    std::vector<SweepEntry> flagged;                      // ratio > threshold
    std::vector<std::pair<int, double>> per_n_max_ratio;  // (n, max ratio)
    std::vector<std::pair<int, double>> parity_control;   // ratio sqrt(n) exactly
    std::vector<std::pair<int, double>> majority_ratios;  // built model, odd n
};

// Largest count/(sqrt(n) 2^n) over seeded random unit-normal hyperplanes with
// offsets on the sqrt(n)/2 scale.
inline double sample_edge_cut_ratio(int n, int planes, uint64_t seed) {
    std::mt19937_64 rng(splitmix64(seed ^ (uint64_t(n) * 0x51ed2701)));
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = 0;
    for (int t = 0; t < planes; ++t) {
        Hyperplane h;
        h.normal.assign(size_t(n), 0.0);
        double norm = 0;
        for (auto& w : h.normal) {
            w = gauss(rng);
            norm += w * w;
        }
        norm = std::sqrt(norm);
        if (norm == 0) continue;
        for (auto& w : h.normal) w /= norm;
        h.offset = gauss(rng) * std::sqrt(double(n)) / 2.0;
        const double ratio = double(cut_edges(h, n)) / (std::sqrt(double(n)) * std::pow(2.0, n));
        worst = std::max(worst, ratio);
    }
    return worst;
}

// Exact as(maj_n) for odd n: 2 C(n, (n-1)/2) ((n+1)/2) / 2^n.
inline Rational majority_average_sensitivity_exact(int n) {
    if (n < 1 || n % 2 == 0) throw InvalidInputError("odd n required");
    long long binom = 1;
    for (long long k = 1; k <= (n - 1) / 2; ++k) binom = binom * (n - k + 1) / k;
    return Rational(2 * binom * ((n + 1) / 2), 1LL << n);
}

// Declared-distribution random sweep illustrating the O(sqrt n) ceiling for
// 1-layer 1-head models. Models whose output is not Boolean on some input are
// counted and skipped.
template <class R = double>
SweepReport sensitivity_sweep(const SweepConfig& cfg,
                              const TransformerModel<R>* majority = nullptr) {
    SweepReport rep;
    rep.config = cfg;
    for (int n : cfg.lengths) {
        double n_max_ratio = 0;
        for (int trial = 0; trial < cfg.trials; ++trial) {
            RandomModelSpec spec;
            spec.dim = cfg.dim;
            spec.max_len = n;
            spec.scale = cfg.scales[size_t(trial) % cfg.scales.size()];
            const uint64_t s =
                splitmix64(cfg.seed ^ splitmix64(uint64_t(n) << 32 | uint64_t(trial)));
            auto model = random_transformer_model<R>(spec, s);
            BooleanFunction f = BooleanFunction::constant(1, false);
            try {
                f = truth_table(model, n, Masking::kFull);
            } catch (const NotBooleanError&) {
                ++rep.skipped_non_boolean;
                continue;
            }
            ++rep.evaluated;
            SweepEntry e;
            e.n = n;
            e.trial = trial;
            e.scale = spec.scale;
            e.avg_sensitivity = average_sensitivity(f).value();
            e.ratio = e.avg_sensitivity / std::sqrt(double(n));
            if (e.ratio > rep.max_ratio) {
                rep.max_ratio = e.ratio;
                rep.max_entry = e;
                rep.max_entry->table = f.to_hex();
            }
            if (e.ratio > cfg.flag_threshold) {
                e.table = f.to_hex();
                rep.flagged.push_back(e);
            }
            n_max_ratio = std::max(n_max_ratio, e.ratio);
        }
        rep.per_n_max_ratio.push_back({n, n_max_ratio});
        rep.parity_control.push_back({n, std::sqrt(double(n))});
    }
    if (majority) {
        for (int n = 3; n <= 15; n += 2) {
            BooleanFunction f = truth_table(*majority, n, majority->masking);
            rep.majority_ratios.push_back(
                {n, average_sensitivity(f).value() / std::sqrt(double(n))});
        }
    }
    return rep;
}

}  // namespace attnlab
