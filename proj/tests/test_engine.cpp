#include <catch2/catch_amalgamated.hpp>

#include <cfloat>
#include <cmath>
#include <random>

#include "attnlab/serialize.hpp"
#include "attnlab/sensitivity.hpp"
#include "oracle.hpp"

using namespace attnlab;

namespace {

double rel_diff(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
    return std::fabs(a - b) / scale;
}

template <class R>
double max_rel_diff(const Vec<R>& a, const std::vector<R>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0;
    for (size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, rel_diff(RealOps<R>::to_double(a[i]), RealOps<R>::to_double(b[i])));
    return worst;
}

}  // namespace

TEST_CASE("stable softmax on closed-form inputs") {
    const Vec<double> u = stable_softmax(Vec<double>{0.0, 0.0, 0.0});
    CHECK(u[0] == 1.0 / 3.0);
    CHECK(u[1] == 1.0 / 3.0);
    CHECK(u[2] == 1.0 / 3.0);

    const Vec<double> v = stable_softmax(Vec<double>{0.0, std::log(3.0)});
    CHECK_THAT(v[0], Catch::Matchers::WithinRel(0.25, 1e-14));
    CHECK_THAT(v[1], Catch::Matchers::WithinRel(0.75, 1e-14));

    // naive exponentiation would overflow here
    const Vec<double> w = stable_softmax(Vec<double>{1e9, 1e9 + std::log(2.0)});
    CHECK_THAT(w[0], Catch::Matchers::WithinRel(1.0 / 3.0, 1e-6));
    CHECK_THAT(w[1], Catch::Matchers::WithinRel(2.0 / 3.0, 1e-6));
}

TEST_CASE("stable softmax input validation") {
    CHECK_THROWS_AS(stable_softmax(Vec<double>{}), InvalidInputError);
    CHECK_THROWS_AS(stable_softmax(Vec<double>{1.0, std::nan("")}), InvalidInputError);
    CHECK_THROWS_AS(stable_softmax(Vec<double>{1.0, INFINITY}), InvalidInputError);
}

TEST_CASE("stable softmax is a probability vector") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-50.0, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vec<double> logits(1 + size_t(rng() % 17));
        for (auto& x : logits) x = uni(rng);
        const Vec<double> w = stable_softmax(logits);
        double sum = 0;
        for (double x : w) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(std::fabs(sum - 1.0) <= 4 * DBL_EPSILON);
    }
}

TEST_CASE("stable softmax shift invariance is exact on representable shifts") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        Vec<double> logits(2 + size_t(rng() % 7));
        for (auto& x : logits) x = double(int64_t(rng() % 2048) - 1024) / 64.0;  // dyadic
        const double shift = double(int64_t(rng() % 4096) - 2048) * 16.0;        // dyadic
        Vec<double> shifted = logits;
        for (auto& x : shifted) x += shift;  // exact: dyadic + dyadic at these scales
        const Vec<double> a = stable_softmax(logits);
        const Vec<double> b = stable_softmax(shifted);
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
}

TEST_CASE("head value with equal logits is the arithmetic mean") {
    const int d = 3, n = 5;
    auto lay = AttentionLayerParams<double>::zeros(d, 1);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (auto& x : lay.value[0].data()) x = uni(rng);
    lay.head_mix = Mat<double>::identity(d);

    std::vector<Vec<double>> inputs;
    for (int i = 0; i < n; ++i) {
        Vec<double> v(d);
        for (auto& x : v) x = uni(rng);
        inputs.push_back(v);
    }
    const Vec<double> hv = head_value(lay, inputs, 0, n - 1, Masking::kFull);
    for (int c = 0; c < d; ++c) {
        double mean = 0;
        for (int i = 0; i < n; ++i) mean += lay.value[0].apply(inputs[size_t(i)])[size_t(c)];
        mean /= n;
        CHECK_THAT(hv[size_t(c)], Catch::Matchers::WithinRel(mean, 1e-13));
    }
}

TEST_CASE("head value with a single position is exact") {
    const int d = 2;
    auto lay = AttentionLayerParams<double>::zeros(d, 1);
    lay.value[0](0, 0) = 2.0;
    lay.value[0](1, 1) = -3.0;
    lay.query[0](0, 0) = 1.5;
    lay.key[0](0, 1) = 0.5;
    lay.head_mix = Mat<double>::identity(d);
    std::vector<Vec<double>> inputs = {{0.25, -1.5}};
    const Vec<double> hv = head_value(lay, inputs, 0, 0, Masking::kFull);
    CHECK(hv[0] == 2.0 * 0.25);
    CHECK(hv[1] == -3.0 * -1.5);
}

TEST_CASE("causal masking: position 1 sees only itself") {
    const int d = 2;
    auto lay = AttentionLayerParams<double>::zeros(d, 1);
    lay.value[0](0, 0) = 1.0;
    lay.query[0](0, 0) = 1.0;
    lay.key[0](0, 0) = 1.0;
    lay.head_mix = Mat<double>::identity(d);
    std::vector<Vec<double>> a = {{1.0, 0.0}, {5.0, 0.0}};
    std::vector<Vec<double>> b = {{1.0, 0.0}, {-7.0, 3.0}};
    const Vec<double> ha = head_value(lay, a, 0, 0, Masking::kCausal);
    const Vec<double> hb = head_value(lay, b, 0, 0, Masking::kCausal);
    CHECK(ha[0] == 1.0);
    CHECK(ha == hb);
}

TEST_CASE("full and causal masking differ at non-final positions") {
    // uniform attention over a 2-position sequence with distinct inputs:
    // position 1's head value is the average under full attention but its own
    // value under causal masking
    const int d = 1;
    auto lay = AttentionLayerParams<double>::zeros(d, 1);
    lay.value[0](0, 0) = 1.0;
    lay.head_mix = Mat<double>::identity(d);
    lay.ffn1 = Mat<double>::identity(d);
    lay.ffn2 = Mat<double>::identity(d);
    std::vector<Vec<double>> inputs = {{0.0}, {1.0}};
    const auto full = layer_forward(lay, inputs, Masking::kFull);
    const auto causal = layer_forward(lay, inputs, Masking::kCausal);
    CHECK(full[0][0] != causal[0][0]);
    CHECK(full[1][0] == causal[1][0]);
}

TEST_CASE("layer collapses to the bias when values and W1 vanish") {
    const int d = 3, n = 4;
    auto lay = AttentionLayerParams<double>::zeros(d, 2);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (auto& x : lay.query[0].data()) x = uni(rng);
    for (auto& x : lay.key[1].data()) x = uni(rng);
    for (auto& x : lay.head_mix.data()) x = uni(rng);
    for (auto& x : lay.ffn2.data()) x = uni(rng);
    const Vec<double> c = {0.5, -2.0, 3.25};
    lay.bias2 = c;
    std::vector<Vec<double>> inputs;
    for (int i = 0; i < n; ++i) {
        Vec<double> v(d);
        for (auto& x : v) x = uni(rng);
        inputs.push_back(v);
    }
    for (const auto& out : layer_forward(lay, inputs, Masking::kFull)) CHECK(out == c);
}

TEST_CASE("engine matches the direct-evaluation oracle on random models") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 40; ++trial) {
        RandomModelSpec spec;
        spec.dim = 2 + int(rng() % 3);      // up to 4
        spec.heads = 1 + int(rng() % 2);
        spec.layers = 1 + int(rng() % 2);
        spec.max_len = 6;
        auto m = random_transformer_model<double>(spec, rng());
        m.masking = (trial % 2 == 0) ? Masking::kFull : Masking::kCausal;
        for (int n = 1; n <= 6; n += 2) {
            std::vector<int> toks;
            for (int i = 0; i < n; ++i) toks.push_back(int(rng() % 3));
            std::vector<double> oracle_state;
            const int oracle_tok = oracle::forward(m, toks, &oracle_state);
            const Vec<double> engine_state = last_position_state(m, toks);
            CHECK(max_rel_diff(engine_state, oracle_state) <= 1e-12);
            CHECK(transformer_forward(m, toks) == oracle_tok);
        }
    }
}

TEST_CASE("zero readout matrix always ties to the bottom token") {
    RandomModelSpec spec;
    spec.dim = 3;
    auto m = random_transformer_model<double>(spec, 99);
    m.output = Mat<double>(3, 3);
    const std::vector<int> toks = {0, 1, 0, 0};
    CHECK(transformer_forward(m, toks) == m.bottom_id());
}

TEST_CASE("one-layer models ignore the masking mode") {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 10; ++trial) {
        RandomModelSpec spec;
        spec.dim = 3;
        spec.max_len = 6;
        auto m = random_transformer_model<double>(spec, rng());
        for (int n = 1; n <= 6; ++n) {
            for (uint64_t x = 0; x < (uint64_t(1) << n); ++x) {
                const auto bits = bits_from_index(x, n);
                m.masking = Masking::kFull;
                const int a = forward_on_bits(m, bits);
                m.masking = Masking::kCausal;
                const int b = forward_on_bits(m, bits);
                CHECK(a == b);
            }
        }
    }
}

TEST_CASE("transformer_forward input validation") {
    RandomModelSpec spec;
    auto m = random_transformer_model<double>(spec, 7);
    CHECK_THROWS_AS(transformer_forward(m, std::vector<int>{}), InvalidInputError);
    CHECK_THROWS_AS(transformer_forward(m, std::vector<int>{0, 7}), InvalidInputError);
}

TEST_CASE("zero-layer models are rejected") {
    RandomModelSpec spec;
    auto m = random_transformer_model<double>(spec, 8);
    m.layers.clear();
    CHECK_THROWS_AS(validate_model(m), DimensionError);
    CHECK_THROWS_AS(last_position_state(m, std::vector<int>{0, 1}), DimensionError);
}

TEST_CASE("readout argmax agrees with the forward token when untied") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        RandomModelSpec spec;
        spec.dim = 4;
        spec.max_len = 5;
        auto m = random_transformer_model<double>(spec, rng());
        const std::vector<int> toks = {1, 0, 1, 1, 0};
        const Vec<double> state = last_position_state(m, toks);
        const Vec<double> logits = m.output.apply(state);
        const int out = transformer_forward(m, toks);
        if (out != m.bottom_id()) {
            int best = 0;
            for (int t = 1; t < 3; ++t)
                if (logits[size_t(t)] > logits[size_t(best)]) best = t;
            CHECK(out == best);
        }
    }
}

TEST_CASE("doubling the mantissa barely moves well-conditioned states") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 5; ++trial) {
        const uint64_t seed = rng();
        RandomModelSpec spec;
        spec.dim = 3;
        spec.max_len = 5;
        auto md = random_transformer_model<double>(spec, seed);
        PrecisionConfig ext = PrecisionConfig::extended(113);
        ext.activate();
        auto mb = random_transformer_model<BigFloat>(spec, seed);
        const std::vector<int> toks = {1, 0, 0, 1, 1};
        const Vec<double> sd = last_position_state(md, toks);
        const Vec<BigFloat> sb = last_position_state(mb, toks);
        for (size_t c = 0; c < sd.size(); ++c)
            CHECK(rel_diff(sd[c], RealOps<BigFloat>::to_double(sb[c])) < 1e-6);
    }
}

TEST_CASE("non-finite intermediates abort with a precision error") {
    const int d = 1;
    auto lay = AttentionLayerParams<double>::zeros(d, 1);
    lay.query[0](0, 0) = 1e200;
    lay.key[0](0, 0) = 1e200;
    lay.value[0](0, 0) = 1.0;
    lay.head_mix = Mat<double>::identity(d);
    lay.ffn1 = Mat<double>::identity(d);
    lay.ffn2 = Mat<double>::identity(d);
    std::vector<Vec<double>> inputs = {{1e200}, {1.0}};
    try {
        layer_forward(lay, inputs, Masking::kFull);
        FAIL("expected PrecisionError");
    } catch (const PrecisionError& e) {
        CHECK(std::string(e.what()).find("extended") != std::string::npos);
    }

    auto ffn = AttentionLayerParams<double>::zeros(d, 1);
    ffn.head_mix = Mat<double>::identity(d);
    ffn.ffn1(0, 0) = 1e308;
    ffn.ffn2(0, 0) = 1e308;
    std::vector<Vec<double>> small = {{2.0}};
    CHECK_THROWS_AS(layer_forward(ffn, small, Masking::kFull), PrecisionError);
}

TEST_CASE("evaluation is deterministic") {
    RandomModelSpec spec;
    spec.dim = 4;
    spec.layers = 2;
    auto m = random_transformer_model<double>(spec, 123);
    const std::vector<int> toks = {0, 1, 1, 0, 1};
    const Vec<double> a = last_position_state(m, toks);
    const Vec<double> b = last_position_state(m, toks);
    CHECK(a == b);
}

TEST_CASE("double-precision models round-trip bit-exactly through JSON") {
    std::mt19937_64 rng(81);
    for (int trial = 0; trial < 5; ++trial) {
        RandomModelSpec spec;
        spec.dim = 3;
        spec.layers = 2;
        spec.heads = 2;
        spec.max_len = 6;
        auto m = random_transformer_model<double>(spec, rng());
        const nlohmann::json j = model_to_json(m);
        const auto m2 = model_from_json<double>(j);
        CHECK(model_to_json(m2).dump() == j.dump());
        for (uint64_t x = 0; x < 16; ++x) {
            const auto bits = bits_from_index(x, 4);
            CHECK(forward_on_bits(m, bits) == forward_on_bits(m2, bits));
        }
        // weight-level equality, not just behavioral
        CHECK(m.output == m2.output);
        for (size_t l = 0; l < m.layers.size(); ++l) {
            CHECK(m.layers[l].ffn1 == m2.layers[l].ffn1);
            CHECK(m.layers[l].query[0] == m2.layers[l].query[0]);
        }
    }
}

TEST_CASE("extended-precision models round-trip through decimal strings") {
    ConstructionParams p;
    p.precision = PrecisionConfig::extended(64);
    auto m = build_restricted_model<long double>(p);
    const nlohmann::json j = model_to_json(m);
    CHECK(j["precision"]["mode"] == "extended");
    const auto m2 = model_from_json<long double>(j);
    for (int l = 0; l < 3; ++l) {
        CHECK(m.layers[size_t(l)].query[0] == m2.layers[size_t(l)].query[0]);
        CHECK(m.layers[size_t(l)].ffn1 == m2.layers[size_t(l)].ffn1);
    }
    const auto bits = bits_from_string("000000001");
    CHECK(forward_on_bits(m, bits) == forward_on_bits(m2, bits));

    // same through the arbitrary-mantissa backend
    PrecisionConfig wide = PrecisionConfig::extended(113);
    wide.activate();
    ConstructionParams pw = p;
    pw.precision = wide;
    auto mw = build_restricted_model<BigFloat>(pw);
    const auto mw2 = model_from_json<BigFloat>(model_to_json(mw));
    CHECK(mw.layers[0].query[0] == mw2.layers[0].query[0]);
    CHECK(forward_on_bits(mw, bits) == forward_on_bits(mw2, bits));
}

TEST_CASE("precision config validation") {
    CHECK_THROWS_AS(PrecisionConfig::extended(52), InvalidInputError);
    CHECK(PrecisionConfig::extended(64).label() == "ext:64");
    CHECK(PrecisionConfig::parse("double").mode == PrecisionConfig::Mode::kDouble);
    CHECK(PrecisionConfig::parse("ext:80").mantissa_bits == 80);
    CHECK_THROWS_AS(PrecisionConfig::parse("float"), InvalidInputError);
}
