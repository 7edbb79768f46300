#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "attnlab/builders.hpp"
#include "attnlab/sensitivity.hpp"

using namespace attnlab;

TEST_CASE("truth table indexing follows standard binary order") {
    auto mj = build_majority_model<double>();
    const BooleanFunction f = truth_table(mj, 3, Masking::kFull);
    const std::vector<uint8_t> want = {0, 0, 0, 1, 0, 1, 1, 1};
    for (uint64_t x = 0; x < 8; ++x) CHECK(f.value(x) == (want[size_t(x)] != 0));
}

TEST_CASE("non-Boolean outputs are reported with their witness") {
    RandomModelSpec spec;
    spec.dim = 3;
    auto m = random_transformer_model<double>(spec, 4);
    m.output = Mat<double>(3, 3);  // all logits tie, every output is bottom
    try {
        truth_table(m, 4, Masking::kFull);
        FAIL("expected NotBooleanError");
    } catch (const NotBooleanError& e) {
        CHECK(e.witness == "0000");
    }
    CHECK_THROWS_AS(truth_table(m, 25, Masking::kFull), InvalidInputError);
}

TEST_CASE("pointwise sensitivity") {
    const auto par3 = BooleanFunction::parity(3);
    for (uint64_t x = 0; x < 8; ++x) CHECK(sensitivity_at(par3, x) == 3);
    const auto c0 = BooleanFunction::constant(4, false);
    for (uint64_t x = 0; x < 16; ++x) CHECK(sensitivity_at(c0, x) == 0);
    // maj3 at 001: flips of the two zero bits change the value
    const auto maj3 = BooleanFunction::majority(3);
    CHECK(sensitivity_at(maj3, 0b001) == 2);
}

TEST_CASE("average sensitivity, exactly") {
    for (int n = 1; n <= 12; ++n) {
        const Rational as = average_sensitivity(BooleanFunction::parity(n));
        CHECK(as == Rational(n, 1));
    }
    CHECK(average_sensitivity(BooleanFunction::constant(5, true)) == Rational(0, 1));
    CHECK(average_sensitivity(BooleanFunction::majority(3)) == Rational(3, 2));
}

TEST_CASE("sensitive edges and the factor-two identity") {
    for (int n = 1; n <= 10; ++n)
        CHECK(sensitive_edge_count(BooleanFunction::parity(n)) ==
              uint64_t(n) << (n - 1));
    CHECK(sensitive_edge_count(BooleanFunction::constant(6, false)) == 0);
    CHECK(sensitive_edge_count(BooleanFunction::majority(3)) == 6);

    std::mt19937_64 rng(44);
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + int(rng() % 9);
        std::vector<uint8_t> table(size_t(1) << n);
        for (auto& v : table) v = uint8_t(rng() & 1);
        const BooleanFunction f(n, table);
        const Rational as = average_sensitivity(f);
        CHECK(as == Rational(2 * (long long)sensitive_edge_count(f), 1LL << n));
        CHECK(as.value() >= 0.0);
        CHECK(as.value() <= double(n));
    }
}

TEST_CASE("hex packing round-trips") {
    std::mt19937_64 rng(45);
    for (int t = 0; t < 50; ++t) {
        const int n = 1 + int(rng() % 10);
        std::vector<uint8_t> table(size_t(1) << n);
        for (auto& v : table) v = uint8_t(rng() & 1);
        const BooleanFunction f(n, table);
        const BooleanFunction g = BooleanFunction::from_hex(f.to_hex());
        REQUIRE(g.arity() == n);
        for (uint64_t x = 0; x < f.inputs(); ++x) CHECK(f.value(x) == g.value(x));
    }
    CHECK(BooleanFunction::majority(3).to_hex() == "3:8e");
    CHECK_THROWS_AS(BooleanFunction::from_hex("bogus"), InvalidInputError);
}

TEST_CASE("axis-aligned hyperplane cuts") {
    // w = e1, b = 0.5 cuts exactly the direction-1 edges
    for (int n = 2; n <= 10; ++n) {
        Hyperplane h;
        h.normal.assign(size_t(n), 0.0);
        h.normal[0] = 1.0;
        h.offset = 0.5;
        CHECK(cut_edges(h, n) == uint64_t(1) << (n - 1));
        h.offset = 2.0;
        CHECK(cut_edges(h, n) == 0);
        // passing through endpoints still cuts under the sign-difference rule
        h.offset = 0.0;
        CHECK(cut_edges(h, n) == uint64_t(1) << (n - 1));
    }
    Hyperplane degenerate;
    degenerate.normal = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(cut_edges(degenerate, 3), InvalidInputError);
}

TEST_CASE("every axis direction cuts half the edge budget at its midplane") {
    const int n = 6;
    for (int k = 0; k < n; ++k) {
        Hyperplane h;
        h.normal.assign(size_t(n), 0.0);
        h.normal[size_t(k)] = 1.0;
        h.offset = 0.5;
        CHECK(cut_edges(h, n) == uint64_t(1) << (n - 1));
    }
}

TEST_CASE("random hyperplane cut ratios stay near the sqrt(n) scale") {
    std::mt19937_64 rng(46);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = 0;
    for (int n : {8, 10, 12}) {
        for (int t = 0; t < 60; ++t) {
            Hyperplane h;
            h.normal.assign(size_t(n), 0.0);
            double norm = 0;
            for (auto& w : h.normal) {
                w = gauss(rng);
                norm += w * w;
            }
            norm = std::sqrt(norm);
            for (auto& w : h.normal) w /= norm;
            h.offset = gauss(rng) * std::sqrt(double(n)) / 2.0;
            const double ratio =
                double(cut_edges(h, n)) / (std::sqrt(double(n)) * std::pow(2.0, n));
            worst = std::max(worst, ratio);
        }
    }
    CHECK(worst <= 1.0);
    CHECK(worst > 0.05);
}

TEST_CASE("affine decomposition: uniform attention gives l0 = n") {
    RandomModelSpec spec;
    spec.dim = 3;
    spec.max_len = 8;
    auto m = random_transformer_model<double>(spec, 47);
    for (auto& q : m.layers[0].query[0].data()) q = 0.0;  // all logits vanish
    const auto dec = affine_decompose(m, 8, 0);
    for (uint64_t x = 0; x < (1u << 7); ++x) {
        std::vector<int> bits = bits_from_index(x, 7);
        CHECK(dec.evaluate(bits)[0] == 8.0);
    }
}

TEST_CASE("affine decomposition reconstructs the engine state") {
    std::mt19937_64 rng(48);
    for (int trial = 0; trial < 6; ++trial) {
        RandomModelSpec spec;
        spec.dim = 3 + int(rng() % 2);
        spec.max_len = 8;
        auto m = random_transformer_model<double>(spec, rng());
        const int n = 8;
        for (int last_bit : {0, 1}) {
            const auto dec = affine_decompose(m, n, last_bit);
            for (uint64_t x = 0; x < (1u << (n - 1)); ++x) {
                std::vector<int> bits = bits_from_index(x, n - 1);
                const Vec<double> l = dec.evaluate(bits);
                CHECK(l[0] > 0.0);
                const Vec<double> gamma = dec.reconstruct(bits);
                bits.push_back(last_bit);
                const auto toks = tokens_from_bits(m, bits);
                const auto states = embed_sequence(m, toks);
                const Vec<double> engine = pre_ffn_state(m.layers[0], states, n - 1, m.masking);
                for (size_t c = 0; c < engine.size(); ++c) {
                    const double scale =
                        std::max({std::fabs(engine[c]), std::fabs(gamma[c]), 1e-12});
                    CHECK(std::fabs(engine[c] - gamma[c]) / scale <= 1e-10);
                }
            }
        }
    }
}

TEST_CASE("affine decomposition rejects other shapes") {
    RandomModelSpec spec;
    spec.layers = 2;
    auto m2 = random_transformer_model<double>(spec, 50);
    CHECK_THROWS_AS(affine_decompose(m2, 6, 0), DimensionError);
    spec.layers = 1;
    spec.heads = 2;
    auto mh = random_transformer_model<double>(spec, 51);
    CHECK_THROWS_AS(affine_decompose(mh, 6, 0), DimensionError);
}

TEST_CASE("sensitivity sweep is seeded and reports its controls") {
    SweepConfig cfg;
    cfg.trials = 15;
    cfg.lengths = {6, 8};
    cfg.seed = 2024;
    auto mj = build_majority_model<double>();
    const SweepReport a = sensitivity_sweep<double>(cfg, &mj);
    const SweepReport b = sensitivity_sweep<double>(cfg, &mj);
    CHECK(a.evaluated == b.evaluated);
    CHECK(a.max_ratio == b.max_ratio);
    CHECK(a.evaluated + a.skipped_non_boolean == int(cfg.lengths.size()) * cfg.trials);

    // parity control sits exactly at sqrt(n)
    for (const auto& [n, r] : a.parity_control) CHECK(r == std::sqrt(double(n)));

    // majority ratios agree with the exact formula and live in [0.6, 1.0]
    REQUIRE(a.majority_ratios.size() == 7);
    for (const auto& [n, r] : a.majority_ratios) {
        const double exact = majority_average_sensitivity_exact(n).value() / std::sqrt(double(n));
        CHECK_THAT(r, Catch::Matchers::WithinRel(exact, 1e-12));
        CHECK(r >= 0.6);
        CHECK(r <= 1.0);
    }
}

TEST_CASE("exact majority sensitivity formula matches enumeration") {
    for (int n = 3; n <= 15; n += 2) {
        const Rational exact = majority_average_sensitivity_exact(n);
        const Rational enumerated = average_sensitivity(BooleanFunction::majority(n));
        CHECK(exact == enumerated);
    }
}
