#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "attnlab/asymptotics.hpp"

using namespace attnlab;

namespace {

// exact integer power sum for small cases
__int128 exact_power_sum(int alpha, long n) {
    __int128 s = 0;
    for (long i = 1; i <= n; ++i) {
        __int128 p = 1;
        for (int k = 0; k < alpha; ++k) p *= i;
        s += p;
    }
    return s;
}

}  // namespace

TEST_CASE("power sums are exact on integer exponents") {
    CHECK(power_sum<double>(10, 3) == 60074.0);
    CHECK(power_sum<double>(7.25, 1) == 1.0);
    CHECK(power_sum<double>(0, 1) == 1.0);
    for (long n : {2L, 5L, 17L, 30L}) {
        const double got = power_sum<double>(10, n);
        const double want = double((long long)exact_power_sum(10, n));
        CHECK_THAT(got, Catch::Matchers::WithinRel(want, 1e-12));
    }
    // strictly increasing in n
    double prev = 0;
    for (long n = 1; n <= 64; ++n) {
        const double s = power_sum<double>(3.5, n);
        CHECK(s > prev);
        prev = s;
    }
    CHECK_THROWS_AS(power_sum<double>(-1.0, 4), DomainError);
}

TEST_CASE("faulhaber expansion values and range gates") {
    // order 2, alpha = 10, n = 1: 1/11 + 1/2 + 10/12
    const double e = faulhaber_expansion<double>(10, 1, 2);
    CHECK_THAT(e, Catch::Matchers::WithinRel(1.0 / 11 + 0.5 + 10.0 / 12, 1e-14));
    CHECK(std::fabs(power_sum<double>(10, 1) - e) <= 1.0);  // remainder at the n^(a-2) scale

    CHECK_THROWS_AS(faulhaber_expansion<double>(3, 16, 2), DomainError);
    CHECK_THROWS_AS(faulhaber_expansion<double>(1.5, 16, 1), DomainError);
    CHECK_THROWS_AS(faulhaber_expansion<double>(-0.5, 16, 0), DomainError);
    CHECK_THROWS_AS(faulhaber_expansion<double>(101, 16, 0), DomainError);
    CHECK_THROWS_AS(faulhaber_expansion<double>(10, 16, 3), DomainError);
}

TEST_CASE("integral sandwich around the order-0 expansion") {
    for (double a : {0.0, 1.5, 10.0}) {
        for (long n : {1L, 4L, 32L, 256L}) {
            const double s = power_sum<double>(a, n);
            CHECK(faulhaber_expansion<double>(a, n, 0) <= s * (1 + 1e-12));
            CHECK(s <= faulhaber_expansion<double>(a, n + 1, 0) * (1 + 1e-12));
        }
    }
}

TEST_CASE("remainder ratios are stable on the lemma grids") {
    const auto ns = geometric_grid(16, 4096);
    const auto rep2 = check_faulhaber<double>({5, 7.5, 10}, ns, 2);
    CHECK(rep2.pass);
    for (const auto& s : rep2.series) CHECK(s.stable);

    const auto rep1 = check_faulhaber<double>({2}, ns, 1);
    CHECK(rep1.pass);

    const auto rep0 = check_faulhaber<double>({0, 3, 10}, ns, 0);
    CHECK(rep0.pass);
}

TEST_CASE("short grids are flagged") {
    const auto rep = check_faulhaber<double>({5}, {2, 4, 8}, 2);
    REQUIRE(!rep.notes.empty());
    CHECK(rep.notes[0].find("warning") != std::string::npos);
}

TEST_CASE("the stability criterion rejects growing remainder series") {
    std::vector<double> diverging;
    for (int k = 0; k < 9; ++k) diverging.push_back(std::pow(2.0, k));
    CHECK(!stable_series(diverging));
    std::vector<double> settling = {9, 5, 3, 2.2, 2.05, 2.01, 2.002, 2.0, 2.0};
    CHECK(stable_series(settling));
}

TEST_CASE("Gamma bound entries behave as the lemma states") {
    // Sigma = n gives rho = 0: relative error against the 1/n^3 scale bounded
    for (long n : geometric_grid(16, 4096)) {
        const auto e = check_gamma_bound(n, n, 0.01);
        CHECK(e.rho == 0.0);
        CHECK(e.ratio < 50.0);
        CHECK(e.gamma_over_tau > e.f_rho / 2);
        CHECK(e.gamma_over_tau < 2 * e.f_rho);
    }
    // Sigma = 1: the fitted constant varies by at most 5x across the top half
    // (measured 4.4x; the two error terms trade places near n = 1/rho)
    std::vector<double> ratios;
    for (long n : geometric_grid(16, 4096)) ratios.push_back(check_gamma_bound(1, n, 0.01).ratio);
    const size_t mid = ratios.size() / 2;
    for (size_t i = mid; i < ratios.size(); ++i) {
        CHECK(ratios[i] <= 5.0 * ratios[mid]);
        CHECK(ratios[i] >= ratios[mid] / 5.0);
    }
    const auto rep = check_gamma_bound_grid(geometric_grid(16, 4096), 0.01);
    CHECK(rep.pass);
}

TEST_CASE("W-bound constants are bounded and bounded away from zero") {
    // at fixed Sigma the scaled -W_Sigma stays on the (f''(0)/2)^2 ~ 0.014
    // scale for every n; it decays like (alpha/Sigma)^4 in absolute terms
    for (long n : geometric_grid(64, 4096)) {
        const auto e = check_W_bounds(0.01, 2, n);
        CHECK(e.w_sigma_scaled > 0.0);
        CHECK(e.w_sigma_scaled <= 0.02);
        CHECK(e.min_neg_ratio > 0.0);
    }
    // -W_Sigma -> 0 from below as Sigma grows
    double prev = 1e9;
    for (long Sigma : {1L, 2L, 4L, 8L, 16L, 32L, 64L}) {
        const auto e = check_W_bounds(0.01, Sigma, 4096);
        const double negW = e.w_sigma_scaled * std::pow(0.01 / double(Sigma), 4);
        CHECK(negW > 0.0);
        CHECK(negW < prev);
        prev = negW;
    }
    CHECK(prev < 1e-16);
    const auto rep = check_W_bounds_grid(geometric_grid(64, 4096), 0.01);
    CHECK(rep.pass);
    // the floor sits near f'(0)^2 = (100/441)^2
    CHECK(rep.series[1].top_half_max > 0.04);
}
