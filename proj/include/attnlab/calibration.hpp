#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "attnlab/constructions.hpp"

namespace attnlab {

// Smallest even integer strictly larger than 2/c.
inline int split_count_for(double c) {
    int e = int(std::floor(2.0 / c)) + 1;
    if (e % 2 != 0) ++e;
    return e;
}

struct CalibrationGrid {
    std::vector<double> alphas = {0.4, 0.5, 0.55, 0.6, 0.9};
    std::vector<double> cs = {0.34, 0.40, 0.51};
    int n_start = 4;
    int n_max = 512;
    double z_tolerance = 0.1;
    int table_cap = 64;  // emit per-(n, Sigma) cells up to this length
};

struct GapCell {
    int n = 0;
    int Sigma = 0;
    double gap_ratio = 0;  // gap / n^6
    double z_margin = 0;   // |z - (-1)^Sigma|
    bool argmax_ok = false;
};

// Scan of one (alpha, c) candidate over every length and certified popcount.
struct PairScan {
    double alpha = 0;
    double c = 0;
    int M = 0;
    int nmin_gap = -1;   // smallest n from which the gap condition holds up to n_max
    int nmin_full = -1;  // additionally satisfies the split headroom 1+ceil(n/M) <= floor(c n)
    double g0 = 0;       // min gap/n^6 over the certified range
    std::optional<GapCell> negative_witness;
    std::vector<GapCell> table;                      // detail cells, n <= table_cap
    std::vector<std::pair<int, double>> per_n_gap;   // (n, min gap ratio) for feasible n
};

inline PairScan scan_pair(double alpha, double c, const CalibrationGrid& grid,
                          bool with_table = false) {
    PairScan out;
    out.alpha = alpha;
    out.c = c;
    out.M = split_count_for(c);

    ConstructionParams p;
    p.alpha = alpha;
    p.c = c;
    p.M = out.M;
    p.n_min = 1;

    std::vector<char> feasible(size_t(grid.n_max) + 1, 0);
    std::vector<double> per_n(size_t(grid.n_max) + 1, 0);
    for (int n = grid.n_start; n <= grid.n_max; ++n) {
        const long smax = long(std::floor(c * double(n)));
        if (smax < 1) continue;
        bool ok = true;
        double worst = 0;
        bool first = true;
        const double n6 = std::pow(double(n), 6);
        for (long Sigma = 1; Sigma <= smax && ok; ++Sigma) {
            const Vec<double> logits = layer3_logits<double>(n, Sigma, p);
            long argmax = 0;
            for (long i = 1; i < n; ++i)
                if (logits[size_t(i)] > logits[size_t(argmax)]) argmax = i;
            const double gap = min_gap_at(logits, Sigma);
            // z from the same logits
            const Vec<double> w = stable_softmax(logits);
            double z = 0;
            for (long i = 1; i <= n; ++i) z += (i % 2 == 0 ? w[size_t(i - 1)] : -w[size_t(i - 1)]);
            const double target = (Sigma % 2 == 0) ? 1.0 : -1.0;
            GapCell cell{n, int(Sigma), gap / n6, std::fabs(z - target), argmax == Sigma - 1};
            if (with_table && n <= grid.table_cap) out.table.push_back(cell);
            if (!cell.argmax_ok || gap <= 0) {
                ok = false;
                if (gap <= 0 && !out.negative_witness) out.negative_witness = cell;
            }
            if (cell.z_margin > grid.z_tolerance) ok = false;
            if (first || cell.gap_ratio < worst) worst = cell.gap_ratio;
            first = false;
        }
        feasible[size_t(n)] = ok;
        per_n[size_t(n)] = worst;
    }

    int nmin = -1;
    for (int n = grid.n_max; n >= grid.n_start; --n) {
        if (feasible[size_t(n)])
            nmin = n;
        else
            break;
    }
    out.nmin_gap = nmin;
    if (nmin > 0) {
        double g0 = per_n[size_t(nmin)];
        for (int n = nmin; n <= grid.n_max; ++n) {
            g0 = std::min(g0, per_n[size_t(n)]);
            out.per_n_gap.push_back({n, per_n[size_t(n)]});
        }
        out.g0 = g0;
        // split headroom: every head's popcount 1 + ceil(n/M) must stay within
        // the certified range
        auto headroom = [&](int n) {
            return n >= out.M &&
                   1 + (n + out.M - 1) / out.M <= int(std::floor(c * double(n)));
        };
        int nf = -1;
        for (int n = grid.n_max; n >= std::max(nmin, out.M); --n) {
            if (headroom(n))
                nf = n;
            else
                break;
        }
        out.nmin_full = nf;
    }
    return out;
}

struct CalibrationReport {
    CalibrationGrid grid;
    std::vector<PairScan> pairs;
    bool feasible = false;
    int chosen_index = -1;
    ConstructionParams chosen;
    double g0 = 0;
};

// Grid search; the winner maximizes the gap margin g0, with smaller alpha and
// then smaller c breaking ties.
inline CalibrationReport calibrate(const CalibrationGrid& grid = {}) {
    CalibrationReport rep;
    rep.grid = grid;
    for (double c : grid.cs)
        for (double a : grid.alphas) rep.pairs.push_back(scan_pair(a, c, grid));

    int best = -1;
    for (int i = 0; i < int(rep.pairs.size()); ++i) {
        const PairScan& p = rep.pairs[size_t(i)];
        if (p.nmin_full < 1) continue;
        if (best < 0) {
            best = i;
            continue;
        }
        const PairScan& b = rep.pairs[size_t(best)];
        if (p.g0 > b.g0 || (p.g0 == b.g0 && (p.alpha < b.alpha ||
                                             (p.alpha == b.alpha && p.c < b.c))))
            best = i;
    }
    if (best >= 0) {
        const PairScan& p = rep.pairs[size_t(best)];
        rep.feasible = true;
        rep.chosen_index = best;
        rep.chosen.alpha = p.alpha;
        rep.chosen.c = p.c;
        rep.chosen.M = p.M;
        rep.chosen.n_min = p.nmin_full;
        rep.g0 = p.g0;
    }
    return rep;
}

}  // namespace attnlab
