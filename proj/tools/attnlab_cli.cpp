// Batch verification CLI: builds the explicit PARITY models, runs the lemma
// and sensitivity labs and writes structured reports. Every command is
// deterministic given its configuration (and seed, where one is required);
// reports embed the config hash so reruns can be diffed.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <thread>

#include "attnlab/builders.hpp"
#include "attnlab/calibration.hpp"
#include "attnlab/report.hpp"
#include "attnlab/sensitivity.hpp"
#include "attnlab/serialize.hpp"

using namespace attnlab;
using nlohmann::json;

namespace {

struct OutputOpts {
    std::string path;
    std::string format = "json";
};

void add_output_opts(CLI::App* cmd, OutputOpts& o) {
    cmd->add_option("--out", o.path, "write the report to this file (atomically)");
    cmd->add_option("--format", o.format, "report format")
        ->check(CLI::IsMember({"json", "json-style", "table"}))
        ->capture_default_str();
}

void emit(const OutputOpts& o, const json& report, const std::string& table) {
    const bool as_table = o.format == "table";
    const std::string payload = as_table ? table : report.dump(2) + "\n";
    if (!o.path.empty()) {
        write_file_atomic(o.path, payload);
        std::printf("report written to %s\n", o.path.c_str());
    } else {
        std::fputs(payload.c_str(), stdout);
    }
}

// table display only; JSON reports keep full precision
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---- verify-parity ---------------------------------------------------------

struct VerifyOpts {
    double alpha = ConstructionParams{}.alpha;
    double c = ConstructionParams{}.c;
    int M = ConstructionParams{}.M;
    int n_min = ConstructionParams{}.n_min;
    int n_max = 512;
    int samples = 10000;
    uint64_t seed = 0;
    std::string precision;  // empty: double up to 1024, ext:64 beyond
    int threads = 0;
    OutputOpts out;
};

template <class Fn>
void parallel_samples(int count, int threads, Fn&& fn) {
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

std::vector<int> seeded_bits(uint64_t seed, int n, int sample) {
    uint64_t s = splitmix64(seed ^ splitmix64(uint64_t(n) * 0x9E37u + uint64_t(sample)));
    std::vector<int> bits(size_t(n), 0);
    uint64_t word = 0;
    for (int i = 0; i < n; ++i) {
        if (i % 64 == 0) {
            s = splitmix64(s);
            word = s;
        }
        bits[size_t(i)] = int((word >> (i % 64)) & 1);
    }
    return bits;
}

template <class R>
int run_verify(const VerifyOpts& vo, const ConstructionParams& params, json& report,
               std::string& table) {
    const auto full = build_full_model<R>(params);
    const auto restr = build_restricted_model<R>(params);
    const CoordinateLayout rl = CoordinateLayout::restricted();

    json counterexamples = json::array();
    long mismatches = 0;

    // exhaustive window
    const int hi = std::min(params.n_min + 4, 14);
    json exhaustive = json::array();
    for (int n = params.n_min; n <= hi; ++n) {
        long bad = 0;
        for (uint64_t v = 0; v < (uint64_t(1) << n); ++v) {
            const auto bits = bits_from_index(v, n);
            int want = 0;
            for (int b : bits) want ^= b;
            if (forward_on_bits(full, bits) != full.token_id(want ? "1" : "0")) {
                ++bad;
                if (counterexamples.size() < 32)
                    counterexamples.push_back({{"n", n}, {"input", bits_to_string(bits)}});
            }
        }
        mismatches += bad;
        exhaustive.push_back({{"n", n}, {"inputs", uint64_t(1) << n}, {"mismatches", bad}});
    }

    // restricted slice with z margins
    double worst_margin = 0;
    long restricted_bad = 0, restricted_tested = 0;
    for (int n = params.n_min; n <= hi; ++n) {
        for (uint64_t v = 0; v < (uint64_t(1) << n); ++v) {
            const int S = __builtin_popcountll(v);
            if (S < 1 || double(S) > params.c * n) continue;
            ++restricted_tested;
            const auto bits = bits_from_index(v, n);
            const auto toks = tokens_from_bits(restr, bits);
            const double z =
                RealOps<R>::to_double(last_position_state(restr, toks)[size_t(rl.z0)]);
            const double margin = std::fabs(z - (S % 2 == 0 ? 1.0 : -1.0));
            worst_margin = std::max(worst_margin, margin);
            if (margin > 0.1 ||
                transformer_forward(restr, toks) != restr.token_id(S % 2 ? "1" : "0")) {
                ++restricted_bad;
                if (counterexamples.size() < 32)
                    counterexamples.push_back(
                        {{"n", n}, {"input", bits_to_string(bits)}, {"restricted", true}});
            }
        }
    }
    mismatches += restricted_bad;

    // sampled lengths
    json sampled = json::array();
    for (int n : {64, 128, 256, 512}) {
        if (n < params.n_min) {
            sampled.push_back({{"n", n}, {"skipped", "out of certified range (n < n_min)"}});
            continue;
        }
        if (n > vo.n_max) {
            sampled.push_back({{"n", n}, {"skipped", "beyond --n-max"}});
            continue;
        }
        std::vector<uint8_t> ok(size_t(vo.samples), 0);
        parallel_samples(vo.samples, vo.threads, [&](int i) {
            const auto bits = seeded_bits(vo.seed, n, i);
            int want = 0;
            for (int b : bits) want ^= b;
            ok[size_t(i)] = forward_on_bits(full, bits) == full.token_id(want ? "1" : "0");
        });
        long bad = 0;
        for (int i = 0; i < vo.samples; ++i) {
            if (!ok[size_t(i)]) {
                ++bad;
                if (counterexamples.size() < 32)
                    counterexamples.push_back(
                        {{"n", n}, {"input", bits_to_string(seeded_bits(vo.seed, n, i))}});
            }
        }
        mismatches += bad;
        sampled.push_back({{"n", n}, {"samples", vo.samples}, {"mismatches", bad}});
    }

    // gap margins for these parameters
    CalibrationGrid grid;
    grid.n_max = vo.n_max;
    const PairScan scan = scan_pair(params.alpha, params.c, grid);
    const bool gap_ok = scan.nmin_full >= 1 && scan.nmin_full <= params.n_min;

    report["exhaustive"] = exhaustive;
    report["restricted"] = {{"tested", restricted_tested},
                            {"wrong", restricted_bad},
                            {"worst_z_margin", worst_margin}};
    report["sampled"] = sampled;
    report["gap"] = to_json(scan, false);
    report["within_calibrated_range"] = params.within_calibrated_range();
    report["counterexamples"] = counterexamples;
    report["pass"] = mismatches == 0 && gap_ok;

    std::vector<std::vector<std::string>> rows;
    for (const auto& e : exhaustive)
        rows.push_back({"exhaustive", std::to_string(int(e["n"])),
                        std::to_string(uint64_t(e["inputs"])),
                        std::to_string(long(e["mismatches"]))});
    for (const auto& e : sampled) {
        if (e.contains("skipped"))
            rows.push_back({"sampled", std::to_string(int(e["n"])), e["skipped"], "-"});
        else
            rows.push_back({"sampled", std::to_string(int(e["n"])),
                            std::to_string(int(e["samples"])),
                            std::to_string(long(e["mismatches"]))});
    }
    table = render_table({"check", "n", "inputs", "mismatches"}, rows);
    table += "worst restricted z margin: " + fmt(worst_margin) + "\n";
    table += "gap: n_min=" + std::to_string(scan.nmin_full) + " g0=" + fmt(scan.g0) + "\n";
    table += std::string("result: ") + (report["pass"].get<bool>() ? "PASS" : "FAIL") + "\n";
    return report["pass"].get<bool>() ? 0 : 1;
}

int cmd_verify(VerifyOpts vo) {
    if (vo.threads <= 0) {
        vo.threads = int(std::thread::hardware_concurrency());
        if (vo.threads < 1) vo.threads = 1;
    }
    ConstructionParams params;
    params.alpha = vo.alpha;
    params.c = vo.c;
    params.M = vo.M;
    params.n_min = vo.n_min;
    params.validate();

    PrecisionConfig prec = PrecisionConfig::double_precision();
    if (!vo.precision.empty())
        prec = PrecisionConfig::parse(vo.precision);
    else if (vo.n_max > 1024)
        prec = PrecisionConfig::extended(64);  // builder default beyond 1024
    params.precision = prec;

    json config = {{"alpha", params.alpha}, {"c", params.c},       {"m", params.M},
                   {"n_min", params.n_min}, {"n_max", vo.n_max},   {"samples", vo.samples},
                   {"seed", vo.seed},       {"precision", prec.label()}};
    json report;
    report["header"] = report_header("verify-parity", config, prec, vo.seed, true);
    if (!params.within_calibrated_range())
        report["warning"] = "alpha above the calibrated maximum; expect failures";

    std::string table;
    const int rc = with_real(prec, [&](auto tag) {
        using R = typename decltype(tag)::type;
        return run_verify<R>(vo, params, report, table);
    });
    emit(vo.out, report, table);
    return rc;
}

// ---- calibrate / gap-scan ----------------------------------------------------

int cmd_calibrate(std::vector<double> alphas, std::vector<double> cs, int n_max,
                  const OutputOpts& out) {
    CalibrationGrid grid;
    if (!alphas.empty()) grid.alphas = std::move(alphas);
    if (!cs.empty()) grid.cs = std::move(cs);
    grid.n_max = n_max;

    const CalibrationReport rep = calibrate(grid);
    json config = {{"alphas", grid.alphas}, {"cs", grid.cs}, {"n_max", grid.n_max}};
    json report;
    report["header"] =
        report_header("calibrate", config, PrecisionConfig::double_precision(), 0, false);
    report["calibration"] = to_json(rep);
    if (rep.feasible) {
        // per-(n, Sigma) detail for the winning pair
        const PairScan detail = scan_pair(rep.chosen.alpha, rep.chosen.c, grid, true);
        report["chosen_detail"] = to_json(detail, true);
    }

    std::vector<std::vector<std::string>> rows;
    for (const auto& p : rep.pairs)
        rows.push_back({fmt(p.alpha), fmt(p.c), std::to_string(p.M),
                        std::to_string(p.nmin_gap), std::to_string(p.nmin_full), fmt(p.g0),
                        p.negative_witness ? "yes" : "no"});
    std::string table = render_table(
        {"alpha", "c", "M", "n_min(gap)", "n_min(full)", "g0", "negative gap"}, rows);
    if (rep.feasible)
        table += "chosen: alpha=" + fmt(rep.chosen.alpha) + " c=" + fmt(rep.chosen.c) +
                 " M=" + std::to_string(rep.chosen.M) +
                 " n_min=" + std::to_string(rep.chosen.n_min) + " g0=" + fmt(rep.g0) + "\n";
    else
        table += "calibration FAILED: no feasible grid point\n";
    emit(out, report, table);
    if (!rep.feasible) std::fprintf(stderr, "calibration failed: empty feasible set\n");
    return rep.feasible ? 0 : 1;
}

int cmd_gap_scan(double alpha, double c, int n_max, int table_cap, const OutputOpts& out) {
    CalibrationGrid grid;
    grid.n_max = n_max;
    grid.table_cap = table_cap;
    const PairScan scan = scan_pair(alpha, c, grid, true);
    json config = {{"alpha", alpha}, {"c", c}, {"n_max", n_max}, {"table_cap", table_cap}};
    json report;
    report["header"] =
        report_header("gap-scan", config, PrecisionConfig::double_precision(), 0, false);
    report["scan"] = to_json(scan, true);

    std::vector<std::vector<std::string>> rows;
    for (const auto& cell : scan.table)
        rows.push_back({std::to_string(cell.n), std::to_string(cell.Sigma),
                        fmt(cell.gap_ratio), fmt(cell.z_margin),
                        cell.argmax_ok ? "yes" : "no"});
    std::string table =
        render_table({"n", "Sigma", "gap/n^6", "z margin", "argmax at Sigma"}, rows);
    table += "n_min(gap)=" + std::to_string(scan.nmin_gap) +
             " n_min(full)=" + std::to_string(scan.nmin_full) + " g0=" + fmt(scan.g0) + "\n";
    emit(out, report, table);
    return scan.nmin_full >= 1 ? 0 : 1;
}

// ---- lemmas -------------------------------------------------------------------

int cmd_lemmas(int n_max, std::vector<double> alphas, int order, double gamma_alpha,
               const OutputOpts& out) {
    if (alphas.empty()) alphas = {5.0, 7.5, 10.0};
    if (n_max < 2) throw InvalidInputError("lemmas: --n-max must be at least 2");
    const auto ns = geometric_grid(std::min<long>(16, n_max), n_max);
    const LemmaReport fa = check_faulhaber<double>(alphas, ns, order);
    const LemmaReport ga = check_gamma_bound_grid(ns, gamma_alpha);
    const LemmaReport wb = check_W_bounds_grid(geometric_grid(std::min<long>(64, n_max), n_max),
                                               gamma_alpha);

    json config = {{"n_max", n_max}, {"alphas", alphas}, {"order", order},
                   {"gamma_alpha", gamma_alpha}};
    json report;
    report["header"] =
        report_header("lemmas", config, PrecisionConfig::double_precision(), 0, false);
    report["faulhaber"] = to_json(fa);
    report["gamma_bound"] = to_json(ga);
    report["w_bounds"] = to_json(wb);
    const bool pass = fa.pass && ga.pass && wb.pass;
    report["pass"] = pass;

    std::string table = lemma_table(fa) + "\n" + lemma_table(ga) + "\n" + lemma_table(wb);
    for (const auto* r : {&fa, &ga, &wb})
        for (const auto& note : r->notes) table += "note: " + note + "\n";
    table += std::string("result: ") + (pass ? "PASS" : "FAIL") + "\n";
    emit(out, report, table);
    return pass ? 0 : 1;
}

// ---- sensitivity ----------------------------------------------------------------

int cmd_sensitivity(int trials, int dim, std::vector<int> lengths, int planes, uint64_t seed,
                    const std::vector<std::string>& tables, const OutputOpts& out) {
    if (lengths.empty()) lengths = {6, 7, 8, 9, 10, 11, 12};
    bool pass = true;

    json parity_as = json::array();
    for (int n = 1; n <= 12; ++n) {
        const Rational as = average_sensitivity(BooleanFunction::parity(n));
        pass = pass && as == Rational(n, 1);
        parity_as.push_back({{"n", n}, {"as", std::to_string(as.num) + "/" + std::to_string(as.den)}});
    }

    // user-supplied hex-packed truth tables
    json imported = json::array();
    for (const std::string& hex : tables) {
        const BooleanFunction f = BooleanFunction::from_hex(hex);
        const Rational as = average_sensitivity(f);
        imported.push_back({{"table", f.to_hex()},
                            {"arity", f.arity()},
                            {"as", std::to_string(as.num) + "/" + std::to_string(as.den)},
                            {"sensitive_edges", sensitive_edge_count(f)},
                            {"ratio", as.value() / std::sqrt(double(f.arity()))}});
    }

    SweepConfig cfg;
    cfg.trials = trials;
    cfg.lengths = lengths;
    cfg.dim = dim;
    cfg.seed = seed;
    auto mj = build_majority_model<double>();
    const SweepReport sweep = sensitivity_sweep<double>(cfg, &mj);
    for (const auto& [n, r] : sweep.majority_ratios) pass = pass && r >= 0.6 && r <= 1.0;

    json cuts = json::array();
    double worst_cut = 0;
    for (int n = 8; n <= 16; ++n) {
        const double r = sample_edge_cut_ratio(n, planes, seed);
        worst_cut = std::max(worst_cut, r);
        cuts.push_back({{"n", n}, {"planes", planes}, {"max_ratio", r}});
    }
    pass = pass && worst_cut <= 1.0;

    json config = {{"trials", trials}, {"dim", dim},   {"lengths", lengths},
                   {"planes", planes}, {"seed", seed}};
    json report;
    report["header"] =
        report_header("sensitivity", config, PrecisionConfig::double_precision(), seed, true);
    report["parity_average_sensitivity"] = parity_as;
    if (!imported.empty()) report["imported_tables"] = imported;
    report["sweep"] = to_json(sweep);
    report["edge_cuts"] = cuts;
    report["edge_cut_bound"] = 1.0;
    report["pass"] = pass;

    std::vector<std::vector<std::string>> rows;
    for (const auto& [n, r] : sweep.per_n_max_ratio)
        rows.push_back({"sweep max as/sqrt(n)", std::to_string(n), fmt(r)});
    for (const auto& [n, r] : sweep.majority_ratios)
        rows.push_back({"majority as/sqrt(n)", std::to_string(n), fmt(r)});
    for (const auto& e : cuts)
        rows.push_back({"edge-cut max ratio", std::to_string(int(e["n"])),
                        fmt(double(e["max_ratio"]))});
    std::string table = render_table({"series", "n", "value"}, rows);
    table += "sweep max ratio: " + fmt(sweep.max_ratio) +
             " (flagged entries: " + std::to_string(sweep.flagged.size()) + ")\n";
    table += std::string("result: ") + (pass ? "PASS" : "FAIL") + "\n";
    emit(out, report, table);
    return pass ? 0 : 1;
}

// ---- export-model -----------------------------------------------------------

int cmd_export_model(const std::string& kind, const ConstructionParams& params,
                     const std::string& masking, const std::string& path) {
    const Masking m = masking_from_name(masking);
    const json j = with_real(params.precision, [&](auto tag) {
        using R = typename decltype(tag)::type;
        if (kind == "restricted") return model_to_json(build_restricted_model<R>(params, m));
        if (kind == "full") return model_to_json(build_full_model<R>(params, m));
        return model_to_json(build_majority_model<R>(m, params.precision));
    });
    write_file_atomic(path, j.dump(2) + "\n");
    std::printf("%s model written to %s (dim %d)\n", kind.c_str(), path.c_str(),
                j.at("dim").get<int>());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"explicit PARITY transformers: builders, labs and verification runs"};
    app.require_subcommand(1);
    app.set_config("--config");

    // verify-parity
    VerifyOpts vo;
    auto* verify = app.add_subcommand("verify-parity",
                                      "check the built models against XOR, exhaustively at "
                                      "small n and on seeded samples at large n");
    verify->add_option("--alpha", vo.alpha, "off-bit attention weight scale")
        ->capture_default_str();
    verify->add_option("--c", vo.c, "certified popcount fraction")->capture_default_str();
    verify->add_option("--M", vo.M, "split count (even, > 2/c)")->capture_default_str();
    verify->add_option("--n-min", vo.n_min, "certified minimum length")->capture_default_str();
    verify->add_option("--n-max", vo.n_max, "largest sampled length")->capture_default_str();
    verify->add_option("--samples", vo.samples, "random inputs per sampled length")
        ->capture_default_str();
    verify->add_option("--seed", vo.seed, "sampling seed")->required();
    verify->add_option("--precision", vo.precision,
                       "double or ext:<bits> (default: double up to n-max 1024, then ext:64)");
    verify->add_option("--threads", vo.threads, "worker threads (0 = hardware)")
        ->capture_default_str();
    add_output_opts(verify, vo.out);

    // calibrate
    std::vector<double> cal_alphas, cal_cs;
    int cal_nmax = 512;
    OutputOpts cal_out;
    auto* cal = app.add_subcommand("calibrate", "grid-search alpha and c for the largest margin");
    cal->add_option("--alphas", cal_alphas, "alpha grid")->delimiter(',');
    cal->add_option("--cs", cal_cs, "c grid")->delimiter(',');
    cal->add_option("--n-max", cal_nmax, "largest certified length")->capture_default_str();
    add_output_opts(cal, cal_out);

    // gap-scan
    double gs_alpha = ConstructionParams{}.alpha, gs_c = ConstructionParams{}.c;
    int gs_nmax = 512, gs_cap = 64;
    OutputOpts gs_out;
    auto* gs = app.add_subcommand("gap-scan", "per-(n, Sigma) gap table for one (alpha, c)");
    gs->add_option("--alpha", gs_alpha)->capture_default_str();
    gs->add_option("--c", gs_c)->capture_default_str();
    gs->add_option("--n-max", gs_nmax)->capture_default_str();
    gs->add_option("--table-cap", gs_cap, "emit per-(n, Sigma) cells up to this n")
        ->capture_default_str();
    add_output_opts(gs, gs_out);

    // lemmas
    int lm_nmax = 4096, lm_order = 2;
    std::vector<double> lm_alphas;
    double lm_galpha = 0.01;
    OutputOpts lm_out;
    auto* lm = app.add_subcommand("lemmas", "power-sum, Gamma-bound and W-bound checks");
    lm->add_option("--n-max", lm_nmax)->capture_default_str();
    lm->add_option("--alphas", lm_alphas, "faulhaber exponents (default 5,7.5,10)")
        ->delimiter(',');
    lm->add_option("--order", lm_order, "expansion order 0, 1 or 2")->capture_default_str();
    lm->add_option("--gamma-alpha", lm_galpha, "alpha for the Gamma/W checks")
        ->capture_default_str();
    add_output_opts(lm, lm_out);

    // sensitivity
    int sn_trials = 200, sn_dim = 4, sn_planes = 1000;
    std::vector<int> sn_lengths;
    std::vector<std::string> sn_tables;
    uint64_t sn_seed = 0;
    OutputOpts sn_out;
    auto* sn = app.add_subcommand("sensitivity",
                                  "average-sensitivity suite: exact values, random sweep, "
                                  "hyperplane edge cuts");
    sn->add_option("--trials", sn_trials)->capture_default_str();
    sn->add_option("--dim", sn_dim)->capture_default_str();
    sn->add_option("--lengths", sn_lengths, "sweep lengths (default 6..12)")->delimiter(',');
    sn->add_option("--planes", sn_planes, "random hyperplanes per n")->capture_default_str();
    sn->add_option("--seed", sn_seed, "sweep seed")->required();
    sn->add_option("--table", sn_tables,
                   "hex-packed truth table n:digits to analyze (repeatable)");
    add_output_opts(sn, sn_out);

    // export-model
    std::string xm_kind, xm_path, xm_masking = "causal", xm_precision = "double";
    ConstructionParams xm_params;
    auto* xm = app.add_subcommand("export-model", "build a model and write its JSON file");
    xm->add_option("--kind", xm_kind, "restricted | full | majority")
        ->check(CLI::IsMember({"restricted", "full", "majority"}))
        ->required();
    xm->add_option("--alpha", xm_params.alpha)->capture_default_str();
    xm->add_option("--c", xm_params.c)->capture_default_str();
    xm->add_option("--M", xm_params.M)->capture_default_str();
    xm->add_option("--n-min", xm_params.n_min)->capture_default_str();
    xm->add_option("--masking", xm_masking)->check(CLI::IsMember({"full", "causal"}))
        ->capture_default_str();
    xm->add_option("--precision", xm_precision, "double or ext:<bits>")->capture_default_str();
    xm->add_option("--out", xm_path, "output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*verify) return cmd_verify(vo);
        if (*cal) return cmd_calibrate(cal_alphas, cal_cs, cal_nmax, cal_out);
        if (*gs) return cmd_gap_scan(gs_alpha, gs_c, gs_nmax, gs_cap, gs_out);
        if (*lm) return cmd_lemmas(lm_nmax, lm_alphas, lm_order, lm_galpha, lm_out);
        if (*sn)
            return cmd_sensitivity(sn_trials, sn_dim, sn_lengths, sn_planes, sn_seed, sn_tables,
                                   sn_out);
        if (*xm) {
            xm_params.precision = PrecisionConfig::parse(xm_precision);
            xm_params.validate();
            return cmd_export_model(xm_kind, xm_params, xm_masking, xm_path);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
