#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "attnlab/asymptotics.hpp"
#include "attnlab/calibration.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/sensitivity.hpp"

namespace attnlab {

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
    return buf;
}

// Reports are written once, atomically: contents land under a temporary name
// and are renamed into place.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open " + tmp + " for writing");
        f.write(content.data(), std::streamsize(content.size()));
        if (!f) throw Error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("cannot rename " + tmp + " to " + path);
}

inline std::string render_table(const std::vector<std::string>& headers,
                                const std::vector<std::vector<std::string>>& rows) {
    std::vector<size_t> w(headers.size());
    for (size_t c = 0; c < headers.size(); ++c) w[c] = headers[c].size();
    for (const auto& r : rows)
        for (size_t c = 0; c < r.size() && c < w.size(); ++c) w[c] = std::max(w[c], r[c].size());
    auto line = [&](const std::vector<std::string>& r) {
        std::string s;
        for (size_t c = 0; c < w.size(); ++c) {
            std::string cell = c < r.size() ? r[c] : "";
            cell.resize(w[c], ' ');
            s += cell;
            if (c + 1 < w.size()) s += "  ";
        }
        while (!s.empty() && s.back() == ' ') s.pop_back();
        return s + "\n";
    };
    std::string out = line(headers);
    std::string rule;
    for (size_t c = 0; c < w.size(); ++c) {
        rule += std::string(w[c], '-');
        if (c + 1 < w.size()) rule += "  ";
    }
    out += rule + "\n";
    for (const auto& r : rows) out += line(r);
    return out;
}

// Common header embedded in every report: the command, its full config, a
// hash of that config, the seed and the precision mode. No timestamps; a
// rerun with identical inputs must produce identical bytes.
inline nlohmann::json report_header(const std::string& command, const nlohmann::json& config,
                                    const PrecisionConfig& precision, uint64_t seed,
                                    bool seeded) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    j["config_hash"] = hex64(fnv1a(config.dump()));
    if (seeded) j["seed"] = seed;
    j["precision"] = precision.label();
    return j;
}

// ---- JSON views of the lab reports -----------------------------------------

inline nlohmann::json to_json(const SeriesResult& s) {
    return {{"label", s.label},        {"n_grid", s.grid},
            {"ratios", s.ratios},      {"midpoint_ratio", s.midpoint_ratio},
            {"top_half_max", s.top_half_max}, {"stable", s.stable}};
}

inline nlohmann::json to_json(const LemmaReport& r) {
    nlohmann::json series = nlohmann::json::array();
    for (const auto& s : r.series) series.push_back(to_json(s));
    return {{"lemma", r.lemma}, {"series", series}, {"pass", r.pass}, {"notes", r.notes}};
}

inline std::string lemma_table(const LemmaReport& r) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : r.series)
        for (size_t i = 0; i < s.grid.size(); ++i)
            rows.push_back({r.lemma, s.label, std::to_string(s.grid[i]),
                            RealOps<double>::to_string(s.ratios[i])});
    return render_table({"lemma", "series", "n", "ratio"}, rows);
}

inline nlohmann::json to_json(const GapCell& c) {
    return {{"n", c.n},
            {"sigma", c.Sigma},
            {"gap_over_n6", c.gap_ratio},
            {"z_margin", c.z_margin},
            {"argmax_ok", c.argmax_ok}};
}

inline nlohmann::json to_json(const PairScan& p, bool with_detail) {
    nlohmann::json j;
    j["alpha"] = p.alpha;
    j["c"] = p.c;
    j["m"] = p.M;
    j["feasible"] = p.nmin_full >= 1;
    j["n_min_gap"] = p.nmin_gap;
    j["n_min_full"] = p.nmin_full;
    j["g0"] = p.g0;
    if (p.negative_witness) j["negative_gap_witness"] = to_json(*p.negative_witness);
    if (with_detail) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : p.table) cells.push_back(to_json(c));
        j["gap_table"] = cells;
        nlohmann::json per_n = nlohmann::json::array();
        for (const auto& [n, g] : p.per_n_gap) per_n.push_back({{"n", n}, {"min_gap_over_n6", g}});
        j["per_n_min_gap"] = per_n;
    }
    return j;
}

inline nlohmann::json to_json(const CalibrationReport& r) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : r.pairs) pairs.push_back(to_json(p, false));
    nlohmann::json j;
    j["grid"] = {{"alphas", r.grid.alphas},
                 {"cs", r.grid.cs},
                 {"n_start", r.grid.n_start},
                 {"n_max", r.grid.n_max},
                 {"z_tolerance", r.grid.z_tolerance}};
    j["pairs"] = pairs;
    j["feasible"] = r.feasible;
    if (r.feasible) {
        j["chosen"] = {{"alpha", r.chosen.alpha},
                       {"c", r.chosen.c},
                       {"m", r.chosen.M},
                       {"n_min", r.chosen.n_min}};
        j["g0"] = r.g0;
    }
    return j;
}

inline nlohmann::json to_json(const SweepEntry& e) {
    nlohmann::json j = {{"n", e.n},
                        {"trial", e.trial},
                        {"scale", e.scale},
                        {"avg_sensitivity", e.avg_sensitivity},
                        {"ratio", e.ratio}};
    if (!e.table.empty()) j["table"] = e.table;
    return j;
}

inline nlohmann::json to_json(const SweepReport& r) {
    nlohmann::json j;
    j["config"] = {{"trials", r.config.trials},   {"lengths", r.config.lengths},
                   {"dim", r.config.dim},         {"seed", r.config.seed},
                   {"scales", r.config.scales},   {"flag_threshold", r.config.flag_threshold},
                   {"distribution", "entries uniform on [-scale, scale]"}};
    j["evaluated"] = r.evaluated;
    j["skipped_non_boolean"] = r.skipped_non_boolean;
    j["max_ratio"] = r.max_ratio;
    if (r.max_entry) j["max_entry"] = to_json(*r.max_entry);
    nlohmann::json flagged = nlohmann::json::array();
    for (const auto& e : r.flagged) flagged.push_back(to_json(e));
    j["flagged"] = flagged;
    auto pairs = [](const std::vector<std::pair<int, double>>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& [n, x] : v) a.push_back({{"n", n}, {"ratio", x}});
        return a;
    };
    j["per_n_max_ratio"] = pairs(r.per_n_max_ratio);
    j["parity_control"] = pairs(r.parity_control);
    j["majority_ratios"] = pairs(r.majority_ratios);
    return j;
}

}  // namespace attnlab
