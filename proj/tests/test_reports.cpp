#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "attnlab/report.hpp"

using namespace attnlab;

TEST_CASE("fnv1a is stable across runs") {
    CHECK(fnv1a("") == 14695981039346656037ull);
    CHECK(fnv1a("attnlab") == fnv1a("attnlab"));
    CHECK(fnv1a("a") != fnv1a("b"));
    CHECK(hex64(0x1234abcdull) == "000000001234abcd");
}

TEST_CASE("table rendering aligns columns") {
    const std::string t = render_table({"n", "ratio"}, {{"8", "1.25"}, {"4096", "0.5"}});
    CHECK(t.find("n     ratio") == 0);
    CHECK(t.find("4096") != std::string::npos);
}

TEST_CASE("atomic writes leave no temporary behind") {
    const std::string path = "report_test_tmp.json";
    write_file_atomic(path, "{\"x\":1}\n");
    std::ifstream f(path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(content == "{\"x\":1}\n");
    std::ifstream tmp(path + ".tmp");
    CHECK(!tmp.good());
    std::remove(path.c_str());
}

TEST_CASE("report headers embed the config hash and precision") {
    const nlohmann::json cfg = {{"alpha", 0.6}, {"n_max", 64}};
    const nlohmann::json h =
        report_header("gap-scan", cfg, PrecisionConfig::double_precision(), 7, true);
    CHECK(h.at("command") == "gap-scan");
    CHECK(h.at("seed") == 7);
    CHECK(h.at("precision") == "double");
    CHECK(h.at("config_hash") == hex64(fnv1a(cfg.dump())));
}

TEST_CASE("calibration reports serialize deterministically") {
    CalibrationGrid g;
    g.alphas = {0.6};
    g.cs = {0.34};
    g.n_max = 48;
    const auto a = calibrate(g);
    const auto b = calibrate(g);
    CHECK(to_json(a).dump() == to_json(b).dump());
    const auto scan = scan_pair(0.6, 0.34, g, true);
    CHECK(!scan.table.empty());
    const nlohmann::json j = to_json(scan, true);
    CHECK(j.contains("gap_table"));
    CHECK(j.at("m") == 6);
}

TEST_CASE("lemma reports convert to JSON and tables") {
    const auto rep = check_faulhaber<double>({5}, geometric_grid(16, 256), 2);
    const nlohmann::json j = to_json(rep);
    CHECK(j.at("lemma") == "faulhaber-order-2");
    CHECK(j.at("series").size() == 1);
    const std::string table = lemma_table(rep);
    CHECK(table.find("alpha=5") != std::string::npos);
}
