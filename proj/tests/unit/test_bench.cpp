#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "eivsub/bench.hpp"

using namespace eivsub;
using nlohmann::json;

namespace {
std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / ("eivsub_bench_" + stem)).string();
}

BenchConfig small_case1() {
    BenchConfig cfg;
    cfg.scenario.kind = ScenarioSpec::Kind::case1;
    cfg.scenario.n = 300;
    cfg.scenario.p = 3;
    cfg.scenario.sigma_u2 = 0.4;
    cfg.methods = {Method::FULL,  Method::UNIF,  Method::BLEV,   Method::IBOSS,
                   Method::AOpt,  Method::LOpt,  Method::UAOpt,  Method::ULOpt,
                   Method::CLEPS, Method::UCLEPS};
    cfg.r0 = 20;
    cfg.r_list = {30};
    cfg.m = 3;
    cfg.replications = 6;
    cfg.master_seed = 77;
    return cfg;
}
}  // namespace

TEST_CASE("method tags round-trip", "[bench]") {
    for (Method m : {Method::FULL, Method::UNIF, Method::BLEV, Method::IBOSS,
                     Method::AOpt, Method::LOpt, Method::UAOpt, Method::ULOpt,
                     Method::CLEPS, Method::UCLEPS})
        REQUIRE(method_from(method_name(m)) == m);
    REQUIRE_THROWS_AS(method_from("NOPE"), config_error);
}

TEST_CASE("parallel_for covers every index and propagates exceptions", "[bench]") {
    std::atomic<int> sum{0};
    detail::parallel_for(100, 4, [&](Index i) { sum += static_cast<int>(i); });
    REQUIRE(sum == 4950);
    REQUIRE_THROWS_AS(detail::parallel_for(10, 4,
                                           [&](Index i) {
                                               if (i == 5)
                                                   throw parameter_error("boom");
                                           }),
                      parameter_error);
}

TEST_CASE("bench config json: defaults and key checking", "[bench]") {
    const json base = {{"scenario", {{"kind", "case1"}, {"n", 100}, {"p", 2}}},
                       {"methods", {"UNIF"}},
                       {"r_list", {10}}};
    const auto cfg = bench_config_from_json(base);
    REQUIRE(cfg.mode == BenchMode::mse);
    REQUIRE(cfg.r0 == 500);
    REQUIRE(cfg.m == 10);
    REQUIRE(cfg.replications == 1000);
    REQUIRE(cfg.master_seed == 1);
    REQUIRE(cfg.cleps_weights == WeightScheme::bootstrap);
    REQUIRE(cfg.scenario.n == 100);

    json bad = base;
    bad["typo_key"] = 1;
    REQUIRE_THROWS_WITH(bench_config_from_json(bad),
                        Catch::Matchers::ContainsSubstring("typo_key"));

    bad = base;
    bad["scenario"]["frobnicate"] = true;
    REQUIRE_THROWS_AS(bench_config_from_json(bad), schema_error);

    bad = base;
    bad["methods"] = {"UNIF", "WAT"};
    REQUIRE_THROWS_AS(bench_config_from_json(bad), config_error);

    bad = base;
    bad["mode"] = "speed";
    REQUIRE_THROWS_AS(bench_config_from_json(bad), schema_error);

    bad = base;
    bad.erase("methods");
    REQUIRE_THROWS_AS(bench_config_from_json(bad), schema_error);

    bad = base;
    bad["r_list"] = json::array();
    REQUIRE_THROWS_AS(bench_config_from_json(bad), config_error);

    bad = base;
    bad["r_list"] = {0};
    REQUIRE_THROWS_AS(bench_config_from_json(bad), config_error);

    // csv scenarios demand path and column mapping
    bad = base;
    bad["scenario"] = {{"kind", "csv"}};
    REQUIRE_THROWS_AS(bench_config_from_json(bad), schema_error);

    bad = base;
    bad["scenario"] = {{"kind", "csv"},
                       {"path", "x.csv"},
                       {"columns",
                        {{"response", "y"}, {"covariates", {"a"}}, {"oops", 1}}}};
    REQUIRE_THROWS_AS(bench_config_from_json(bad), schema_error);
}

TEST_CASE("cell grid: FULL appears once at r=0, others expand over r_list", "[bench]") {
    BenchConfig cfg = small_case1();
    cfg.methods = {Method::FULL, Method::UNIF};
    cfg.r_list = {30, 40};
    cfg.replications = 2;
    const auto recs = run_mse_experiment(cfg, 1);
    REQUIRE(recs.size() == 3);
    REQUIRE(recs[0].method == "FULL");
    REQUIRE(recs[0].r == 0);
    REQUIRE(recs[0].r0 == 0);
    REQUIRE(recs[0].m == 0);
    REQUIRE(recs[1].method == "UNIF");
    REQUIRE(recs[1].r == 30);
    REQUIRE(recs[1].r0 == 20);
    REQUIRE(recs[2].r == 40);
    for (const auto& rec : recs) {
        REQUIRE(rec.n == 300);
        REQUIRE(rec.p == 3);
        REQUIRE(rec.failures == 0);
        REQUIRE(std::isfinite(rec.mse));
        REQUIRE(rec.mse > 0.0);
        REQUIRE(rec.log10_mse == Catch::Approx(std::log10(rec.mse)));
        REQUIRE(rec.mean_wall_time_s == 0.0);
    }

    cfg.methods = {Method::FULL, Method::FULL};
    REQUIRE_THROWS_AS(run_mse_experiment(cfg, 1), config_error);
}

TEST_CASE("mse experiment is byte-identical across thread counts", "[bench][slow]") {
    const BenchConfig cfg = small_case1();
    const auto r1 = records_to_csv(run_mse_experiment(cfg, 1));
    const auto r2 = records_to_csv(run_mse_experiment(cfg, 2));
    const auto r8 = records_to_csv(run_mse_experiment(cfg, 8));
    REQUIRE(r1 == r2);
    REQUIRE(r1 == r8);
    // CLEPS/UCLEPS rows carry the perturbation count, others don't
    const auto recs = run_mse_experiment(cfg, 2);
    for (const auto& rec : recs) {
        if (rec.method == "CLEPS" || rec.method == "UCLEPS") REQUIRE(rec.m == 3);
        else REQUIRE(rec.m == 0);
    }
}

TEST_CASE("fixed-data scenario with cached plans is thread-deterministic",
          "[bench][slow]") {
    BenchConfig cfg;
    cfg.scenario.kind = ScenarioSpec::Kind::example1;
    cfg.methods = {Method::BLEV, Method::IBOSS, Method::LOpt, Method::CLEPS};
    cfg.r0 = 20;
    cfg.r_list = {30};
    cfg.m = 2;
    cfg.replications = 5;
    cfg.master_seed = 3;
    const auto a = records_to_csv(run_mse_experiment(cfg, 1));
    const auto b = records_to_csv(run_mse_experiment(cfg, 4));
    REQUIRE(a == b);
}

TEST_CASE("deterministic failure accounting under an impossible budget", "[bench]") {
    BenchConfig cfg;
    cfg.scenario.kind = ScenarioSpec::Kind::case1;
    cfg.scenario.n = 6;
    cfg.scenario.p = 4;
    cfg.scenario.sigma_u2 = 0.0;
    cfg.methods = {Method::UNIF};
    cfg.r0 = 1;
    cfg.r_list = {1};  // budget 2 < p: every replication is singular
    cfg.replications = 4;
    const auto recs = run_mse_experiment(cfg, 1);
    REQUIRE(recs.size() == 1);
    REQUIRE(recs[0].failures == 4);
    REQUIRE(std::isnan(recs[0].mse));
    REQUIRE(std::isnan(recs[0].log10_mse));
}

TEST_CASE("csv round-trip preserves every field including NaN", "[bench]") {
    std::vector<BenchRecord> recs(2);
    recs[0] = {"UNIF", 10000, 5, 0.4, 500, 1000, 0, 0.0123456789012345678, 0.0, 2, 0.0};
    recs[0].log10_mse = std::log10(recs[0].mse);
    recs[1] = {"CLEPS", 10000, 5, 0.4, 500, 1000, 10,
               std::numeric_limits<double>::quiet_NaN(),
               std::numeric_limits<double>::quiet_NaN(), 7, 1.25e-3};
    const auto path = temp_path("roundtrip.csv");
    write_results(recs, path);

    const auto back = read_results(path);
    REQUIRE(back.size() == 2);
    REQUIRE(back[0].method == "UNIF");
    REQUIRE(back[0].mse == recs[0].mse);  // %.17g is lossless for doubles
    REQUIRE(back[0].log10_mse == recs[0].log10_mse);
    REQUIRE(back[0].failures == 2);
    REQUIRE(back[1].m == 10);
    REQUIRE(std::isnan(back[1].mse));
    REQUIRE(back[1].mean_wall_time_s == 1.25e-3);
    std::remove(path.c_str());

    // empty record list still writes the header
    const auto empty_csv = records_to_csv({});
    REQUIRE(empty_csv == std::string(kBenchHeader) + "\n");
}

TEST_CASE("read_results rejects wrong headers and malformed rows", "[bench]") {
    REQUIRE_THROWS_AS(read_results("/nonexistent/results.csv"), io_error);

    const auto path = temp_path("badheader.csv");
    {
        std::ofstream out(path);
        out << "method,n,p\nUNIF,1,2\n";
    }
    REQUIRE_THROWS_AS(read_results(path), schema_error);
    {
        std::ofstream out(path);
        out << kBenchHeader << "\nUNIF,1,2\n";
    }
    REQUIRE_THROWS_AS(read_results(path), schema_error);
    std::remove(path.c_str());
}

TEST_CASE("timing mode reports a positive median wall time", "[bench]") {
    BenchConfig cfg;
    cfg.mode = BenchMode::timing;
    cfg.scenario.kind = ScenarioSpec::Kind::case1;
    cfg.scenario.n = 400;
    cfg.scenario.p = 3;
    cfg.methods = {Method::FULL, Method::UNIF};
    cfg.r0 = 20;
    cfg.r_list = {50};
    cfg.replications = 1;
    cfg.timing_reps = 5;
    const auto recs = run_timing_experiment(cfg);
    REQUIRE(recs.size() == 2);
    for (const auto& rec : recs) {
        REQUIRE(rec.mean_wall_time_s > 0.0);
        REQUIRE(rec.failures == 0);
        REQUIRE(std::isfinite(rec.mse));
    }
}

TEST_CASE("csv scenarios: replicate means and injected error", "[bench]") {
    // replicated file: error covariance of the means is estimated / J
    const auto path = temp_path("scenario.csv");
    {
        std::ofstream out(path);
        out << "a1,a2,y\n";
        auto s = rng::stream(11, 0, rng::stage::data);
        for (int i = 0; i < 60; ++i) {
            const double x = s.normal();
            out << x + 0.5 * s.normal() << ',' << x + 0.5 * s.normal() << ','
                << x + 0.1 * s.normal() << "\n";
        }
    }
    BenchConfig cfg;
    cfg.scenario.kind = ScenarioSpec::Kind::csv;
    cfg.scenario.path = path;
    cfg.scenario.columns.response = "y";
    cfg.scenario.columns.covariates = {"a"};
    cfg.scenario.columns.replicate_groups["a"] = {"a1", "a2"};
    cfg.methods = {Method::FULL};
    cfg.r_list = {10};
    cfg.replications = 2;
    auto recs = run_mse_experiment(cfg, 1);
    REQUIRE(recs[0].n == 60);
    REQUIRE(recs[0].p == 1);
    REQUIRE(recs[0].sigma_u2 > 0.05);  // replicate-estimated, near 0.25
    REQUIRE(recs[0].sigma_u2 < 0.6);
    // FULL against the full-data target is exact
    REQUIRE(recs[0].mse == 0.0);

    // plain file with synthetic injection
    {
        std::ofstream out(path);
        out << "a,y\n";
        auto s = rng::stream(12, 0, rng::stage::data);
        for (int i = 0; i < 50; ++i) {
            const double x = s.normal();
            out << x << ',' << 2.0 * x + 0.1 * s.normal() << "\n";
        }
    }
    cfg.scenario.columns = ColumnSpec{};
    cfg.scenario.columns.response = "y";
    cfg.scenario.columns.covariates = {"a"};
    cfg.scenario.inject_sigma_u2 = 0.3;
    recs = run_mse_experiment(cfg, 1);
    REQUIRE(recs[0].sigma_u2 == 0.3);
    REQUIRE(recs[0].mse == 0.0);
    std::remove(path.c_str());
}
