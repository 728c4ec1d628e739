#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "eivsub/eiv_core.hpp"
#include "eivsub/errors.hpp"
#include "eivsub/ingest.hpp"
#include "eivsub/perturb.hpp"
#include "eivsub/rng.hpp"
#include "eivsub/sampling.hpp"
#include "eivsub/simgen.hpp"
#include "eivsub/subsample.hpp"
#include "eivsub/types.hpp"

// Monte Carlo benchmark harness: MSE and timing experiments over a method
// grid, with counter-keyed randomness so results are byte-identical for any
// thread count.

namespace eivsub {

enum class Method { FULL, UNIF, BLEV, IBOSS, AOpt, LOpt, UAOpt, ULOpt, CLEPS, UCLEPS };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::FULL: return "FULL";
        case Method::UNIF: return "UNIF";
        case Method::BLEV: return "BLEV";
        case Method::IBOSS: return "IBOSS";
        case Method::AOpt: return "A-Opt";
        case Method::LOpt: return "L-Opt";
        case Method::UAOpt: return "UA-Opt";
        case Method::ULOpt: return "UL-Opt";
        case Method::CLEPS: return "CLEPS";
        case Method::UCLEPS: return "UCLEPS";
    }
    return "?";
}

inline Method method_from(const std::string& s) {
    static const std::map<std::string, Method> lut = {
        {"FULL", Method::FULL},     {"UNIF", Method::UNIF},
        {"BLEV", Method::BLEV},     {"IBOSS", Method::IBOSS},
        {"A-Opt", Method::AOpt},    {"L-Opt", Method::LOpt},
        {"UA-Opt", Method::UAOpt},  {"UL-Opt", Method::ULOpt},
        {"CLEPS", Method::CLEPS},   {"UCLEPS", Method::UCLEPS}};
    auto it = lut.find(s);
    if (it == lut.end()) throw config_error("unknown method tag: " + s);
    return it->second;
}

enum class BenchMode { mse, timing };

struct ScenarioSpec {
    enum class Kind { case1, case2, example1, csv } kind = Kind::case1;
    // synthetic
    Index n = 10000;
    Index p = 5;
    Vector beta;  // empty -> all ones
    double sigma_u2 = 0.4;
    double noise_var = 1.0;
    TConvention t_convention = TConvention::scale_matrix;
    // csv
    std::string path;
    ColumnSpec columns;
    double inject_sigma_u2 = -1.0;  // < 0: no injection

    SimScenario sim(std::uint64_t seed) const {
        SimScenario sc;
        sc.sim_case = (kind == Kind::case2) ? SimCase::student_t3 : SimCase::normal;
        sc.n = n;
        sc.p = p;
        sc.beta_true = beta.size() ? beta : Vector::Ones(p);
        sc.sigma_u2 = sigma_u2;
        sc.noise_var = noise_var;
        sc.seed = seed;
        sc.t_convention = t_convention;
        return sc;
    }
};

struct BenchConfig {
    BenchMode mode = BenchMode::mse;
    ScenarioSpec scenario;
    std::vector<Method> methods;
    Index r0 = 500;
    std::vector<Index> r_list;
    int m = 10;
    Index replications = 1000;  // N
    std::uint64_t master_seed = 1;
    std::string output_path;
    WeightScheme cleps_weights = WeightScheme::bootstrap;
    double pi_floor = 0.0;
    bool ridge_fallback = false;
    int timing_reps = 5;

    void validate() const {
        if (methods.empty()) throw config_error("BenchConfig: methods list empty");
        if (r_list.empty()) throw config_error("BenchConfig: r_list empty");
        for (Index r : r_list)
            if (r < 1) throw config_error("BenchConfig: r_list entries must be >= 1");
        if (replications < 1) throw config_error("BenchConfig: replications must be >= 1");
        if (m < 1) throw config_error("BenchConfig: m must be >= 1");
        if (r0 < 1) throw config_error("BenchConfig: r0 must be >= 1");
    }
};

struct BenchRecord {
    std::string method;
    Index n = 0;
    Index p = 0;
    double sigma_u2 = 0.0;
    Index r0 = 0;
    Index r = 0;
    int m = 0;
    double mse = 0.0;
    double log10_mse = 0.0;
    Index failures = 0;
    double mean_wall_time_s = 0.0;
};

namespace detail {

inline void parallel_for(Index count, int threads,
                         const std::function<void(Index)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (Index i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex err_mu;
    auto worker = [&]() {
        for (;;) {
            const Index i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int k = static_cast<int>(std::min<Index>(threads, count));
    pool.reserve(k);
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct ResolvedScenario {
    Dataset fixed_data;        // real-data / example1 modes
    bool fresh_per_rep = false;  // synthetic: regenerate per replication
    ErrorCovariance sigma{Matrix(), SigmaSource::zero};
    Vector target;             // true beta (synthetic) or full-data estimate
    double sigma_u2_label = 0.0;
    SimScenario sim;           // valid when fresh_per_rep
};

inline ResolvedScenario resolve_scenario(const ScenarioSpec& spec,
                                         std::uint64_t master_seed) {
    ResolvedScenario rs;
    using Kind = ScenarioSpec::Kind;
    if (spec.kind == Kind::case1 || spec.kind == Kind::case2) {
        rs.fresh_per_rep = true;
        rs.sim = spec.sim(0);
        rs.sigma = rs.sim.error_covariance();
        rs.target = rs.sim.beta_true;
        rs.sigma_u2_label = spec.sigma_u2;
        return rs;
    }
    if (spec.kind == Kind::example1) {
        auto e = example1_scenario(rng::derive_key(master_seed, 0, rng::stage::data));
        rs.fixed_data = std::move(e.data.dataset);
        rs.sigma = std::move(e.sigma);
        rs.target = full_corrected_estimate(rs.fixed_data, rs.sigma).beta;
        rs.sigma_u2_label = rs.sigma.sigma_uu(1, 1);
        return rs;
    }
    // csv
    auto loaded = load_csv(spec.path, spec.columns);
    const bool replicated = loaded.data.total_excess() > 0;
    if (replicated) {
        // Replicate-mean design: the means carry error covariance Sigma/J.
        Index j_common = static_cast<Index>(loaded.data.replicates.front().size());
        for (const auto& rec : loaded.data.replicates)
            if (static_cast<Index>(rec.size()) != j_common)
                throw config_error(
                    "bench csv mode needs a common replicate count per record");
        const auto sig = estimate_sigma_uu(loaded.data);
        rs.fixed_data = replicate_means(loaded.data);
        rs.sigma = {sig.sigma_uu / static_cast<double>(j_common),
                    SigmaSource::estimated_from_replicates};
        rs.sigma_u2_label =
            sig.sigma_uu.trace() / static_cast<double>(sig.sigma_uu.rows());
    } else {
        Dataset flat = replicate_means(loaded.data);
        if (spec.inject_sigma_u2 >= 0) {
            auto [noisy, sig] = inject_error(
                flat, spec.inject_sigma_u2,
                rng::derive_key(master_seed, 0, rng::stage::inject));
            rs.fixed_data = std::move(noisy);
            rs.sigma = std::move(sig);
            rs.sigma_u2_label = spec.inject_sigma_u2;
        } else {
            rs.fixed_data = std::move(flat);
            rs.sigma = ErrorCovariance::zero(rs.fixed_data.p());
            rs.sigma_u2_label = 0.0;
        }
    }
    rs.target = full_corrected_estimate(rs.fixed_data, rs.sigma).beta;
    return rs;
}

struct Cell {
    Method method;
    Index r = 0;  // 0 for FULL
};

inline std::vector<Cell> build_cells(const BenchConfig& cfg) {
    std::vector<Cell> cells;
    bool full_added = false;
    for (Method m : cfg.methods) {
        if (m == Method::FULL) {
            if (full_added) throw config_error("BenchConfig: duplicate FULL method");
            cells.push_back({m, 0});
            full_added = true;
            continue;
        }
        for (Index r : cfg.r_list) cells.push_back({m, r});
    }
    return cells;
}

// Data-independent plans (for fixed-data runs these are computed once).
struct PlanCache {
    std::map<Index, std::vector<Index>> iboss;  // keyed by subset size
    std::optional<SamplingPlan> blev_plan;
};

inline Vector run_method_once(Method mth, const Dataset& data,
                              const ErrorCovariance& sigma, Index r0, Index r, int m,
                              const BenchConfig& cfg, std::uint64_t cell_seed,
                              PlanCache* cache) {
    const Index budget = r0 + r;
    switch (mth) {
        case Method::FULL:
            return full_corrected_estimate(data, sigma, {cfg.ridge_fallback}).beta;
        case Method::UNIF: {
            auto s = rng::stream(cell_seed, 0, rng::stage::draw);
            const auto sub = draw_with_replacement(uniform_probs(data.n()), budget, s);
            return weighted_corrected_estimate(sub, data, sigma, {cfg.ridge_fallback})
                .beta;
        }
        case Method::BLEV: {
            const SamplingPlan* plan = nullptr;
            SamplingPlan local;
            if (cache) {
                if (!cache->blev_plan) cache->blev_plan = leverage_probs(data);
                plan = &*cache->blev_plan;
            } else {
                local = leverage_probs(data);
                plan = &local;
            }
            auto s = rng::stream(cell_seed, 0, rng::stage::draw);
            const auto sub = draw_with_replacement(*plan, budget, s);
            return weighted_corrected_estimate(sub, data, sigma, {cfg.ridge_fallback})
                .beta;
        }
        case Method::IBOSS: {
            const std::vector<Index>* idx = nullptr;
            std::vector<Index> local;
            if (cache) {
                auto it = cache->iboss.find(budget);
                if (it == cache->iboss.end())
                    it = cache->iboss
                             .emplace(budget, iboss_select(data, budget).indices)
                             .first;
                idx = &it->second;
            } else {
                local = iboss_select(data, budget).indices;
                idx = &local;
            }
            Dataset sub;
            sub.w.resize(static_cast<Index>(idx->size()), data.p());
            sub.y.resize(static_cast<Index>(idx->size()));
            for (Index t = 0; t < static_cast<Index>(idx->size()); ++t) {
                sub.w.row(t) = data.w.row((*idx)[t]);
                sub.y[t] = data.y[(*idx)[t]];
            }
            return full_corrected_estimate(sub, sigma, {cfg.ridge_fallback}).beta;
        }
        case Method::AOpt:
        case Method::LOpt: {
            const auto crit = (mth == Method::AOpt) ? Design::mV : Design::mVc;
            return two_step_estimate(data, sigma, r0, r, crit, cell_seed,
                                     {cfg.pi_floor, cfg.ridge_fallback})
                .beta;
        }
        case Method::UAOpt:
        case Method::ULOpt: {
            const auto crit = (mth == Method::UAOpt) ? Design::mV : Design::mVc;
            return two_step_estimate(data, ErrorCovariance::zero(data.p()), r0, r, crit,
                                     cell_seed, {cfg.pi_floor, cfg.ridge_fallback})
                .beta;
        }
        case Method::CLEPS:
        case Method::UCLEPS: {
            const Index r_eff = std::min(budget, data.n());
            const auto& sig = (mth == Method::CLEPS)
                                  ? sigma
                                  : ErrorCovariance::zero(data.p());
            return cleps_estimate(data, sig, r_eff, m, cell_seed,
                                  {cfg.cleps_weights, cfg.ridge_fallback})
                .beta_mean;
        }
    }
    throw config_error("unhandled method");
}

}  // namespace detail

// N replications per (method, r) cell.  Synthetic scenarios draw fresh data
// per replication (shared across cells at the same replication id); file
// scenarios keep the data fixed and refresh only the subsampling randomness.
// The per-cell MSE is Kahan-summed in replication order.
inline std::vector<BenchRecord> run_mse_experiment(
    const BenchConfig& cfg, int threads = static_cast<int>(std::thread::hardware_concurrency())) {
    cfg.validate();
    const auto rs = detail::resolve_scenario(cfg.scenario, cfg.master_seed);
    const auto cells = detail::build_cells(cfg);
    const Index n_cells = static_cast<Index>(cells.size());
    const Index big_n = cfg.replications;

    std::vector<std::vector<double>> err(n_cells, std::vector<double>(big_n, 0.0));
    std::vector<std::vector<std::uint8_t>> fail(n_cells,
                                                std::vector<std::uint8_t>(big_n, 0));

    detail::PlanCache cache;
    detail::PlanCache* cache_ptr = rs.fresh_per_rep ? nullptr : &cache;
    if (cache_ptr) {  // warm the cache single-threaded for determinism
        for (Index c = 0; c < n_cells; ++c) {
            if (cells[c].method == Method::BLEV && !cache.blev_plan)
                cache.blev_plan = leverage_probs(rs.fixed_data);
            if (cells[c].method == Method::IBOSS) {
                const Index budget = cfg.r0 + cells[c].r;
                if (!cache.iboss.count(budget))
                    cache.iboss.emplace(budget,
                                        iboss_select(rs.fixed_data, budget).indices);
            }
        }
    }

    detail::parallel_for(big_n, threads, [&](Index rep) {
        Dataset local;
        const Dataset* data = &rs.fixed_data;
        if (rs.fresh_per_rep) {
            SimScenario sc = rs.sim;
            sc.seed = rng::derive_key(cfg.master_seed, rep, rng::stage::data);
            local = generate_dataset(sc);
            data = &local;
        }
        for (Index c = 0; c < n_cells; ++c) {
            const std::uint64_t cell_seed = rng::derive_key(
                cfg.master_seed, rep, rng::stage::bench_cell(c, 0));
            try {
                const Vector beta = detail::run_method_once(
                    cells[c].method, *data, rs.sigma, cfg.r0, cells[c].r, cfg.m, cfg,
                    cell_seed, cache_ptr);
                err[c][rep] = (beta - rs.target).squaredNorm();
            } catch (const numeric_error&) {
                fail[c][rep] = 1;
            }
        }
    });

    std::vector<BenchRecord> records;
    records.reserve(n_cells);
    for (Index c = 0; c < n_cells; ++c) {
        BenchRecord rec;
        rec.method = method_name(cells[c].method);
        rec.n = rs.fresh_per_rep ? rs.sim.n : rs.fixed_data.n();
        rec.p = rs.fresh_per_rep ? rs.sim.p : rs.fixed_data.p();
        rec.sigma_u2 = rs.sigma_u2_label;
        rec.r0 = cells[c].method == Method::FULL ? 0 : cfg.r0;
        rec.r = cells[c].r;
        rec.m = (cells[c].method == Method::CLEPS || cells[c].method == Method::UCLEPS)
                    ? cfg.m
                    : 0;
        linalg::KahanAccumulator acc;
        Index failures = 0;
        for (Index rep = 0; rep < big_n; ++rep) {
            if (fail[c][rep]) ++failures;
            else acc.add(err[c][rep]);
        }
        rec.failures = failures;
        const Index ok = big_n - failures;
        rec.mse = ok > 0 ? acc.value() / static_cast<double>(ok)
                         : std::numeric_limits<double>::quiet_NaN();
        rec.log10_mse = std::log10(rec.mse);
        rec.mean_wall_time_s = 0.0;  // timing is reported by the timing mode only
        records.push_back(std::move(rec));
    }
    return records;
}

// Wall-clock per method around the method call only (data generation and
// loading excluded); >= 5 repeats per cell, median reported.
inline std::vector<BenchRecord> run_timing_experiment(const BenchConfig& cfg, int = 1) {
    cfg.validate();
    const auto rs = detail::resolve_scenario(cfg.scenario, cfg.master_seed);
    Dataset generated;
    const Dataset* data = &rs.fixed_data;
    if (rs.fresh_per_rep) {
        SimScenario sc = rs.sim;
        sc.seed = rng::derive_key(cfg.master_seed, 0, rng::stage::data);
        generated = generate_dataset(sc);
        data = &generated;
    }
    const auto cells = detail::build_cells(cfg);
    const int reps = std::max(5, cfg.timing_reps);

    std::vector<BenchRecord> records;
    for (Index c = 0; c < static_cast<Index>(cells.size()); ++c) {
        std::vector<double> wall(reps, 0.0);
        linalg::KahanAccumulator acc;
        Index failures = 0;
        for (int rep = 0; rep < reps; ++rep) {
            const std::uint64_t cell_seed = rng::derive_key(
                cfg.master_seed, static_cast<std::uint64_t>(rep),
                rng::stage::bench_cell(c, 1));
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const Vector beta = detail::run_method_once(
                    cells[c].method, *data, rs.sigma, cfg.r0, cells[c].r, cfg.m, cfg,
                    cell_seed, nullptr);
                wall[rep] =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
                acc.add((beta - rs.target).squaredNorm());
            } catch (const numeric_error&) {
                wall[rep] =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
                ++failures;
            }
        }
        std::sort(wall.begin(), wall.end());
        const double median = (reps % 2) ? wall[reps / 2]
                                         : 0.5 * (wall[reps / 2 - 1] + wall[reps / 2]);
        BenchRecord rec;
        rec.method = method_name(cells[c].method);
        rec.n = data->n();
        rec.p = data->p();
        rec.sigma_u2 = rs.sigma_u2_label;
        rec.r0 = cells[c].method == Method::FULL ? 0 : cfg.r0;
        rec.r = cells[c].r;
        rec.m = (cells[c].method == Method::CLEPS || cells[c].method == Method::UCLEPS)
                    ? cfg.m
                    : 0;
        rec.failures = failures;
        const Index ok = reps - failures;
        rec.mse = ok > 0 ? acc.value() / static_cast<double>(ok)
                         : std::numeric_limits<double>::quiet_NaN();
        rec.log10_mse = std::log10(rec.mse);
        rec.mean_wall_time_s = median;
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const char* kBenchHeader =
    "method,n,p,sigma_u2,r0,r,m,mse,log10_mse,failures,mean_wall_time_s";

inline std::string records_to_csv(const std::vector<BenchRecord>& records) {
    std::ostringstream out;
    out << kBenchHeader << "\n";
    for (const auto& r : records) {
        out << r.method << ',' << r.n << ',' << r.p << ',' << format_double(r.sigma_u2)
            << ',' << r.r0 << ',' << r.r << ',' << r.m << ',' << format_double(r.mse)
            << ',' << format_double(r.log10_mse) << ',' << r.failures << ','
            << format_double(r.mean_wall_time_s) << "\n";
    }
    return out.str();
}

inline void write_results(const std::vector<BenchRecord>& records,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("write_results: cannot open " + path + " for writing");
    out << records_to_csv(records);
    if (!out) throw io_error("write_results: write failed: " + path);
}

inline std::vector<BenchRecord> read_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_results: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("read_results: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kBenchHeader) throw schema_error("read_results: unexpected header");
    std::vector<BenchRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 11) throw schema_error("read_results: bad column count");
        BenchRecord r;
        r.method = f[0];
        r.n = std::stoll(f[1]);
        r.p = std::stoll(f[2]);
        r.sigma_u2 = std::strtod(f[3].c_str(), nullptr);
        r.r0 = std::stoll(f[4]);
        r.r = std::stoll(f[5]);
        r.m = std::stoi(f[6]);
        r.mse = std::strtod(f[7].c_str(), nullptr);
        r.log10_mse = std::strtod(f[8].c_str(), nullptr);
        r.failures = std::stoll(f[9]);
        r.mean_wall_time_s = std::strtod(f[10].c_str(), nullptr);
        out.push_back(std::move(r));
    }
    return out;
}

// --- JSON configuration -----------------------------------------------------

namespace detail {

inline void check_keys(const nlohmann::json& obj,
                       std::initializer_list<const char*> allowed,
                       const std::string& ctx) {
    if (!obj.is_object()) throw schema_error(ctx + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) { ok = true; break; }
        if (!ok) throw schema_error(ctx + ": unknown key \"" + it.key() + "\"");
    }
}

inline ColumnSpec column_spec_from_json(const nlohmann::json& j) {
    check_keys(j, {"response", "covariates", "replicate_groups", "standardize"},
               "columns");
    ColumnSpec cs;
    if (!j.contains("response") || !j.contains("covariates"))
        throw schema_error("columns: need \"response\" and \"covariates\"");
    cs.response = j.at("response").get<std::string>();
    cs.covariates = j.at("covariates").get<std::vector<std::string>>();
    if (j.contains("replicate_groups"))
        cs.replicate_groups =
            j.at("replicate_groups")
                .get<std::map<std::string, std::vector<std::string>>>();
    cs.standardize = j.value("standardize", false);
    cs.validate();
    return cs;
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    check_keys(j,
               {"kind", "n", "p", "beta", "sigma_u2", "noise_var", "t_convention",
                "path", "columns", "inject_sigma_u2"},
               "scenario");
    ScenarioSpec sc;
    const std::string kind = j.value("kind", std::string("case1"));
    if (kind == "case1") sc.kind = ScenarioSpec::Kind::case1;
    else if (kind == "case2") sc.kind = ScenarioSpec::Kind::case2;
    else if (kind == "example1") sc.kind = ScenarioSpec::Kind::example1;
    else if (kind == "csv") sc.kind = ScenarioSpec::Kind::csv;
    else throw schema_error("scenario.kind must be case1|case2|example1|csv");
    sc.n = j.value<Index>("n", 10000);
    sc.p = j.value<Index>("p", 5);
    if (j.contains("beta")) {
        const auto v = j.at("beta").get<std::vector<double>>();
        sc.beta = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    }
    sc.sigma_u2 = j.value("sigma_u2", 0.4);
    sc.noise_var = j.value("noise_var", 1.0);
    const std::string tc = j.value("t_convention", std::string("scale"));
    if (tc == "scale") sc.t_convention = TConvention::scale_matrix;
    else if (tc == "covariance") sc.t_convention = TConvention::covariance_matrix;
    else throw schema_error("scenario.t_convention must be scale|covariance");
    if (sc.kind == ScenarioSpec::Kind::csv) {
        if (!j.contains("path") || !j.contains("columns"))
            throw schema_error("csv scenario needs \"path\" and \"columns\"");
        sc.path = j.at("path").get<std::string>();
        sc.columns = column_spec_from_json(j.at("columns"));
        sc.inject_sigma_u2 = j.value("inject_sigma_u2", -1.0);
    }
    return sc;
}

}  // namespace detail

inline BenchConfig bench_config_from_json(const nlohmann::json& j) {
    detail::check_keys(j,
                       {"mode", "scenario", "methods", "r0", "r_list", "m",
                        "replications", "master_seed", "output_path", "cleps_weights",
                        "pi_floor", "ridge_fallback", "timing_reps"},
                       "bench config");
    BenchConfig cfg;
    const std::string mode = j.value("mode", std::string("mse"));
    if (mode == "mse") cfg.mode = BenchMode::mse;
    else if (mode == "timing") cfg.mode = BenchMode::timing;
    else throw schema_error("mode must be mse|timing");
    if (!j.contains("scenario")) throw schema_error("bench config: missing scenario");
    cfg.scenario = detail::scenario_from_json(j.at("scenario"));
    if (!j.contains("methods")) throw schema_error("bench config: missing methods");
    for (const auto& s : j.at("methods").get<std::vector<std::string>>())
        cfg.methods.push_back(method_from(s));
    cfg.r0 = j.value<Index>("r0", 500);
    if (j.contains("r_list"))
        for (const auto& r : j.at("r_list").get<std::vector<Index>>())
            cfg.r_list.push_back(r);
    cfg.m = j.value<int>("m", 10);
    cfg.replications = j.value<Index>("replications", 1000);
    cfg.master_seed = j.value<std::uint64_t>("master_seed", 1);
    cfg.output_path = j.value("output_path", std::string());
    cfg.cleps_weights =
        weight_scheme_from(j.value("cleps_weights", std::string("bootstrap")));
    cfg.pi_floor = j.value("pi_floor", 0.0);
    cfg.ridge_fallback = j.value("ridge_fallback", false);
    cfg.timing_reps = j.value("timing_reps", 5);
    cfg.validate();
    return cfg;
}

inline nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("invalid JSON in " + path + ": " + e.what());
    }
}

}  // namespace eivsub
