// Command-line front end: estimate / probs / simulate / bench, each driven by
// a single JSON config.  Exit codes: 0 ok, 2 config/validation, 3 numeric.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eivsub/eivsub.hpp"

namespace {

using nlohmann::json;
using namespace eivsub;

void emit(const std::string& text, const std::string& output) {
    if (output.empty()) {
        std::fwrite(text.data(), 1, text.size(), stdout);
        return;
    }
    std::ofstream f(output);
    if (!f) throw io_error("cannot open output file: " + output);
    f << text;
    if (!f) throw io_error("write failed: " + output);
}

Vector vector_from_json(const json& j, const char* what) {
    const auto v = j.get<std::vector<double>>();
    if (v.empty()) throw schema_error(std::string(what) + ": empty array");
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

struct SigmaSpec {
    enum class Kind { zero, isotropic, matrix, replicates } kind = Kind::zero;
    double sigma_u2 = 0.0;
    Matrix matrix;
};

SigmaSpec sigma_spec_from_json(const json& j) {
    detail::check_keys(j, {"kind", "sigma_u2", "matrix"}, "sigma");
    SigmaSpec s;
    const std::string kind = j.value("kind", std::string("zero"));
    if (kind == "zero") s.kind = SigmaSpec::Kind::zero;
    else if (kind == "isotropic") {
        s.kind = SigmaSpec::Kind::isotropic;
        if (!j.contains("sigma_u2"))
            throw schema_error("sigma: isotropic needs \"sigma_u2\"");
        s.sigma_u2 = j.at("sigma_u2").get<double>();
        if (!(s.sigma_u2 >= 0)) throw parameter_error("sigma_u2 must be >= 0");
    } else if (kind == "matrix") {
        s.kind = SigmaSpec::Kind::matrix;
        if (!j.contains("matrix")) throw schema_error("sigma: matrix needs \"matrix\"");
        const auto rows = j.at("matrix").get<std::vector<std::vector<double>>>();
        const Index p = static_cast<Index>(rows.size());
        if (p == 0) throw schema_error("sigma.matrix: empty");
        s.matrix.resize(p, p);
        for (Index i = 0; i < p; ++i) {
            if (static_cast<Index>(rows[i].size()) != p)
                throw schema_error("sigma.matrix: must be square");
            for (Index k = 0; k < p; ++k) s.matrix(i, k) = rows[i][k];
        }
    } else if (kind == "replicates") {
        s.kind = SigmaSpec::Kind::replicates;
    } else {
        throw schema_error("sigma.kind must be zero|isotropic|matrix|replicates");
    }
    return s;
}

struct ResolvedData {
    ReplicatedDataset replicated;
    Dataset flat;               // replicate means (identity when unreplicated)
    ErrorCovariance sigma_raw{Matrix(), SigmaSource::zero};   // per measurement
    ErrorCovariance sigma_flat{Matrix(), SigmaSource::zero};  // for the means
    bool common_j = true;
    Index j_common = 1;
    std::size_t dropped = 0;
    std::vector<std::string> names;
};

ResolvedData resolve_data(const json& jdata, const json& jsigma) {
    detail::check_keys(jdata, {"path", "columns"}, "data");
    if (!jdata.contains("path") || !jdata.contains("columns"))
        throw schema_error("data: need \"path\" and \"columns\"");
    const ColumnSpec cs = detail::column_spec_from_json(jdata.at("columns"));
    auto loaded = load_csv(jdata.at("path").get<std::string>(), cs);

    ResolvedData rd;
    rd.names = cs.covariates;
    rd.dropped = loaded.dropped_rows;
    rd.replicated = std::move(loaded.data);
    rd.flat = replicate_means(rd.replicated);
    rd.j_common = static_cast<Index>(rd.replicated.replicates.front().size());
    for (const auto& rec : rd.replicated.replicates)
        if (static_cast<Index>(rec.size()) != rd.j_common) {
            rd.common_j = false;
            break;
        }

    const Index p = rd.flat.p();
    const SigmaSpec ss = sigma_spec_from_json(jsigma);
    switch (ss.kind) {
        case SigmaSpec::Kind::zero:
            rd.sigma_raw = ErrorCovariance::zero(p);
            break;
        case SigmaSpec::Kind::isotropic:
            rd.sigma_raw = ErrorCovariance::isotropic(ss.sigma_u2, p);
            break;
        case SigmaSpec::Kind::matrix:
            if (ss.matrix.rows() != p)
                throw dimension_error("sigma.matrix: dimension != number of covariates");
            rd.sigma_raw = {ss.matrix, SigmaSource::known};
            rd.sigma_raw.validate();
            break;
        case SigmaSpec::Kind::replicates:
            rd.sigma_raw = estimate_sigma_uu(rd.replicated);
            break;
    }
    if (rd.common_j) {
        rd.sigma_flat = {rd.sigma_raw.sigma_uu / static_cast<double>(rd.j_common),
                         rd.sigma_raw.source};
    }
    return rd;
}

const ErrorCovariance& flat_sigma_or_throw(const ResolvedData& rd,
                                           const std::string& method) {
    if (!rd.common_j)
        throw config_error("method \"" + method +
                           "\" needs a common replicate count per record; use "
                           "\"replicate-averaged\" for heterogeneous counts");
    return rd.sigma_flat;
}

json estimate_json(const std::vector<std::string>& names, const Vector& beta,
                   const std::optional<Vector>& se) {
    json out;
    out["coefficients"] = std::vector<double>(beta.data(), beta.data() + beta.size());
    out["names"] = names;
    if (se)
        out["standard_errors"] =
            std::vector<double>(se->data(), se->data() + se->size());
    return out;
}

std::optional<Vector> diag_se(const Matrix& cov) {
    Vector se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return se;
}

int run_estimate(const std::string& config_path, bool has_seed, std::uint64_t seed,
                 const std::string& output) {
    const json j = parse_json_file(config_path);
    detail::check_keys(j,
                       {"data", "method", "sigma", "r0", "r", "m", "cleps_weights",
                        "pi_floor", "ridge_fallback", "seed"},
                       "estimate config");
    if (!j.contains("data") || !j.contains("method"))
        throw schema_error("estimate config: need \"data\" and \"method\"");
    const std::string method = j.at("method").get<std::string>();
    const json jsigma = j.value("sigma", json::object());
    ResolvedData rd = resolve_data(j.at("data"), jsigma);

    const std::uint64_t use_seed =
        has_seed ? seed : j.value<std::uint64_t>("seed", 1);
    const double pi_floor = j.value("pi_floor", 0.0);
    const bool ridge = j.value("ridge_fallback", false);

    json out;
    out["method"] = method;
    out["n"] = rd.flat.n();
    out["p"] = rd.flat.p();
    out["dropped_rows"] = rd.dropped;
    std::vector<std::string> warnings;

    if (method == "full") {
        const auto& sig = flat_sigma_or_throw(rd, method);
        const auto est = full_corrected_estimate(rd.flat, sig, {ridge});
        const double s2 = estimate_noise_variance(rd.flat, est.beta, sig);
        const Matrix v = full_asymptotic_covariance(rd.flat, est.beta, sig, s2);
        out.update(estimate_json(rd.names, est.beta, diag_se(v)));
        out["noise_var"] = s2;
    } else if (method == "replicate-averaged") {
        const auto est = replicate_averaged_estimate(rd.replicated, rd.sigma_raw);
        std::optional<Vector> se;
        if (rd.common_j) {
            const double s2 =
                estimate_noise_variance(rd.flat, est.beta, rd.sigma_flat);
            se = diag_se(
                full_asymptotic_covariance(rd.flat, est.beta, rd.sigma_flat, s2));
        } else {
            warnings.push_back(
                "standard errors unavailable with heterogeneous replicate counts");
        }
        out.update(estimate_json(rd.names, est.beta, se));
    } else if (method == "two-step-mv" || method == "two-step-mvc") {
        const auto& sig = flat_sigma_or_throw(rd, method);
        if (!j.contains("r")) throw schema_error("estimate config: two-step needs \"r\"");
        const Index r0 = j.value<Index>("r0", 500);
        const Index r = j.at("r").get<Index>();
        const auto crit = method == "two-step-mv" ? Design::mV : Design::mVc;
        const auto ts =
            two_step_estimate(rd.flat, sig, r0, r, crit, use_seed, {pi_floor, ridge});
        out.update(estimate_json(rd.names, ts.beta, diag_se(ts.cov)));
        out["r0"] = ts.r0;
        out["r"] = ts.r;
        if (ts.cov_clipped)
            warnings.push_back("plug-in covariance was clipped to be PSD");
    } else if (method == "cleps") {
        const auto& sig = flat_sigma_or_throw(rd, method);
        if (!j.contains("r")) throw schema_error("estimate config: cleps needs \"r\"");
        const Index r = j.at("r").get<Index>();
        const int m = j.value<int>("m", 10);
        const auto scheme =
            weight_scheme_from(j.value("cleps_weights", std::string("exponential")));
        const auto res = cleps_estimate(rd.flat, sig, r, m, use_seed, {scheme, ridge});
        std::optional<Vector> se;
        if (res.cov) se = diag_se(*res.cov);
        else
            warnings.push_back(
                "standard errors unavailable with m = 1 weight replicate");
        if (res.m_guidance_warning)
            warnings.push_back(
                "m >= r/10: variance guidance suggests fewer replicates or larger r");
        out.update(estimate_json(rd.names, res.beta_mean, se));
        out["r"] = res.r;
        out["m"] = res.m;
        out["q"] = res.q;
    } else {
        throw config_error(
            "estimate method must be "
            "full|replicate-averaged|two-step-mv|two-step-mvc|cleps");
    }
    if (!warnings.empty()) out["warnings"] = warnings;
    emit(out.dump(2) + "\n", output);
    return 0;
}

int run_probs(const std::string& config_path, const std::string& output) {
    const json j = parse_json_file(config_path);
    detail::check_keys(j, {"data", "design", "sigma", "beta", "k"}, "probs config");
    if (!j.contains("data") || !j.contains("design"))
        throw schema_error("probs config: need \"data\" and \"design\"");
    const std::string design = j.at("design").get<std::string>();
    ResolvedData rd = resolve_data(j.at("data"), j.value("sigma", json::object()));

    auto pilot = [&](bool corrected) -> Vector {
        if (j.contains("beta")) {
            Vector b = vector_from_json(j.at("beta"), "beta");
            if (b.size() != rd.flat.p())
                throw dimension_error("probs config: beta dimension != p");
            return b;
        }
        const auto& sig = corrected ? flat_sigma_or_throw(rd, design)
                                    : ErrorCovariance::zero(rd.flat.p());
        return full_corrected_estimate(rd.flat, sig).beta;
    };

    SamplingPlan plan;
    if (design == "UNIF") plan = uniform_probs(rd.flat.n());
    else if (design == "BLEV") plan = leverage_probs(rd.flat);
    else if (design == "mV")
        plan = optimal_probs_mv(rd.flat, pilot(true), flat_sigma_or_throw(rd, design));
    else if (design == "mVc") plan = optimal_probs_mvc(rd.flat, pilot(true));
    else if (design == "UmV")
        plan = uncorrected_variant(Design::mV, rd.flat, pilot(false));
    else if (design == "UmVc")
        plan = uncorrected_variant(Design::mVc, rd.flat, pilot(false));
    else if (design == "IBOSS") {
        if (!j.contains("k")) throw schema_error("probs config: IBOSS needs \"k\"");
        plan = iboss_select(rd.flat, j.at("k").get<Index>());
    } else {
        throw config_error("design must be UNIF|BLEV|mV|mVc|UmV|UmVc|IBOSS");
    }

    std::string text;
    if (plan.kind == PlanKind::deterministic) {
        text = "index\n";
        for (Index i : plan.indices) text += std::to_string(i) + "\n";
    } else {
        text = "index,prob\n";
        for (Index i = 0; i < plan.probs.size(); ++i)
            text += std::to_string(i) + "," + format_double(plan.probs[i]) + "\n";
    }
    emit(text, output);
    return 0;
}

int run_simulate(const std::string& config_path, bool has_seed, std::uint64_t seed,
                 const std::string& output) {
    const json j = parse_json_file(config_path);
    detail::check_keys(j,
                       {"case", "n", "p", "beta", "sigma_u2", "noise_var", "seed",
                        "t_convention", "include_latent"},
                       "simulate config");
    const std::string kase = j.value("case", std::string("case1"));
    const bool latent = j.value("include_latent", false);
    const std::uint64_t use_seed =
        has_seed ? seed : j.value<std::uint64_t>("seed", 20260815);

    GeneratedData gen;
    if (kase == "example1") {
        gen = example1_scenario(use_seed, j.value<Index>("n", 1000),
                                j.value("sigma_u2", 0.25))
                  .data;
    } else if (kase == "case1" || kase == "case2") {
        SimScenario sc;
        sc.sim_case = kase == "case1" ? SimCase::normal : SimCase::student_t3;
        sc.n = j.value<Index>("n", 10000);
        sc.p = j.value<Index>("p", 5);
        sc.beta_true =
            j.contains("beta") ? vector_from_json(j.at("beta"), "beta")
                               : Vector::Ones(sc.p);
        sc.sigma_u2 = j.value("sigma_u2", 0.4);
        sc.noise_var = j.value("noise_var", 1.0);
        sc.seed = use_seed;
        const std::string tc = j.value("t_convention", std::string("scale"));
        if (tc == "scale") sc.t_convention = TConvention::scale_matrix;
        else if (tc == "covariance") sc.t_convention = TConvention::covariance_matrix;
        else throw schema_error("t_convention must be scale|covariance");
        gen = generate(sc);
    } else {
        throw config_error("case must be case1|case2|example1");
    }

    const Index n = gen.dataset.n(), p = gen.dataset.p();
    std::string text;
    text.reserve(static_cast<std::size_t>(n) * 24 * (latent ? 3 * p + 1 : p + 1));
    for (Index k = 0; k < p; ++k) text += "w" + std::to_string(k + 1) + ",";
    text += "y";
    if (latent) {
        for (Index k = 0; k < p; ++k) text += ",x" + std::to_string(k + 1);
        for (Index k = 0; k < p; ++k) text += ",u" + std::to_string(k + 1);
    }
    text += "\n";
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < p; ++k)
            text += format_double(gen.dataset.w(i, k)) + ",";
        text += format_double(gen.dataset.y[i]);
        if (latent) {
            for (Index k = 0; k < p; ++k)
                text += "," + format_double(gen.x_true(i, k));
            for (Index k = 0; k < p; ++k) text += "," + format_double(gen.u(i, k));
        }
        text += "\n";
    }
    emit(text, output);
    return 0;
}

int run_bench(const std::string& config_path, bool has_seed, std::uint64_t seed,
              int threads, const std::string& output) {
    BenchConfig cfg = bench_config_from_json(parse_json_file(config_path));
    if (has_seed) cfg.master_seed = seed;
    if (!output.empty()) cfg.output_path = output;
    const auto records = cfg.mode == BenchMode::mse
                             ? run_mse_experiment(cfg, threads)
                             : run_timing_experiment(cfg);
    if (cfg.output_path.empty()) {
        emit(records_to_csv(records), "");
    } else {
        write_results(records, cfg.output_path);
        std::cerr << "wrote " << records.size() << " records to " << cfg.output_path
                  << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corrected-likelihood errors-in-variables subsampling toolkit"};
    app.require_subcommand(1);

    std::string config, output;
    std::uint64_t seed = 0;
    int threads = std::max(1u, std::thread::hardware_concurrency());

    auto wire = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON config file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the RNG master seed");
        sub->add_option("--threads", threads, "worker threads")
            ->check(CLI::PositiveNumber);
        sub->add_option("--output", output, "output file (default: stdout)");
    };
    CLI::App* est = app.add_subcommand("estimate", "fit a corrected estimator");
    CLI::App* prb = app.add_subcommand("probs", "emit a subsampling plan");
    CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    CLI::App* ben = app.add_subcommand("bench", "run a Monte Carlo benchmark");
    wire(est);
    wire(prb);
    wire(sim);
    wire(ben);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (est->parsed())
            return run_estimate(config, est->count("--seed") > 0, seed, output);
        if (prb->parsed()) return run_probs(config, output);
        if (sim->parsed())
            return run_simulate(config, sim->count("--seed") > 0, seed, output);
        if (ben->parsed())
            return run_bench(config, ben->count("--seed") > 0, seed, threads, output);
    } catch (const eivsub::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
