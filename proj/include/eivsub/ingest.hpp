#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "eivsub/errors.hpp"
#include "eivsub/rng.hpp"
#include "eivsub/types.hpp"

// CSV ingestion: header-row comma-separated files, replicate-column mapping
// into a ReplicatedDataset, pooled standardization, and synthetic noise
// injection for the measured-without-error protocols.

namespace eivsub {

struct ColumnSpec {
    std::string response;
    std::vector<std::string> covariates;  // ordered
    // covariate name -> replicate column names (all groups share one count)
    std::map<std::string, std::vector<std::string>> replicate_groups;
    bool standardize = false;

    void validate() const {
        if (response.empty()) throw schema_error("ColumnSpec: response column unset");
        if (covariates.empty()) throw schema_error("ColumnSpec: no covariates");
        std::set<std::string> seen;
        for (const auto& c : covariates) {
            if (c == response)
                throw schema_error("ColumnSpec: response also listed as covariate: " + c);
            if (!seen.insert(c).second)
                throw schema_error("ColumnSpec: duplicate covariate: " + c);
        }
        std::set<std::string> used;
        for (const auto& [cov, cols] : replicate_groups) {
            if (!seen.count(cov))
                throw schema_error("ColumnSpec: replicate group for unknown covariate: " + cov);
            if (cols.empty())
                throw schema_error("ColumnSpec: empty replicate group: " + cov);
            for (const auto& c : cols)
                if (!used.insert(c).second)
                    throw schema_error("ColumnSpec: column in two replicate groups: " + c);
        }
    }
};

struct LoadResult {
    ReplicatedDataset data;
    std::size_t dropped_rows = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) {
        if (!cur.empty() && cur.back() == '\r') cur.pop_back();
        out.push_back(cur);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size() && std::isfinite(out);
}

}  // namespace detail

// Loads the referenced columns; rows with any missing or unparseable
// referenced field are dropped and counted.  With standardize set, each
// covariate group (pooled over its replicate columns) and the response are
// centered and scaled to unit sample variance.
inline LoadResult load_csv(const std::string& path, const ColumnSpec& spec) {
    spec.validate();
    std::ifstream in(path);
    if (!in) throw io_error("load_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw schema_error("load_csv: empty file: " + path);
    const auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = i;

    auto find_col = [&](const std::string& name) -> std::size_t {
        auto it = col_index.find(name);
        if (it == col_index.end())
            throw schema_error("load_csv: missing column: " + name);
        return it->second;
    };

    // Column plan: per covariate, the file columns holding its replicates.
    const Index p = static_cast<Index>(spec.covariates.size());
    std::vector<std::vector<std::size_t>> cov_cols(p);
    std::size_t n_rep = 1;
    for (Index j = 0; j < p; ++j) {
        const auto& name = spec.covariates[j];
        auto git = spec.replicate_groups.find(name);
        if (git == spec.replicate_groups.end()) {
            cov_cols[j] = {find_col(name)};
        } else {
            for (const auto& c : git->second) cov_cols[j].push_back(find_col(c));
            const std::size_t jcount = cov_cols[j].size();
            if (jcount > 1) {
                if (n_rep > 1 && jcount != n_rep)
                    throw schema_error(
                        "load_csv: replicate groups must share one replicate count");
                n_rep = std::max(n_rep, jcount);
            }
        }
    }
    const std::size_t y_col = find_col(spec.response);

    LoadResult res;
    std::vector<double> ys;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        bool ok = true;
        double yv = 0.0;
        std::vector<Vector> reps(n_rep, Vector(p));
        if (y_col >= fields.size() || !detail::parse_double(fields[y_col], yv)) ok = false;
        for (Index j = 0; ok && j < p; ++j) {
            const auto& cols = cov_cols[j];
            for (std::size_t rep = 0; ok && rep < n_rep; ++rep) {
                // unreplicated covariates repeat their single column
                const std::size_t c = cols[rep < cols.size() ? rep : 0];
                double v = 0.0;
                if (c >= fields.size() || !detail::parse_double(fields[c], v)) ok = false;
                else reps[rep][j] = v;
            }
        }
        if (!ok) {
            ++res.dropped_rows;
            continue;
        }
        res.data.replicates.push_back(std::move(reps));
        ys.push_back(yv);
    }
    if (res.data.replicates.empty())
        throw empty_dataset_error("load_csv: no valid rows in " + path);
    res.data.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));

    if (spec.standardize) {
        const Index n = res.data.n();
        for (Index j = 0; j < p; ++j) {  // pooled over replicate columns
            double sum = 0.0;
            const double cnt = static_cast<double>(n) * static_cast<double>(n_rep);
            for (const auto& rec : res.data.replicates)
                for (const auto& v : rec) sum += v[j];
            const double mean = sum / cnt;
            double ss = 0.0;
            for (const auto& rec : res.data.replicates)
                for (const auto& v : rec) ss += (v[j] - mean) * (v[j] - mean);
            const double var = ss / (cnt - 1.0);
            if (!(var > 0))
                throw degenerate_column_error("load_csv: zero-variance column: " +
                                              spec.covariates[j]);
            const double sd = std::sqrt(var);
            for (auto& rec : res.data.replicates)
                for (auto& v : rec) v[j] = (v[j] - mean) / sd;
        }
        const double ymean = res.data.y.mean();
        const double yvar =
            (res.data.y.array() - ymean).square().sum() / (static_cast<double>(n) - 1.0);
        if (!(yvar > 0))
            throw degenerate_column_error("load_csv: zero-variance column: " +
                                          spec.response);
        res.data.y = (res.data.y.array() - ymean) / std::sqrt(yvar);
    }
    res.data.validate();
    return res;
}

// Flatten to record means (the W-bar design).
inline Dataset replicate_means(const ReplicatedDataset& rep) {
    rep.validate();
    return {rep.means(), rep.y};
}

// Adds N(0, sigma_u2 I) noise to the covariates only and returns the matching
// known error covariance.
inline std::pair<Dataset, ErrorCovariance> inject_error(const Dataset& data,
                                                        double sigma_u2,
                                                        std::uint64_t seed) {
    data.validate();
    if (sigma_u2 < 0) throw parameter_error("inject_error: sigma_u2 must be >= 0");
    Dataset out = data;
    if (sigma_u2 > 0) {
        auto s = rng::stream(seed, 0, rng::stage::inject);
        const double su = std::sqrt(sigma_u2);
        for (Index i = 0; i < out.n(); ++i)
            for (Index j = 0; j < out.p(); ++j) out.w(i, j) += su * s.normal();
    }
    return {std::move(out), ErrorCovariance::isotropic(sigma_u2, data.p())};
}

}  // namespace eivsub
