#pragma once

// Test-only helpers: synthetic IPD networks and dense brute-force oracles that
// share no code with the library's factorization paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rankforge/core.hpp"
#include "rankforge/digest.hpp"
#include "rankforge/io.hpp"
#include "rankforge/stage1.hpp"
#include "rankforge/stage2.hpp"

namespace rankforge::testing {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t r, std::size_t c) { return Dense(r, std::vector<double>(c, 0.0)); }

inline Dense transpose(const Dense& a) {
    Dense t = zeros(a.empty() ? 0 : a[0].size(), a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
    return t;
}

inline Dense multiply(const Dense& a, const Dense& b) {
    Dense c = zeros(a.size(), b.empty() ? 0 : b[0].size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[k].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

inline Dense add(Dense a, const Dense& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
    return a;
}

inline Dense column(const std::vector<double>& v) {
    Dense c = zeros(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) c[i][0] = v[i];
    return c;
}

/// Gauss-Jordan inverse with partial pivoting.
inline Dense invert(Dense a) {
    const std::size_t n = a.size();
    Dense inv = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(inv[col], inv[pivot]);
        const double d = a[col][col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct StudySpec {
    std::string id;
    std::vector<int> arms;
    int per_arm = 30;
    double baseline = 0.0;
};

/// Outcome model: y = baseline_study + prognostic . x + [1, x] . psi[t] + N(0, noise_sd^2),
/// with psi[0] (treatment 1) all zeros. psi rows have length Q*+1.
struct TruthSpec {
    Dense psi;
    std::vector<double> prognostic;
    double noise_sd = 1.0;
};

inline std::vector<CovariateValue> draw_covariates(const CovariateSchema& schema, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    std::vector<CovariateValue> out;
    for (const auto& c : schema.covariates()) {
        switch (c.kind) {
            case CovariateKind::continuous: out.emplace_back(normal(rng)); break;
            case CovariateKind::binary: out.emplace_back(static_cast<double>(rng() % 2)); break;
            case CovariateKind::categorical: out.emplace_back(c.levels[rng() % c.levels.size()]); break;
        }
    }
    return out;
}

using CovariateDraw = std::function<std::vector<CovariateValue>(std::mt19937_64&)>;

inline IPDDataset simulate(const TreatmentSet& treatments, const CovariateSchema& schema,
                           const std::vector<StudySpec>& studies, const TruthSpec& truth, std::uint64_t seed,
                           Direction direction = Direction::higher_better, const CovariateDraw& draw = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, truth.noise_sd);
    IPDDataset data;
    data.treatments = treatments;
    data.schema = schema;
    data.direction = direction;
    Eigen::VectorXd x(schema.encoded_size());
    for (const auto& s : studies) {
        for (int t : s.arms) {
            for (int i = 0; i < s.per_arm; ++i) {
                IPDRecord r;
                r.study = s.id;
                r.treatment = t;
                r.covariates = draw ? draw(rng) : draw_covariates(schema, rng);
                encode_values(r.covariates, schema, x);
                double y = s.baseline;
                for (Eigen::Index q = 0; q < x.size(); ++q) {
                    if (static_cast<std::size_t>(q) < truth.prognostic.size()) y += truth.prognostic[static_cast<std::size_t>(q)] * x[q];
                }
                const auto& psi = truth.psi[static_cast<std::size_t>(t - 1)];
                y += psi[0];
                for (Eigen::Index q = 0; q < x.size(); ++q) y += psi[static_cast<std::size_t>(q) + 1] * x[q];
                r.outcome = y + noise(rng);
                data.records.push_back(std::move(r));
            }
        }
    }
    return data;
}

inline std::string to_csv(const IPDDataset& data) {
    std::ostringstream out;
    out.precision(17);
    out << "study,treatment,outcome";
    for (const auto& c : data.schema.covariates()) out << "," << c.name;
    out << "\n";
    for (const auto& r : data.records) {
        out << r.study << "," << data.treatments.label(r.treatment) << "," << r.outcome;
        for (const auto& v : r.covariates) {
            if (std::holds_alternative<double>(v)) out << "," << std::get<double>(v);
            else out << "," << std::get<std::string>(v);
        }
        out << "\n";
    }
    return out.str();
}

/// Three treatments, one binary covariate. Treatment 2 is best at x=0 and
/// treatment 3 at x=1: d(x=0) = (0, 2, 1), d(x=1) = (0, -2, 3).
inline IPDDataset sign_flip_network(std::uint64_t seed, int per_arm = 60) {
    TreatmentSet treatments({"Reference", "Alpha", "Beta"});
    CovariateSchema schema({Covariate{"marker", CovariateKind::binary, {}, "", ""}});
    TruthSpec truth;
    truth.psi = {{0.0, 0.0}, {2.0, -4.0}, {1.0, 2.0}};
    truth.prognostic = {0.5};
    truth.noise_sd = 1.0;
    std::vector<StudySpec> studies{
        {"S1", {1, 2, 3}, per_arm, 10.0},
        {"S2", {1, 2}, per_arm, 12.0},
        {"S3", {2, 3}, per_arm, 8.0},
    };
    return simulate(treatments, schema, studies, truth, seed);
}

/// Six-treatment network shaped like an antidepressant IPD analysis: outcome
/// is negated HRSD-17 (higher is better), treatment 1 is Sertraline.
inline IPDDataset demo_network(std::uint64_t seed) {
    TreatmentSet treatments({"Sertraline", "Bupropion", "Citalopram + Bupropion", "Citalopram + Buspirone",
                             "Escitalopram", "Venlafaxine"});
    CovariateSchema schema({
        Covariate{"age_c", CovariateKind::continuous, {}, "", "years minus 45"},
        Covariate{"male", CovariateKind::binary, {}, "", ""},
        Covariate{"employment", CovariateKind::categorical, {"employed", "unemployed", "other"}, "employed", ""},
        Covariate{"episodes_gt3", CovariateKind::binary, {}, "", "more than three depressive episodes"},
        Covariate{"household_c", CovariateKind::continuous, {}, "", "members minus 3"},
    });
    TruthSpec truth;
    // main, age_c, male, unemployed, other, episodes_gt3, household_c
    truth.psi = {
        {0, 0, 0, 0, 0, 0, 0},
        {0.2, 0.02, -0.8, 0.9, 0.3, 1.0, -0.3},
        {1.0, -0.01, 0.9, -1.2, -0.2, -1.0, 0.4},
        {0.6, 0.0, 0.1, 0.2, 0.0, 0.3, 0.0},
        {0.1, 0.01, 0.3, -0.8, 0.1, -0.7, 0.1},
        {0.4, 0.0, -0.6, 1.0, 0.2, 0.8, -0.4},
    };
    truth.prognostic = {-0.03, 0.5, -1.5, -0.5, -2.0, 0.2};
    truth.noise_sd = 4.0;
    std::vector<StudySpec> studies{
        {"LEVEL2", {1, 2, 3, 4, 6}, 150, -13.0},
        {"ESC-SER", {1, 5}, 150, -12.0},
        {"MULTI", {2, 5, 6}, 150, -14.0},
    };
    auto draw = [](std::mt19937_64& rng) {
        std::normal_distribution<double> age(0.0, 12.0);
        std::normal_distribution<double> household(0.0, 1.3);
        static const std::vector<std::string> jobs{"employed", "unemployed", "other"};
        std::vector<CovariateValue> v;
        v.emplace_back(std::round(age(rng)) + 0.0);
        v.emplace_back(static_cast<double>(rng() % 2));
        v.emplace_back(jobs[rng() % 3]);
        v.emplace_back(static_cast<double>(rng() % 2));
        v.emplace_back(std::round(household(rng)) + 0.0);
        return v;
    };
    return simulate(treatments, schema, studies, truth, seed, Direction::higher_better, draw);
}

inline std::string schema_config_json(const IPDDataset& data) {
    nlohmann::json doc{{"treatments", data.treatments.labels()},
                       {"direction", std::string(to_string(data.direction))},
                       {"covariates", schema_to_json(data.schema)}};
    return doc.dump(2);
}

inline CovariateSchema continuous_schema(int q) {
    std::vector<Covariate> cs;
    for (int i = 0; i < q; ++i) cs.push_back(Covariate{"x" + std::to_string(i + 1), CovariateKind::continuous, {}, "", ""});
    return CovariateSchema(cs);
}

inline IPDDataset three_arm_study(int q, int per_arm, std::uint64_t seed) {
    TruthSpec truth;
    truth.psi = {std::vector<double>(static_cast<std::size_t>(q) + 1, 0.0), {1.0}, {-0.5}};
    for (int i = 0; i < q; ++i) {
        truth.psi[1].push_back(0.3 * (i + 1));
        truth.psi[2].push_back(-0.2 * (i + 1));
        truth.prognostic.push_back(0.7);
    }
    return simulate(TreatmentSet({"A", "B", "C"}), continuous_schema(q), {{"S", {1, 2, 3}, per_arm, 5.0}}, truth, seed);
}

struct BruteForce {
    std::vector<double> delta;
    Dense cov;
};

// Explicit normal equations with contrast columns placed first:
// [ind_k, ind_k * x_1..x_Q]_k, intercept, x_1..x_Q.
inline BruteForce brute_force_fit(const std::vector<IPDRecord>& records, int q, int reference) {
    std::set<int> arms;
    for (const auto& r : records) arms.insert(r.treatment);
    std::vector<int> contrasts;
    for (int t : arms)
        if (t != reference) contrasts.push_back(t);
    const std::size_t m = contrasts.size() * static_cast<std::size_t>(q + 1);
    const std::size_t p = m + 1 + static_cast<std::size_t>(q);

    Dense x = zeros(records.size(), p);
    std::vector<double> y;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        std::vector<double> cov;
        for (const auto& v : r.covariates) cov.push_back(std::get<double>(v));
        for (std::size_t k = 0; k < contrasts.size(); ++k) {
            if (r.treatment != contrasts[k]) continue;
            x[i][k * static_cast<std::size_t>(q + 1)] = 1.0;
            for (int j = 0; j < q; ++j) x[i][k * static_cast<std::size_t>(q + 1) + 1 + static_cast<std::size_t>(j)] = cov[static_cast<std::size_t>(j)];
        }
        x[i][m] = 1.0;
        for (int j = 0; j < q; ++j) x[i][m + 1 + static_cast<std::size_t>(j)] = cov[static_cast<std::size_t>(j)];
        y.push_back(r.outcome);
    }
    const Dense xt = transpose(x);
    const Dense xtx_inv = invert(multiply(xt, x));
    const Dense beta = multiply(xtx_inv, multiply(xt, column(y)));
    double rss = 0.0;
    const Dense fitted = multiply(x, beta);
    for (std::size_t i = 0; i < y.size(); ++i) rss += (y[i] - fitted[i][0]) * (y[i] - fitted[i][0]);
    const double s2 = rss / static_cast<double>(records.size() - p);

    BruteForce out;
    out.cov = zeros(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        out.delta.push_back(beta[i][0]);
        for (std::size_t j = 0; j < m; ++j) out.cov[i][j] = s2 * xtx_inv[i][j];
    }
    return out;
}

/// Both stages on an in-memory dataset, packaged the way `fit` writes it.
inline ModelArtifact fit_artifact(const IPDDataset& data, double prior_sd = kDefaultPriorSd) {
    const auto fits = fit_all_studies(data);
    const Layout network = network_layout(data.treatments, data.schema);
    std::vector<ConsistencyDesign> designs;
    for (const auto& fit : fits) designs.push_back(build_consistency_design(fit, network));
    ModelArtifact a;
    a.treatments = data.treatments;
    a.schema = data.schema;
    a.direction = data.direction;
    a.posterior = combine(fits, designs, network, GaussianPrior::independent(network.size(), prior_sd));
    a.stage1 = fits;
    a.provenance = {"2026-01-01T00:00:00Z", sha256_hex(to_csv(data)), "test"};
    return a;
}

}  // namespace rankforge::testing
