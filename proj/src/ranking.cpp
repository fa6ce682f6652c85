#include "rankforge/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rankforge/linalg.hpp"

namespace rankforge {
namespace {

// Tie-breaking draws from a stream distinct from the one that sampled effects.
constexpr std::uint64_t kTieStream = 0x9e3779b97f4a7c15ULL;

void check_layout(const Layout& layout, const CovariateSchema& schema) {
    if (layout.coefficients != coefficient_names(schema)) {
        throw ValidationError("posterior layout does not match the covariate schema");
    }
    for (int k = 0; k < layout.n_treatments(); ++k) {
        if (layout.treatments[static_cast<std::size_t>(k)] != k + 2) {
            throw ValidationError("posterior layout must list treatments 2..G in order");
        }
    }
}

Eigen::VectorXd profile_row(const CovariateProfile& profile, const CovariateSchema& schema) {
    Eigen::VectorXd x(schema.encoded_size() + 1);
    x[0] = 1.0;
    x.tail(schema.encoded_size()) = encode_profile(profile, schema);
    return x;
}

}  // namespace

EffectSamples effects_for_profile(const PosteriorSamples& samples, const CovariateProfile& profile,
                                  const CovariateSchema& schema, Direction direction) {
    check_layout(samples.layout, schema);
    const Eigen::VectorXd x = profile_row(profile, schema);
    const int nc = samples.layout.n_coefficients();
    const int g = samples.layout.n_treatments() + 1;

    EffectSamples out;
    out.profile = profile;
    out.direction = direction;
    out.effects = Eigen::MatrixXd::Zero(samples.draws.rows(), g);
    for (int k = 0; k < g - 1; ++k) {
        out.effects.col(k + 1).noalias() = samples.draws.middleCols(k * nc, nc) * x;
    }
    return out;
}

EffectSamples sample_effects(const GaussianPosterior& posterior, const CovariateProfile& profile,
                             const CovariateSchema& schema, Direction direction, std::size_t n,
                             std::uint64_t seed) {
    if (n < 1) throw ValidationError("number of samples must be >= 1");
    check_layout(posterior.layout, schema);
    const Eigen::VectorXd x = profile_row(profile, schema);
    const int nc = posterior.layout.n_coefficients();
    const int g = posterior.layout.n_treatments() + 1;

    Eigen::MatrixXd projection = Eigen::MatrixXd::Zero(g - 1, posterior.layout.size());
    for (int k = 0; k < g - 1; ++k) projection.block(k, k * nc, 1, nc) = x.transpose();
    const Eigen::VectorXd mean = projection * posterior.mean;
    const Eigen::MatrixXd cov = symmetrized(projection * posterior.covariance * projection.transpose());
    const auto factor = cholesky_with_jitter(cov, "profile effect covariance");
    const Eigen::MatrixXd lower = factor.llt.matrixL();

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(static_cast<Eigen::Index>(n), g - 1);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(engine);

    EffectSamples out;
    out.profile = profile;
    out.direction = direction;
    out.effects.resize(static_cast<Eigen::Index>(n), g);
    out.effects.col(0).setZero();
    out.effects.rightCols(g - 1).noalias() = z * lower.transpose();
    out.effects.rightCols(g - 1).rowwise() += mean.transpose();
    return out;
}

RankSampling rank_per_sample(const EffectSamples& effects, std::uint64_t seed) {
    const Eigen::Index n = effects.effects.rows();
    const Eigen::Index g = effects.effects.cols();
    const bool higher = effects.direction == Direction::higher_better;

    RankSampling out;
    out.seed = seed;
    out.ranks.resize(n, g);
    std::mt19937_64 engine(seed ^ kTieStream);
    std::vector<int> order(static_cast<std::size_t>(g));

    for (Eigen::Index s = 0; s < n; ++s) {
        const auto row = effects.effects.row(s);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return higher ? row[a] > row[b] : row[a] < row[b]; });
        bool tied = false;
        for (std::size_t lo = 0; lo < order.size();) {
            std::size_t hi = lo + 1;
            while (hi < order.size() && row[order[hi]] == row[order[lo]]) ++hi;
            // Fisher-Yates over the tied run [lo, hi).
            for (std::size_t i = hi - 1; i > lo; --i) {
                tied = true;
                std::uniform_int_distribution<std::size_t> pick(lo, i);
                std::swap(order[i], order[pick(engine)]);
            }
            lo = hi;
        }
        if (tied) ++out.tied_samples;
        for (Eigen::Index r = 0; r < g; ++r) out.ranks(s, order[static_cast<std::size_t>(r)]) = static_cast<int>(r) + 1;
    }
    return out;
}

RankMatrix rank_probabilities(const RankSampling& ranks) {
    const Eigen::Index n = ranks.ranks.rows();
    const Eigen::Index g = ranks.ranks.cols();
    if (n < 1) throw ValidationError("rank probabilities need at least one sample");
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts =
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(g, g);
    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index t = 0; t < g; ++t) ++counts(t, ranks.ranks(s, t) - 1);
    }
    RankMatrix out;
    out.probabilities = counts.cast<double>() / static_cast<double>(n);
    out.n_samples = static_cast<std::size_t>(n);
    out.seed = ranks.seed;
    out.tie_count = ranks.tied_samples;
    return out;
}

Eigen::VectorXd sucra(const RankMatrix& rank_matrix) {
    const auto& p = rank_matrix.probabilities;
    const Eigen::Index g = p.rows();
    if (g < 2) throw ValidationError("SUCRA is undefined for fewer than 2 treatments (division by G-1)");
    Eigen::VectorXd out(g);
    for (Eigen::Index t = 0; t < g; ++t) {
        double cumulative = 0.0;
        double surface = 0.0;
        for (Eigen::Index s = 0; s < g - 1; ++s) {
            cumulative += p(t, s);
            surface += cumulative;
        }
        out[t] = surface / static_cast<double>(g - 1);
    }
    return out;
}

Eigen::VectorXd sucra_from_mean_rank(const Eigen::VectorXd& mean_rank) {
    const auto g = static_cast<double>(mean_rank.size());
    if (mean_rank.size() < 2) throw ValidationError("SUCRA is undefined for fewer than 2 treatments (division by G-1)");
    return ((g - mean_rank.array()) / (g - 1.0)).matrix();
}

Eigen::VectorXd mean_rank(const RankSampling& ranks) {
    if (ranks.ranks.rows() < 1) throw ValidationError("mean rank needs at least one sample");
    const Eigen::Matrix<std::int64_t, 1, Eigen::Dynamic> totals = ranks.ranks.cast<std::int64_t>().colwise().sum();
    return (totals.cast<double>() / static_cast<double>(ranks.ranks.rows())).transpose();
}

Eigen::VectorXd mean_rank(const RankMatrix& rank_matrix) {
    const Eigen::Index g = rank_matrix.probabilities.cols();
    const Eigen::VectorXd r = Eigen::VectorXd::LinSpaced(g, 1.0, static_cast<double>(g));
    return rank_matrix.probabilities * r;
}

Eigen::MatrixXd pairwise_beat_probabilities(const EffectSamples& effects) {
    const Eigen::Index n = effects.effects.rows();
    const Eigen::Index g = effects.effects.cols();
    const bool higher = effects.direction == Direction::higher_better;
    if (n < 1) throw ValidationError("beat probabilities need at least one sample");

    // Half-wins so that ties contribute 0.5 to each side exactly.
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> half_wins =
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(g, g);
    for (Eigen::Index s = 0; s < n; ++s) {
        const auto row = effects.effects.row(s);
        for (Eigen::Index a = 0; a < g; ++a) {
            for (Eigen::Index b = a + 1; b < g; ++b) {
                if (row[a] == row[b]) {
                    ++half_wins(a, b);
                    ++half_wins(b, a);
                } else if ((row[a] > row[b]) == higher) {
                    half_wins(a, b) += 2;
                } else {
                    half_wins(b, a) += 2;
                }
            }
        }
    }
    Eigen::MatrixXd out = half_wins.cast<double>() / (2.0 * static_cast<double>(n));
    out.diagonal().setConstant(0.5);
    return out;
}

double quantile_type7(std::vector<double>& values, double prob) {
    if (values.empty()) throw ValidationError("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw ValidationError("quantile probability must lie in [0, 1]");
    const double h = static_cast<double>(values.size() - 1) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
    const double v_lo = values[lo];
    if (lo + 1 >= values.size()) return v_lo;
    const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
    return v_lo + (h - static_cast<double>(lo)) * (v_hi - v_lo);
}

std::vector<int> HierarchyReport::order() const {
    std::vector<int> out(treatments.size());
    for (const auto& t : treatments) out[static_cast<std::size_t>(t.position - 1)] = t.index;
    return out;
}

HierarchyReport hierarchy_from_effects(const EffectSamples& effects, const TreatmentSet& treatments,
                                       std::uint64_t seed, const HierarchyOptions& options) {
    const Eigen::Index g = effects.effects.cols();
    const Eigen::Index n = effects.effects.rows();
    if (g != treatments.size()) throw ValidationError("effect samples do not match the treatment set");
    if (options.comparator < 1 || options.comparator > g) {
        throw FieldError("comparator", "comparator treatment #" + std::to_string(options.comparator) +
                                           " is not in the network");
    }
    if (!(options.ci_level > 0.0 && options.ci_level < 1.0)) {
        throw FieldError("ci_level", "credible interval level must lie in (0, 1)");
    }
    if (!effects.effects.allFinite()) throw NumericError("effect samples contain non-finite values");

    const RankSampling ranks = rank_per_sample(effects, seed);
    HierarchyReport report;
    report.rank_matrix = rank_probabilities(ranks);
    report.beat_probabilities = pairwise_beat_probabilities(effects);
    report.profile = effects.profile;
    report.direction = effects.direction;
    report.comparator = options.comparator;
    report.ci_level = options.ci_level;
    report.seed = seed;
    report.n_samples = static_cast<std::size_t>(n);

    const Eigen::VectorXd cumulative_form = sucra(report.rank_matrix);
    const Eigen::VectorXd ranks_mean = mean_rank(ranks);
    const Eigen::VectorXd mean_rank_form = sucra_from_mean_rank(ranks_mean);
    if ((cumulative_form - mean_rank_form).cwiseAbs().maxCoeff() > kSucraFormTolerance) {
        throw NumericError("SUCRA cumulative and mean-rank forms disagree beyond 1e-12");
    }

    // Selection by descending SUCRA; values within the tie tolerance keep the
    // lower treatment index first.
    std::vector<int> order;
    std::vector<bool> placed(static_cast<std::size_t>(g), false);
    for (Eigen::Index pos = 0; pos < g; ++pos) {
        int best = -1;
        for (int u = 0; u < static_cast<int>(g); ++u) {
            if (placed[static_cast<std::size_t>(u)]) continue;
            if (best < 0 || cumulative_form[u] > cumulative_form[best] + kSucraTieTolerance) best = u;
        }
        placed[static_cast<std::size_t>(best)] = true;
        order.push_back(best);
    }

    const double tail = (1.0 - options.ci_level) / 2.0;
    const auto comparator_col = effects.effects.col(options.comparator - 1);
    std::vector<double> contrast(static_cast<std::size_t>(n));
    report.treatments.resize(static_cast<std::size_t>(g));
    for (Eigen::Index t = 0; t < g; ++t) {
        auto& row = report.treatments[static_cast<std::size_t>(t)];
        row.index = static_cast<int>(t) + 1;
        row.label = treatments.label(row.index);
        row.sucra = cumulative_form[t];
        row.mean_rank = ranks_mean[t];
        for (Eigen::Index u = 0; u < g; ++u) {
            if (u != t && std::abs(cumulative_form[t] - cumulative_form[u]) <= kSucraTieTolerance) row.sucra_tie = true;
        }
        Eigen::Map<Eigen::VectorXd>(contrast.data(), n) = effects.effects.col(t) - comparator_col;
        row.effect_mean = Eigen::Map<Eigen::VectorXd>(contrast.data(), n).mean();
        row.ci_low = quantile_type7(contrast, tail);
        row.ci_high = quantile_type7(contrast, 1.0 - tail);
    }
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        report.treatments[static_cast<std::size_t>(order[pos])].position = static_cast<int>(pos) + 1;
    }
    return report;
}

HierarchyReport personalized_hierarchy(const PosteriorSamples& samples, const CovariateProfile& profile,
                                       const CovariateSchema& schema, const TreatmentSet& treatments,
                                       Direction direction, std::uint64_t seed, const HierarchyOptions& options) {
    return hierarchy_from_effects(effects_for_profile(samples, profile, schema, direction), treatments, seed,
                                  options);
}

HierarchyReport personalized_hierarchy(const GaussianPosterior& posterior, const CovariateProfile& profile,
                                       const CovariateSchema& schema, const TreatmentSet& treatments,
                                       Direction direction, std::size_t n_samples, std::uint64_t seed,
                                       const HierarchyOptions& options) {
    return hierarchy_from_effects(sample_effects(posterior, profile, schema, direction, n_samples, seed),
                                  treatments, seed, options);
}

}  // namespace rankforge
