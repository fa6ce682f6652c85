#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rankforge/core.hpp"
#include "rankforge/stage2.hpp"

namespace rankforge {

/// Per-sample expected relative effects d_g(x) versus treatment 1 for one
/// covariate profile. Column 0 (treatment 1) is identically zero.
struct EffectSamples {
    Eigen::MatrixXd effects;  // n_samples x G
    CovariateProfile profile;
    Direction direction = Direction::higher_better;
};

/// d_g = psi_g0 + sum_q psi_gq x_q for every posterior draw.
EffectSamples effects_for_profile(const PosteriorSamples& samples, const CovariateProfile& profile,
                                  const CovariateSchema& schema, Direction direction);

/// Draws the effects for `profile` directly from their exact Gaussian marginal
/// N(B mu, B Sigma B'), where B applies the profile to each treatment block.
/// Same distribution as sample() followed by effects_for_profile(), with G-1
/// normal deviates per draw instead of (G-1)(Q*+1).
EffectSamples sample_effects(const GaussianPosterior& posterior, const CovariateProfile& profile,
                             const CovariateSchema& schema, Direction direction, std::size_t n,
                             std::uint64_t seed);

using RankSamples = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RankSampling {
    RankSamples ranks;             // n_samples x G, each row a permutation of 1..G
    std::size_t tied_samples = 0;  // draws that needed a random tie-break
    std::uint64_t seed = 0;
};

/// Rank 1 is the most favorable treatment under the benefit direction. Exact
/// ties are broken uniformly at random from `seed`.
RankSampling rank_per_sample(const EffectSamples& effects, std::uint64_t seed);

struct RankMatrix {
    Eigen::MatrixXd probabilities;  // p_gr, G x G
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    std::size_t tie_count = 0;
};

RankMatrix rank_probabilities(const RankSampling& ranks);

/// SUCRA(g) = sum_{s=1}^{G-1} sum_{r<=s} p_gr / (G-1).
Eigen::VectorXd sucra(const RankMatrix& rank_matrix);

/// SUCRA(g) = (G - E[rank(g)]) / (G-1).
Eigen::VectorXd sucra_from_mean_rank(const Eigen::VectorXd& mean_rank);

/// E[rank(g)] averaged directly over the sampled ranks.
Eigen::VectorXd mean_rank(const RankSampling& ranks);

/// E[rank(g)] = sum_r r p_gr.
Eigen::VectorXd mean_rank(const RankMatrix& rank_matrix);

inline constexpr double kSucraFormTolerance = 1e-12;
inline constexpr double kSucraTieTolerance = 1e-12;

/// Entry (g, h): fraction of draws where g is strictly more favorable than h,
/// ties counted as one half. Diagonal is 0.5.
Eigen::MatrixXd pairwise_beat_probabilities(const EffectSamples& effects);

/// Type-7 (linear interpolation) sample quantile. `values` is reordered.
double quantile_type7(std::vector<double>& values, double prob);

struct TreatmentSummary {
    int index = 0;
    std::string label;
    double sucra = 0.0;
    double mean_rank = 0.0;
    int position = 0;        // 1 = best, SUCRA descending
    bool sucra_tie = false;  // SUCRA equal (within 1e-12) to another treatment's
    double effect_mean = 0.0;  // versus the comparator, outcome scale
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct HierarchyOptions {
    int comparator = 1;
    double ci_level = 0.95;
};

struct HierarchyReport {
    std::vector<TreatmentSummary> treatments;  // network index order
    RankMatrix rank_matrix;
    Eigen::MatrixXd beat_probabilities;
    CovariateProfile profile;
    Direction direction = Direction::higher_better;
    int comparator = 1;
    double ci_level = 0.95;
    std::uint64_t seed = 0;
    std::size_t n_samples = 0;

    /// Treatment indices ordered by hierarchy position.
    std::vector<int> order() const;
};

HierarchyReport hierarchy_from_effects(const EffectSamples& effects, const TreatmentSet& treatments,
                                       std::uint64_t seed, const HierarchyOptions& options = {});

HierarchyReport personalized_hierarchy(const PosteriorSamples& samples, const CovariateProfile& profile,
                                       const CovariateSchema& schema, const TreatmentSet& treatments,
                                       Direction direction, std::uint64_t seed,
                                       const HierarchyOptions& options = {});

/// Samples the profile's effect marginal (see sample_effects) and builds the report.
HierarchyReport personalized_hierarchy(const GaussianPosterior& posterior, const CovariateProfile& profile,
                                       const CovariateSchema& schema, const TreatmentSet& treatments,
                                       Direction direction, std::size_t n_samples, std::uint64_t seed,
                                       const HierarchyOptions& options = {});

}  // namespace rankforge
