#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rankforge/core.hpp"
#include "rankforge/stage1.hpp"

namespace rankforge {

/// Layout of the basic parameters: treatments 2..G, coefficient classes "main"
/// then the encoded covariates. Treatment 1 is the reference and is not stored.
Layout network_layout(const TreatmentSet& treatments, const CovariateSchema& schema);

struct GaussianPrior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    /// Independent zero-mean coefficients with a common standard deviation.
    static GaussianPrior independent(int dim, double sd);
};

inline constexpr double kDefaultPriorSd = 100.0;
inline constexpr double kMaxConditionNumber = 1e12;

struct GaussianPosterior {
    Layout layout;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    GaussianPrior prior;
};

/// Maps a study's contrast entries onto the basic parameters: the row for
/// contrast (k vs reference h), class q has +1 at (k, q) and -1 at (h, q),
/// with treatment 1 columns omitted.
struct ConsistencyDesign {
    std::string study;
    Eigen::MatrixXd map;
};

ConsistencyDesign build_consistency_design(const Stage1Fit& fit, const Layout& network);

/// Conjugate common-effect combination of stage-1 contrasts:
///   precision = sum_i A_i' S_i^-1 A_i + prior^-1
///   mean      = precision^-1 (sum_i A_i' S_i^-1 d_i + prior^-1 prior_mean)
/// Throws EstimabilityError when a parameter is untouched by every study or
/// the posterior precision condition number exceeds kMaxConditionNumber.
GaussianPosterior combine(std::span<const Stage1Fit> fits, std::span<const ConsistencyDesign> designs,
                          const Layout& network, const GaussianPrior& prior);

/// Condition number of the posterior covariance (equal to that of the precision).
double posterior_condition_number(const GaussianPosterior& posterior);

struct PosteriorSamples {
    Layout layout;
    Eigen::MatrixXd draws;  // n_samples x layout.size()
    std::uint64_t seed = 0;
};

/// Independent multivariate normal draws through the Cholesky factor of the
/// posterior covariance. Identical (posterior, n, seed) give identical draws.
PosteriorSamples sample(const GaussianPosterior& posterior, std::size_t n, std::uint64_t seed);

/// Human-readable name of a basic parameter, e.g. "psi[Venlafaxine, age]".
std::string parameter_name(const Layout& layout, int index, const TreatmentSet* treatments = nullptr);

}  // namespace rankforge
