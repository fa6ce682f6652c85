#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rankforge/core.hpp"

namespace rankforge {

/// Per-study contrast estimates against the study's reference arm.
///
/// `layout.treatments` lists the non-reference arms in ascending network
/// index; `estimate` and `covariance` follow `layout` (contrast-major, then
/// "main" and one entry per encoded covariate).
struct Stage1Fit {
    std::string study;
    int reference = 0;
    Layout layout;
    Eigen::VectorXd estimate;
    Eigen::MatrixXd covariance;
    double residual_variance = 0.0;
    std::size_t n_records = 0;
    double jitter = 0.0;  // diagonal repair applied to `covariance`, 0 if none
};

struct Stage1Options {
    // Overrides the default reference arm (lowest network index in the study).
    std::optional<int> reference;
};

/// Ordinary least squares on [intercept | prognostic covariates | contrast
/// indicators | contrast x covariate interactions] for one study's records.
Stage1Fit fit_study(std::span<const IPDRecord> records, const CovariateSchema& schema,
                    const Stage1Options& options = {});

/// One fit per study, ordered by study id. Failures from every study are
/// reported together in a single NumericError.
std::vector<Stage1Fit> fit_all_studies(const IPDDataset& dataset);

}  // namespace rankforge
