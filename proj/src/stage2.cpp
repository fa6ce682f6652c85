#include "rankforge/stage2.hpp"

#include <cmath>
#include <random>

#include "rankforge/linalg.hpp"

namespace rankforge {

Layout network_layout(const TreatmentSet& treatments, const CovariateSchema& schema) {
    Layout layout;
    for (int g = 2; g <= treatments.size(); ++g) layout.treatments.push_back(g);
    layout.coefficients = coefficient_names(schema);
    return layout;
}

GaussianPrior GaussianPrior::independent(int dim, double sd) {
    if (!(sd > 0) || !std::isfinite(sd)) throw ValidationError("prior standard deviation must be > 0");
    return {Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim) * (sd * sd)};
}

std::string parameter_name(const Layout& layout, int index, const TreatmentSet* treatments) {
    const int t = layout.treatments[static_cast<std::size_t>(index / layout.n_coefficients())];
    const auto& coef = layout.coefficients[static_cast<std::size_t>(index % layout.n_coefficients())];
    const std::string label = treatments ? treatments->label(t) : "#" + std::to_string(t);
    return "psi[" + label + ", " + coef + "]";
}

ConsistencyDesign build_consistency_design(const Stage1Fit& fit, const Layout& network) {
    if (fit.layout.coefficients != network.coefficients) {
        throw ValidationError("study '" + fit.study + "' coefficient classes do not match the network layout");
    }
    auto column_block = [&](int treatment) -> std::optional<int> {
        if (treatment == 1) return std::nullopt;
        auto pos = network.position(treatment);
        if (!pos) {
            throw ValidationError("study '" + fit.study + "' references treatment #" + std::to_string(treatment) +
                                  " which is not in the network");
        }
        return *pos;
    };

    const int nc = network.n_coefficients();
    ConsistencyDesign design{fit.study, Eigen::MatrixXd::Zero(fit.layout.size(), network.size())};
    const auto reference = column_block(fit.reference);
    for (int k = 0; k < fit.layout.n_treatments(); ++k) {
        const auto arm = column_block(fit.layout.treatments[static_cast<std::size_t>(k)]);
        for (int q = 0; q < nc; ++q) {
            const int row = fit.layout.index(k, q);
            if (arm) design.map(row, network.index(*arm, q)) += 1.0;
            if (reference) design.map(row, network.index(*reference, q)) -= 1.0;
        }
    }
    return design;
}

GaussianPosterior combine(std::span<const Stage1Fit> fits, std::span<const ConsistencyDesign> designs,
                          const Layout& network, const GaussianPrior& prior) {
    const int p = network.size();
    if (fits.size() != designs.size()) throw ValidationError("one consistency design per stage-1 fit required");
    if (prior.mean.size() != p || prior.covariance.rows() != p || prior.covariance.cols() != p) {
        throw ValidationError("prior dimension does not match the network layout");
    }

    Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(p);
    Eigen::Array<bool, Eigen::Dynamic, 1> touched = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(p, false);

    // Fixed study order keeps the accumulation bit-reproducible.
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& fit = fits[i];
        const auto& a = designs[i].map;
        if (a.rows() != fit.estimate.size() || a.cols() != p || fit.covariance.rows() != fit.estimate.size()) {
            throw ValidationError("study '" + fit.study + "': design and stage-1 dimensions disagree");
        }
        const auto s = cholesky_with_jitter(fit.covariance, "study '" + fit.study + "' contrast covariance");
        const Eigen::MatrixXd s_inv_a = s.llt.solve(a);
        precision.noalias() += a.transpose() * s_inv_a;
        shift.noalias() += s_inv_a.transpose() * fit.estimate;
        touched = touched || (a.array() != 0.0).colwise().any().transpose();
    }

    for (int j = 0; j < p; ++j) {
        if (!touched[j]) {
            throw EstimabilityError("parameter " + parameter_name(network, j) +
                                    " is not informed by any study (not estimable)");
        }
    }

    const auto prior_factor = cholesky_with_jitter(prior.covariance, "prior covariance");
    precision += spd_inverse(prior_factor.llt);
    shift += prior_factor.llt.solve(prior.mean);
    precision = symmetrized(precision);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(precision);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0) || hi / lo > kMaxConditionNumber) {
        Eigen::Index worst = 0;
        eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&worst);
        throw EstimabilityError("posterior precision is ill-conditioned (condition number " +
                                std::to_string(hi / lo) + "); weakest direction loads on " +
                                parameter_name(network, static_cast<int>(worst)));
    }

    const auto factor = cholesky_with_jitter(precision, "posterior precision");
    GaussianPosterior post;
    post.layout = network;
    post.covariance = spd_inverse(factor.llt);
    post.mean = factor.llt.solve(shift);
    post.prior = prior;
    if (!post.mean.allFinite() || !post.covariance.allFinite()) throw NumericError("posterior is not finite");
    return post;
}

double posterior_condition_number(const GaussianPosterior& posterior) {
    return spd_condition_number(posterior.covariance);
}

PosteriorSamples sample(const GaussianPosterior& posterior, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("number of samples must be >= 1");
    const auto p = posterior.mean.size();
    const auto factor = cholesky_with_jitter(posterior.covariance, "posterior covariance");
    const Eigen::MatrixXd lower = factor.llt.matrixL();

    std::mt19937_64 engine(seed);
    std::normal_distribution<double> normal;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(static_cast<Eigen::Index>(n), p);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(engine);

    PosteriorSamples out;
    out.layout = posterior.layout;
    out.seed = seed;
    out.draws = z * lower.transpose();
    out.draws.rowwise() += posterior.mean.transpose();
    return out;
}

}  // namespace rankforge
