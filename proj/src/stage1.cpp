#include "rankforge/stage1.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "rankforge/linalg.hpp"

namespace rankforge {
namespace {

constexpr double kRankTolerance = 1e-9;

struct StudyDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::string> column_names;
    std::vector<Eigen::Index> contrast_columns;  // follows the Stage1Fit layout
};

StudyDesign build_design(std::span<const IPDRecord> records, const CovariateSchema& schema, int reference,
                         const std::vector<int>& contrasts) {
    const auto n = static_cast<Eigen::Index>(records.size());
    const Eigen::Index qs = schema.encoded_size();
    const auto a = static_cast<Eigen::Index>(contrasts.size());
    const Eigen::Index p = 1 + qs + a + a * qs;
    const auto encoded = schema.encoded_names();

    StudyDesign d;
    d.x = Eigen::MatrixXd::Zero(n, p);
    d.y.resize(n);

    // Column order: intercept, prognostic, indicators, interactions (indicator-major).
    d.column_names.push_back("intercept");
    for (const auto& name : encoded) d.column_names.push_back("prognostic " + name);
    for (int t : contrasts) d.column_names.push_back("treatment #" + std::to_string(t));
    for (int t : contrasts) {
        for (const auto& name : encoded) d.column_names.push_back("treatment #" + std::to_string(t) + " x " + name);
    }
    for (Eigen::Index k = 0; k < a; ++k) {
        d.contrast_columns.push_back(1 + qs + k);
        for (Eigen::Index q = 0; q < qs; ++q) d.contrast_columns.push_back(1 + qs + a + k * qs + q);
    }

    Eigen::VectorXd xq(qs);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        encode_values(r.covariates, schema, xq);
        d.y[i] = r.outcome;
        d.x(i, 0) = 1.0;
        d.x.row(i).segment(1, qs) = xq.transpose();
        if (r.treatment == reference) continue;
        const auto k = static_cast<Eigen::Index>(
            std::find(contrasts.begin(), contrasts.end(), r.treatment) - contrasts.begin());
        d.x(i, 1 + qs + k) = 1.0;
        d.x.row(i).segment(1 + qs + a + k * qs, qs) = xq.transpose();
    }
    return d;
}

// Columns that add no rank over the columns before them, after unit scaling.
std::vector<Eigen::Index> dependent_columns(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd scaled = x;
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
        const double norm = scaled.col(j).norm();
        if (norm > 0) scaled.col(j) /= norm;
    }
    std::vector<Eigen::Index> dependent;
    std::vector<Eigen::Index> basis;
    for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
        Eigen::MatrixXd trial(scaled.rows(), static_cast<Eigen::Index>(basis.size()) + 1);
        for (std::size_t b = 0; b < basis.size(); ++b) trial.col(static_cast<Eigen::Index>(b)) = scaled.col(basis[b]);
        trial.col(trial.cols() - 1) = scaled.col(j);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(trial);
        qr.setThreshold(kRankTolerance);
        if (qr.rank() == trial.cols()) {
            basis.push_back(j);
        } else {
            dependent.push_back(j);
        }
    }
    return dependent;
}

}  // namespace

Stage1Fit fit_study(std::span<const IPDRecord> records, const CovariateSchema& schema,
                    const Stage1Options& options) {
    if (records.empty()) throw ValidationError("study has no records");
    const std::string study = records.front().study;

    std::set<int> arms;
    for (const auto& r : records) {
        if (r.study != study) throw ValidationError("records from several studies passed to fit_study");
        arms.insert(r.treatment);
    }
    if (arms.size() < 2) throw ValidationError("study '" + study + "' has < 2 treatments");

    const int reference = options.reference.value_or(*arms.begin());
    if (!arms.contains(reference)) {
        throw ValidationError("study '" + study + "' has no arm for reference treatment #" +
                              std::to_string(reference));
    }
    std::vector<int> contrasts;
    for (int t : arms) {
        if (t != reference) contrasts.push_back(t);
    }

    const StudyDesign design = build_design(records, schema, reference, contrasts);
    const Eigen::Index n = design.x.rows();
    const Eigen::Index p = design.x.cols();
    if (n <= p) {
        throw NumericError("study '" + study + "': " + std::to_string(n) + " observations for " +
                           std::to_string(p) + " regression columns (need more observations than columns)");
    }

    if (auto dependent = dependent_columns(design.x); !dependent.empty()) {
        std::ostringstream msg;
        msg << "study '" << study << "': rank-deficient design; dependent columns: ";
        for (std::size_t i = 0; i < dependent.size(); ++i) {
            msg << (i > 0 ? ", " : "") << design.column_names[static_cast<std::size_t>(dependent[i])];
        }
        throw NumericError(msg.str());
    }

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(design.x);
    const Eigen::VectorXd beta = qr.solve(design.y);
    const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd xtx_inv = r_inv * r_inv.transpose();
    const double rss = (design.y - design.x * beta).squaredNorm();
    const double sigma2 = rss / static_cast<double>(n - p);

    Stage1Fit fit;
    fit.study = study;
    fit.reference = reference;
    fit.layout.treatments = contrasts;
    fit.layout.coefficients = coefficient_names(schema);
    fit.residual_variance = sigma2;
    fit.n_records = static_cast<std::size_t>(n);

    const auto m = static_cast<Eigen::Index>(design.contrast_columns.size());
    fit.estimate.resize(m);
    fit.covariance.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto ci = design.contrast_columns[static_cast<std::size_t>(i)];
        fit.estimate[i] = beta[ci];
        for (Eigen::Index j = 0; j < m; ++j) {
            fit.covariance(i, j) = sigma2 * xtx_inv(ci, design.contrast_columns[static_cast<std::size_t>(j)]);
        }
    }
    fit.covariance = symmetrized(fit.covariance);

    const auto factor = cholesky_with_jitter(fit.covariance, "study '" + study + "' contrast covariance");
    if (factor.jitter > 0) {
        fit.jitter = factor.jitter;
        fit.covariance.diagonal().array() += factor.jitter;
    }
    return fit;
}

std::vector<Stage1Fit> fit_all_studies(const IPDDataset& dataset) {
    std::map<std::string, std::vector<IPDRecord>> by_study;
    for (const auto& r : dataset.records) by_study[r.study].push_back(r);

    std::vector<Stage1Fit> fits;
    std::vector<std::string> failures;
    for (const auto& [study, records] : by_study) {
        try {
            fits.push_back(fit_study(records, dataset.schema));
        } catch (const Error& e) {
            const std::string what = e.what();
            failures.push_back(what.starts_with("study '") ? what : "study '" + study + "': " + what);
        }
    }
    if (!failures.empty()) {
        std::string msg = std::to_string(failures.size()) + " study fit(s) failed:";
        for (const auto& f : failures) msg += "\n  " + f;
        throw NumericError(msg);
    }
    return fits;
}

}  // namespace rankforge
