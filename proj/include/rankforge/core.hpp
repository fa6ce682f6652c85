#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rankforge/errors.hpp"

namespace rankforge {

/// Network treatments, indexed 1..G. Index 1 is the network reference.
class TreatmentSet {
public:
    TreatmentSet() = default;
    explicit TreatmentSet(std::vector<std::string> labels);

    int size() const noexcept { return static_cast<int>(labels_.size()); }
    const std::string& label(int index) const;
    std::optional<int> find(std::string_view label) const;
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    bool operator==(const TreatmentSet&) const = default;

private:
    std::vector<std::string> labels_;
};

enum class Direction { higher_better, lower_better };

std::string_view to_string(Direction direction);
Direction parse_direction(std::string_view text);

enum class CovariateKind { continuous, binary, categorical };

std::string_view to_string(CovariateKind kind);
CovariateKind parse_covariate_kind(std::string_view text);

struct Covariate {
    std::string name;
    CovariateKind kind = CovariateKind::continuous;
    std::vector<std::string> levels;  // categorical only, declared order
    std::string reference;            // categorical only
    std::string unit;

    /// Number of columns this covariate occupies after indicator expansion.
    int encoded_width() const;

    bool operator==(const Covariate&) const = default;
};

/// Ordered effect-modifier descriptors. Q = size(), Q* = encoded_size().
class CovariateSchema {
public:
    CovariateSchema() = default;
    explicit CovariateSchema(std::vector<Covariate> covariates);

    int size() const noexcept { return static_cast<int>(covariates_.size()); }
    int encoded_size() const noexcept { return encoded_size_; }
    const std::vector<Covariate>& covariates() const noexcept { return covariates_; }
    const Covariate& operator[](std::size_t i) const { return covariates_[i]; }
    std::optional<std::size_t> find(std::string_view name) const;

    /// Column names after expansion; categorical columns read "name=level".
    std::vector<std::string> encoded_names() const;

    bool operator==(const CovariateSchema& other) const { return covariates_ == other.covariates_; }

private:
    std::vector<Covariate> covariates_;
    int encoded_size_ = 0;
};

// Continuous and binary values are numbers; categorical values are level names.
using CovariateValue = std::variant<double, std::string>;

/// Returns a description of why `value` does not conform to `covariate`.
std::optional<std::string> check_value(const Covariate& covariate, const CovariateValue& value);

struct CovariateProfile {
    std::vector<CovariateValue> values;  // schema order

    bool operator==(const CovariateProfile&) const = default;
};

struct IPDRecord {
    std::string study;
    int treatment = 0;
    double outcome = 0.0;
    std::vector<CovariateValue> covariates;  // schema order
    std::size_t row = 0;                     // 1-based source row, 0 if synthetic
};

struct IPDDataset {
    TreatmentSet treatments;
    CovariateSchema schema;
    std::vector<IPDRecord> records;
    Direction direction = Direction::higher_better;
    std::size_t incomplete_records = 0;  // dropped at ingestion (complete-case)
};

struct ValidationIssue {
    enum class Severity { error, warning };
    Severity severity;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const;
    std::vector<std::string> errors() const;
    std::vector<std::string> warnings() const;
};

ValidationReport validate_dataset(const IPDDataset& dataset);

/// Connected components of the treatment co-occurrence graph, as lists of
/// 1-based treatment indices. Treatments absent from every study are singletons.
std::vector<std::vector<int>> treatment_components(const IPDDataset& dataset);

/// Writes the indicator-expanded encoding of `values` into `out` (length Q*).
void encode_values(std::span<const CovariateValue> values, const CovariateSchema& schema,
                   Eigen::Ref<Eigen::VectorXd> out);

Eigen::VectorXd encode_profile(const CovariateProfile& profile, const CovariateSchema& schema);

/// Coefficient grid for per-treatment blocks: treatment-major, then coefficient
/// class ("main" followed by the encoded covariate columns).
struct Layout {
    std::vector<int> treatments;
    std::vector<std::string> coefficients;

    int n_treatments() const noexcept { return static_cast<int>(treatments.size()); }
    int n_coefficients() const noexcept { return static_cast<int>(coefficients.size()); }
    int size() const noexcept { return n_treatments() * n_coefficients(); }
    int index(int treatment_pos, int coefficient) const noexcept {
        return treatment_pos * n_coefficients() + coefficient;
    }
    std::optional<int> position(int treatment) const;

    bool operator==(const Layout&) const = default;
};

std::vector<std::string> coefficient_names(const CovariateSchema& schema);

}  // namespace rankforge
