#include "rankforge/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace rankforge {

TreatmentSet::TreatmentSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    std::set<std::string> seen;
    for (const auto& label : labels_) {
        if (label.empty()) throw ValidationError("treatment label must not be empty");
        if (!seen.insert(label).second) throw ValidationError("duplicate treatment label '" + label + "'");
    }
}

const std::string& TreatmentSet::label(int index) const {
    if (index < 1 || index > size()) {
        throw ValidationError("treatment index " + std::to_string(index) + " outside 1.." +
                              std::to_string(size()));
    }
    return labels_[static_cast<std::size_t>(index - 1)];
}

std::optional<int> TreatmentSet::find(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<int>(it - labels_.begin()) + 1;
}

std::string_view to_string(Direction direction) {
    return direction == Direction::higher_better ? "higher-better" : "lower-better";
}

Direction parse_direction(std::string_view text) {
    if (text == "higher-better") return Direction::higher_better;
    if (text == "lower-better") return Direction::lower_better;
    throw ValidationError("unknown benefit direction '" + std::string(text) +
                          "' (expected higher-better or lower-better)");
}

std::string_view to_string(CovariateKind kind) {
    switch (kind) {
        case CovariateKind::continuous: return "continuous";
        case CovariateKind::binary: return "binary";
        case CovariateKind::categorical: return "categorical";
    }
    return "continuous";
}

CovariateKind parse_covariate_kind(std::string_view text) {
    if (text == "continuous") return CovariateKind::continuous;
    if (text == "binary") return CovariateKind::binary;
    if (text == "categorical") return CovariateKind::categorical;
    throw ValidationError("unknown covariate kind '" + std::string(text) + "'");
}

int Covariate::encoded_width() const {
    return kind == CovariateKind::categorical ? static_cast<int>(levels.size()) - 1 : 1;
}

CovariateSchema::CovariateSchema(std::vector<Covariate> covariates) : covariates_(std::move(covariates)) {
    std::set<std::string> names;
    for (const auto& c : covariates_) {
        if (c.name.empty()) throw ValidationError("covariate name must not be empty");
        if (c.name == "main") throw FieldError(c.name, "covariate name 'main' is reserved");
        if (!names.insert(c.name).second) throw FieldError(c.name, "duplicate covariate '" + c.name + "'");
        if (c.kind == CovariateKind::categorical) {
            if (c.levels.size() < 2) {
                throw FieldError(c.name, "categorical covariate '" + c.name + "' needs at least 2 levels");
            }
            std::set<std::string> levels(c.levels.begin(), c.levels.end());
            if (levels.size() != c.levels.size()) {
                throw FieldError(c.name, "categorical covariate '" + c.name + "' repeats a level");
            }
            if (!levels.contains(c.reference)) {
                throw FieldError(c.name, "categorical covariate '" + c.name +
                                             "' reference level is not one of its levels");
            }
        } else if (!c.levels.empty() || !c.reference.empty()) {
            throw FieldError(c.name, "only categorical covariates declare levels");
        }
        encoded_size_ += c.encoded_width();
    }
}

std::optional<std::size_t> CovariateSchema::find(std::string_view name) const {
    for (std::size_t i = 0; i < covariates_.size(); ++i) {
        if (covariates_[i].name == name) return i;
    }
    return std::nullopt;
}

std::vector<std::string> CovariateSchema::encoded_names() const {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(encoded_size_));
    for (const auto& c : covariates_) {
        if (c.kind != CovariateKind::categorical) {
            names.push_back(c.name);
            continue;
        }
        for (const auto& level : c.levels) {
            if (level != c.reference) names.push_back(c.name + "=" + level);
        }
    }
    return names;
}

std::optional<std::string> check_value(const Covariate& covariate, const CovariateValue& value) {
    switch (covariate.kind) {
        case CovariateKind::continuous:
            if (!std::holds_alternative<double>(value)) return "expected a number";
            if (!std::isfinite(std::get<double>(value))) return "value is not finite";
            return std::nullopt;
        case CovariateKind::binary:
            if (!std::holds_alternative<double>(value)) return "expected 0 or 1";
            if (double v = std::get<double>(value); v != 0.0 && v != 1.0) return "expected 0 or 1";
            return std::nullopt;
        case CovariateKind::categorical: {
            if (!std::holds_alternative<std::string>(value)) return "expected a level name";
            const auto& level = std::get<std::string>(value);
            if (std::find(covariate.levels.begin(), covariate.levels.end(), level) == covariate.levels.end()) {
                return "unknown level '" + level + "'";
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

bool ValidationReport::ok() const {
    return std::none_of(issues.begin(), issues.end(),
                        [](const auto& i) { return i.severity == ValidationIssue::Severity::error; });
}

std::vector<std::string> ValidationReport::errors() const {
    std::vector<std::string> out;
    for (const auto& i : issues) {
        if (i.severity == ValidationIssue::Severity::error) out.push_back(i.message);
    }
    return out;
}

std::vector<std::string> ValidationReport::warnings() const {
    std::vector<std::string> out;
    for (const auto& i : issues) {
        if (i.severity == ValidationIssue::Severity::warning) out.push_back(i.message);
    }
    return out;
}

namespace {

// study -> treatment -> record count, ordered so reports are order-insensitive
using ArmCounts = std::map<std::string, std::map<int, std::size_t>>;

ArmCounts count_arms(const IPDDataset& dataset) {
    ArmCounts arms;
    for (const auto& r : dataset.records) ++arms[r.study][r.treatment];
    return arms;
}

}  // namespace

std::vector<std::vector<int>> treatment_components(const IPDDataset& dataset) {
    const int g = dataset.treatments.size();
    std::vector<std::vector<int>> adjacency(static_cast<std::size_t>(g) + 1);
    for (const auto& [study, arms] : count_arms(dataset)) {
        std::vector<int> present;
        for (const auto& [t, n] : arms) {
            if (t >= 1 && t <= g) present.push_back(t);
        }
        for (std::size_t i = 1; i < present.size(); ++i) {
            adjacency[static_cast<std::size_t>(present[0])].push_back(present[i]);
            adjacency[static_cast<std::size_t>(present[i])].push_back(present[0]);
        }
    }
    std::vector<int> component(static_cast<std::size_t>(g) + 1, -1);
    std::vector<std::vector<int>> components;
    for (int start = 1; start <= g; ++start) {
        if (component[static_cast<std::size_t>(start)] >= 0) continue;
        const int id = static_cast<int>(components.size());
        components.emplace_back();
        std::vector<int> queue{start};
        component[static_cast<std::size_t>(start)] = id;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const int node = queue[head];
            components.back().push_back(node);
            for (int next : adjacency[static_cast<std::size_t>(node)]) {
                if (component[static_cast<std::size_t>(next)] < 0) {
                    component[static_cast<std::size_t>(next)] = id;
                    queue.push_back(next);
                }
            }
        }
        std::sort(components.back().begin(), components.back().end());
    }
    return components;
}

ValidationReport validate_dataset(const IPDDataset& dataset) {
    ValidationReport report;
    auto error = [&](std::string msg) {
        report.issues.push_back({ValidationIssue::Severity::error, std::move(msg)});
    };
    auto warning = [&](std::string msg) {
        report.issues.push_back({ValidationIssue::Severity::warning, std::move(msg)});
    };

    const int g = dataset.treatments.size();
    if (g < 2) error("network needs at least 2 treatments, got " + std::to_string(g));
    if (dataset.incomplete_records > 0) {
        warning(std::to_string(dataset.incomplete_records) +
                " record(s) with missing fields excluded (complete-case)");
    }

    const auto& schema = dataset.schema;
    for (const auto& r : dataset.records) {
        const std::string where = r.row > 0 ? "row " + std::to_string(r.row) : "study '" + r.study + "'";
        if (r.treatment < 1 || r.treatment > g) {
            error(where + ": treatment index " + std::to_string(r.treatment) + " not in network");
        }
        if (!std::isfinite(r.outcome)) error(where + ": outcome is not finite");
        if (r.covariates.size() != static_cast<std::size_t>(schema.size())) {
            error(where + ": expected " + std::to_string(schema.size()) + " covariate values");
            continue;
        }
        for (std::size_t q = 0; q < r.covariates.size(); ++q) {
            if (auto why = check_value(schema[q], r.covariates[q])) {
                error(where + ": covariate '" + schema[q].name + "': " + *why);
            }
        }
    }

    const auto arms = count_arms(dataset);
    if (arms.empty()) error("dataset has no records");
    for (const auto& [study, counts] : arms) {
        if (counts.size() < 2) error("study '" + study + "' has < 2 treatments");
        for (const auto& [t, n] : counts) {
            if (n < 2 && t >= 1 && t <= g) {
                error("study '" + study + "' arm '" + dataset.treatments.label(t) + "' has < 2 records");
            }
        }
    }

    if (g >= 2 && !arms.empty()) {
        const auto components = treatment_components(dataset);
        if (components.size() > 1) {
            std::ostringstream msg;
            msg << "network disconnected: " << components.size() << " components {";
            for (std::size_t c = 0; c < components.size(); ++c) {
                if (c > 0) msg << "} {";
                for (std::size_t i = 0; i < components[c].size(); ++i) {
                    if (i > 0) msg << ", ";
                    msg << dataset.treatments.label(components[c][i]);
                }
            }
            msg << "}";
            error(msg.str());
        }
    }
    return report;
}

void encode_values(std::span<const CovariateValue> values, const CovariateSchema& schema,
                   Eigen::Ref<Eigen::VectorXd> out) {
    if (values.size() != static_cast<std::size_t>(schema.size())) {
        throw ValidationError("expected " + std::to_string(schema.size()) + " covariate values, got " +
                              std::to_string(values.size()));
    }
    if (out.size() != schema.encoded_size()) throw ValidationError("encoding buffer has wrong length");
    Eigen::Index col = 0;
    for (std::size_t q = 0; q < values.size(); ++q) {
        const auto& c = schema[q];
        if (auto why = check_value(c, values[q])) {
            throw FieldError(c.name, "covariate '" + c.name + "': " + *why);
        }
        if (c.kind != CovariateKind::categorical) {
            out[col++] = std::get<double>(values[q]);
            continue;
        }
        const auto& level = std::get<std::string>(values[q]);
        for (const auto& candidate : c.levels) {
            if (candidate == c.reference) continue;
            out[col++] = candidate == level ? 1.0 : 0.0;
        }
    }
}

Eigen::VectorXd encode_profile(const CovariateProfile& profile, const CovariateSchema& schema) {
    Eigen::VectorXd x(schema.encoded_size());
    encode_values(profile.values, schema, x);
    return x;
}

std::optional<int> Layout::position(int treatment) const {
    auto it = std::find(treatments.begin(), treatments.end(), treatment);
    if (it == treatments.end()) return std::nullopt;
    return static_cast<int>(it - treatments.begin());
}

std::vector<std::string> coefficient_names(const CovariateSchema& schema) {
    std::vector<std::string> names{"main"};
    auto encoded = schema.encoded_names();
    names.insert(names.end(), encoded.begin(), encoded.end());
    return names;
}

}  // namespace rankforge
