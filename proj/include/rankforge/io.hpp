#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rankforge/core.hpp"
#include "rankforge/ranking.hpp"
#include "rankforge/stage1.hpp"
#include "rankforge/stage2.hpp"

namespace rankforge {

inline constexpr std::string_view kModelFormatVersion = "1";
inline constexpr double kArtifactSymmetryTolerance = 1e-8;

/// Treatments, covariate kinds and benefit direction accompanying an IPD file.
struct SchemaConfig {
    TreatmentSet treatments;
    CovariateSchema schema;
    Direction direction = Direction::higher_better;
};

SchemaConfig parse_schema_config(std::string_view json_text);
nlohmann::json schema_to_json(const CovariateSchema& schema);
CovariateSchema schema_from_json(const nlohmann::json& covariates);

/// Parses `study,treatment,outcome,<covariates...>` CSV (any column order,
/// LF or CRLF). Rows with an empty or NA cell are dropped and counted as
/// incomplete. Row numbers in errors count data rows from 1, header excluded.
/// The result is validated; any validation error is thrown.
IPDDataset parse_ipd_csv(std::string_view bytes, const SchemaConfig& config);

struct Provenance {
    std::string created;         // UTC ISO-8601
    std::string dataset_digest;  // SHA-256 of the IPD bytes
    std::string tool;

    bool operator==(const Provenance&) const = default;
};

struct ModelArtifact {
    std::string format_version{kModelFormatVersion};
    TreatmentSet treatments;
    CovariateSchema schema;
    Direction direction = Direction::higher_better;
    GaussianPosterior posterior;
    std::vector<Stage1Fit> stage1;
    Provenance provenance;
};

/// Canonical JSON: sorted keys, no whitespace, shortest round-trip floats.
std::string write_model(const ModelArtifact& artifact);
ModelArtifact read_model(std::string_view bytes);

/// Profile documents map covariate name to value. Every schema covariate must
/// be present and no others; FieldError names the offending covariate.
CovariateProfile parse_profile_json(const nlohmann::json& doc, const CovariateSchema& schema);
CovariateProfile parse_profile_json(std::string_view json_text, const CovariateSchema& schema);
nlohmann::json profile_to_json(const CovariateProfile& profile, const CovariateSchema& schema);

nlohmann::json report_to_json(const HierarchyReport& report, const CovariateSchema& schema);
std::string write_report_json(const HierarchyReport& report, const CovariateSchema& schema);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace rankforge
