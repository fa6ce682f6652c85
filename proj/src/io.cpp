#include "rankforge/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "rankforge/linalg.hpp"

namespace rankforge {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
    return value;
}

// RFC 4180-style records: quoted fields may hold commas, quotes ("") and newlines.
std::vector<std::vector<std::string>> split_csv(std::string_view bytes) {
    if (bytes.starts_with("\xEF\xBB\xBF")) bytes.remove_prefix(3);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const char c = bytes[i];
        if (quoted) {
            if (c == '"' && i + 1 < bytes.size() && bytes[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < bytes.size() && bytes[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) throw ValidationError("CSV ends inside a quoted field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

bool is_missing(std::string_view cell) {
    cell = trim(cell);
    return cell.empty() || cell == "NA";
}

std::string row_error(std::size_t row, std::string_view column, const std::string& what) {
    return "row " + std::to_string(row) + ", column `" + std::string(column) + "`: " + what;
}

const json& require(const json& doc, const char* key, const std::string& where) {
    auto it = doc.find(key);
    if (it == doc.end()) throw ValidationError(where + ": missing field '" + key + "'");
    return *it;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json flat = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    }
    return flat;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

json rows_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index n, const std::string& what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
        throw ValidationError(what + ": expected an array of " + std::to_string(n) + " numbers");
    }
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& e = j[static_cast<std::size_t>(i)];
        if (!e.is_number()) throw ValidationError(what + ": non-numeric entry");
        v[i] = e.get<double>();
    }
    if (!v.allFinite()) throw ValidationError(what + ": non-finite entry");
    return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index n, const std::string& what) {
    const Eigen::VectorXd flat = vector_from_json(j, n * n, what);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = flat[i * n + k];
    }
    return m;
}

json labels_to_json(const TreatmentSet& treatments, const std::vector<int>& indices) {
    json out = json::array();
    for (int t : indices) out.push_back(treatments.label(t));
    return out;
}

std::vector<int> labels_from_json(const TreatmentSet& treatments, const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array of treatment labels");
    std::vector<int> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw ValidationError(what + ": treatment labels must be strings");
        auto idx = treatments.find(e.get<std::string>());
        if (!idx) throw ValidationError(what + ": unknown treatment '" + e.get<std::string>() + "'");
        out.push_back(*idx);
    }
    return out;
}

}  // namespace

nlohmann::json schema_to_json(const CovariateSchema& schema) {
    json out = json::array();
    for (const auto& c : schema.covariates()) {
        json entry{{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
        if (c.kind == CovariateKind::categorical) {
            entry["levels"] = c.levels;
            entry["reference"] = c.reference;
        }
        if (!c.unit.empty()) entry["unit"] = c.unit;
        out.push_back(std::move(entry));
    }
    return out;
}

CovariateSchema schema_from_json(const nlohmann::json& covariates) {
    if (!covariates.is_array()) throw ValidationError("'covariates' must be an array");
    std::vector<Covariate> out;
    for (const auto& entry : covariates) {
        if (!entry.is_object()) throw ValidationError("covariate descriptors must be objects");
        Covariate c;
        const auto& name = require(entry, "name", "covariate descriptor");
        if (!name.is_string()) throw ValidationError("covariate name must be a string");
        c.name = name.get<std::string>();
        const auto& kind = require(entry, "kind", "covariate '" + c.name + "'");
        if (!kind.is_string()) throw FieldError(c.name, "covariate '" + c.name + "': kind must be a string");
        c.kind = parse_covariate_kind(kind.get<std::string>());
        if (auto it = entry.find("unit"); it != entry.end()) c.unit = it->get<std::string>();
        if (c.kind == CovariateKind::categorical) {
            const auto& levels = require(entry, "levels", "covariate '" + c.name + "'");
            if (!levels.is_array()) throw FieldError(c.name, "covariate '" + c.name + "': levels must be an array");
            for (const auto& l : levels) {
                if (!l.is_string()) throw FieldError(c.name, "covariate '" + c.name + "': levels must be strings");
                c.levels.push_back(l.get<std::string>());
            }
            const auto& ref = require(entry, "reference", "covariate '" + c.name + "'");
            if (!ref.is_string()) throw FieldError(c.name, "covariate '" + c.name + "': reference must be a string");
            c.reference = ref.get<std::string>();
        }
        out.push_back(std::move(c));
    }
    return CovariateSchema(std::move(out));
}

SchemaConfig parse_schema_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("schema config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("schema config must be a JSON object");
    SchemaConfig config;
    const auto& treatments = require(doc, "treatments", "schema config");
    if (!treatments.is_array()) throw ValidationError("'treatments' must be an array of labels");
    std::vector<std::string> labels;
    for (const auto& t : treatments) {
        if (!t.is_string()) throw ValidationError("treatment labels must be strings");
        labels.push_back(t.get<std::string>());
    }
    config.treatments = TreatmentSet(std::move(labels));
    if (auto it = doc.find("direction"); it != doc.end()) {
        if (!it->is_string()) throw ValidationError("'direction' must be a string");
        config.direction = parse_direction(it->get<std::string>());
    }
    if (auto it = doc.find("covariates"); it != doc.end()) config.schema = schema_from_json(*it);
    return config;
}

IPDDataset parse_ipd_csv(std::string_view bytes, const SchemaConfig& config) {
    const auto rows = split_csv(bytes);
    if (rows.empty()) throw ValidationError("IPD file is empty");

    const auto& header = rows.front();
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name{trim(header[i])};
        if (!column.emplace(name, i).second) throw FieldError(name, "duplicate column `" + name + "`");
    }
    std::vector<std::string> required{"study", "treatment", "outcome"};
    for (const auto& c : config.schema.covariates()) required.push_back(c.name);
    for (const auto& name : required) {
        if (!column.contains(name)) throw FieldError(name, "missing column `" + name + "`");
    }
    for (const auto& [name, idx] : column) {
        if (std::find(required.begin(), required.end(), name) == required.end()) {
            throw FieldError(name, "unexpected column `" + name + "`");
        }
    }

    IPDDataset dataset;
    dataset.treatments = config.treatments;
    dataset.schema = config.schema;
    dataset.direction = config.direction;

    const std::size_t c_study = column["study"];
    const std::size_t c_treatment = column["treatment"];
    const std::size_t c_outcome = column["outcome"];
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const std::size_t row = r;  // data rows from 1
        if (cells.size() != header.size()) {
            throw ValidationError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(cells.size()));
        }
        bool incomplete = false;
        for (const auto& name : required) incomplete = incomplete || is_missing(cells[column[name]]);
        if (incomplete) {
            ++dataset.incomplete_records;
            continue;
        }

        IPDRecord record;
        record.row = row;
        record.study = std::string(trim(cells[c_study]));
        const std::string label{trim(cells[c_treatment])};
        auto treatment = config.treatments.find(label);
        if (!treatment) throw FieldError("treatment", row_error(row, "treatment", "unknown treatment '" + label + "'"));
        record.treatment = *treatment;
        auto outcome = parse_number(cells[c_outcome]);
        if (!outcome || !std::isfinite(*outcome)) {
            throw FieldError("outcome", row_error(row, "outcome", "'" + cells[c_outcome] + "' is not a finite number"));
        }
        record.outcome = *outcome;

        for (const auto& c : config.schema.covariates()) {
            const std::string cell{trim(cells[column[c.name]])};
            CovariateValue value;
            if (c.kind == CovariateKind::categorical) {
                value = cell;
            } else {
                auto number = parse_number(cell);
                if (!number) throw FieldError(c.name, row_error(row, c.name, "'" + cell + "' is not a number"));
                value = *number;
            }
            if (auto why = check_value(c, value)) throw FieldError(c.name, row_error(row, c.name, *why));
            record.covariates.push_back(std::move(value));
        }
        dataset.records.push_back(std::move(record));
    }

    const auto report = validate_dataset(dataset);
    if (!report.ok()) {
        std::string msg = "invalid dataset:";
        for (const auto& e : report.errors()) msg += "\n  " + e;
        throw ValidationError(msg);
    }
    return dataset;
}

std::string write_model(const ModelArtifact& artifact) {
    const auto& post = artifact.posterior;
    const auto& t = artifact.treatments;
    json stage1 = json::array();
    for (const auto& fit : artifact.stage1) {
        stage1.push_back({
            {"study", fit.study},
            {"reference", t.label(fit.reference)},
            {"contrasts", labels_to_json(t, fit.layout.treatments)},
            {"estimate", vector_to_json(fit.estimate)},
            {"covariance", matrix_to_json(fit.covariance)},
            {"residual_variance", fit.residual_variance},
            {"n_records", fit.n_records},
            {"jitter", fit.jitter},
        });
    }
    json doc{
        {"format_version", artifact.format_version},
        {"treatments", t.labels()},
        {"covariates", schema_to_json(artifact.schema)},
        {"direction", std::string(to_string(artifact.direction))},
        {"layout",
         {{"treatments", labels_to_json(t, post.layout.treatments)}, {"coefficients", post.layout.coefficients}}},
        {"posterior", {{"mean", vector_to_json(post.mean)}, {"covariance", matrix_to_json(post.covariance)}}},
        {"prior", {{"mean", vector_to_json(post.prior.mean)}, {"covariance", matrix_to_json(post.prior.covariance)}}},
        {"stage1", std::move(stage1)},
        {"provenance",
         {{"created", artifact.provenance.created},
          {"dataset_digest", artifact.provenance.dataset_digest},
          {"tool", artifact.provenance.tool}}},
    };
    return doc.dump();
}

ModelArtifact read_model(std::string_view bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model artifact is not valid JSON (truncated?): ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("model artifact must be a JSON object");

    ModelArtifact a;
    try {
        const auto& version = require(doc, "format_version", "model artifact");
        a.format_version = version.is_string() ? version.get<std::string>() : version.dump();
        if (a.format_version != kModelFormatVersion) {
            throw ValidationError("unsupported model format version '" + a.format_version + "' (expected '" +
                                  std::string(kModelFormatVersion) + "')");
        }
        a.treatments = TreatmentSet(require(doc, "treatments", "model artifact").get<std::vector<std::string>>());
        a.schema = schema_from_json(require(doc, "covariates", "model artifact"));
        a.direction = parse_direction(require(doc, "direction", "model artifact").get<std::string>());

        const auto& layout = require(doc, "layout", "model artifact");
        Layout parsed;
        parsed.treatments = labels_from_json(a.treatments, require(layout, "treatments", "layout"), "layout");
        parsed.coefficients = require(layout, "coefficients", "layout").get<std::vector<std::string>>();
        const Layout expected = network_layout(a.treatments, a.schema);
        if (parsed != expected) throw ValidationError("model layout does not match its treatments and covariates");

        const auto p = static_cast<Eigen::Index>(expected.size());
        auto& post = a.posterior;
        post.layout = expected;
        const auto& posterior = require(doc, "posterior", "model artifact");
        post.mean = vector_from_json(require(posterior, "mean", "posterior"), p, "posterior mean");
        post.covariance = matrix_from_json(require(posterior, "covariance", "posterior"), p, "posterior covariance");
        if (asymmetry(post.covariance) > kArtifactSymmetryTolerance) {
            throw ValidationError("posterior covariance is not symmetric (asymmetry " +
                                  std::to_string(asymmetry(post.covariance)) + ")");
        }
        if (Eigen::LLT<Eigen::MatrixXd>(post.covariance).info() != Eigen::Success) {
            throw ValidationError("posterior covariance is not positive definite");
        }
        const auto& prior = require(doc, "prior", "model artifact");
        post.prior.mean = vector_from_json(require(prior, "mean", "prior"), p, "prior mean");
        post.prior.covariance = matrix_from_json(require(prior, "covariance", "prior"), p, "prior covariance");

        for (const auto& s : require(doc, "stage1", "model artifact")) {
            Stage1Fit fit;
            fit.study = require(s, "study", "stage1").get<std::string>();
            const std::string where = "stage1 study '" + fit.study + "'";
            auto ref = a.treatments.find(require(s, "reference", where).get<std::string>());
            if (!ref) throw ValidationError(where + ": unknown reference treatment");
            fit.reference = *ref;
            fit.layout.treatments = labels_from_json(a.treatments, require(s, "contrasts", where), where);
            fit.layout.coefficients = expected.coefficients;
            const auto m = static_cast<Eigen::Index>(fit.layout.size());
            fit.estimate = vector_from_json(require(s, "estimate", where), m, where + " estimate");
            fit.covariance = matrix_from_json(require(s, "covariance", where), m, where + " covariance");
            fit.residual_variance = require(s, "residual_variance", where).get<double>();
            fit.n_records = require(s, "n_records", where).get<std::size_t>();
            fit.jitter = require(s, "jitter", where).get<double>();
            a.stage1.push_back(std::move(fit));
        }

        const auto& prov = require(doc, "provenance", "model artifact");
        a.provenance.created = require(prov, "created", "provenance").get<std::string>();
        a.provenance.dataset_digest = require(prov, "dataset_digest", "provenance").get<std::string>();
        a.provenance.tool = require(prov, "tool", "provenance").get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed model artifact: ") + e.what());
    }
    return a;
}

CovariateProfile parse_profile_json(const nlohmann::json& doc, const CovariateSchema& schema) {
    if (!doc.is_object()) throw ValidationError("profile must be a JSON object mapping covariate names to values");
    for (const auto& [name, value] : doc.items()) {
        if (!schema.find(name)) throw FieldError(name, "unknown covariate '" + name + "'");
    }
    CovariateProfile profile;
    for (const auto& c : schema.covariates()) {
        auto it = doc.find(c.name);
        if (it == doc.end()) throw FieldError(c.name, "missing covariate '" + c.name + "'");
        CovariateValue value;
        if (it->is_number()) {
            value = it->get<double>();
        } else if (it->is_string()) {
            value = it->get<std::string>();
        } else {
            throw FieldError(c.name, "covariate '" + c.name + "': expected a number or a level name");
        }
        if (auto why = check_value(c, value)) throw FieldError(c.name, "covariate '" + c.name + "': " + *why);
        profile.values.push_back(std::move(value));
    }
    return profile;
}

CovariateProfile parse_profile_json(std::string_view json_text, const CovariateSchema& schema) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("profile is not valid JSON: ") + e.what());
    }
    return parse_profile_json(doc, schema);
}

nlohmann::json profile_to_json(const CovariateProfile& profile, const CovariateSchema& schema) {
    if (profile.values.size() != static_cast<std::size_t>(schema.size())) {
        throw ValidationError("profile does not match the covariate schema");
    }
    json out = json::object();
    for (std::size_t q = 0; q < profile.values.size(); ++q) {
        std::visit([&](const auto& v) { out[schema[q].name] = v; }, profile.values[q]);
    }
    return out;
}

nlohmann::json report_to_json(const HierarchyReport& report, const CovariateSchema& schema) {
    json treatments = json::array();
    std::string comparator;
    for (const auto& t : report.treatments) {
        if (t.index == report.comparator) comparator = t.label;
        treatments.push_back({
            {"index", t.index},
            {"label", t.label},
            {"sucra", t.sucra},
            {"mean_rank", t.mean_rank},
            {"position", t.position},
            {"sucra_tie", t.sucra_tie},
            {"effect_mean", t.effect_mean},
            {"ci_low", t.ci_low},
            {"ci_high", t.ci_high},
        });
    }
    return {
        {"treatments", std::move(treatments)},
        {"rank_probabilities", rows_to_json(report.rank_matrix.probabilities)},
        {"beat_probabilities", rows_to_json(report.beat_probabilities)},
        {"comparator", comparator},
        {"direction", std::string(to_string(report.direction))},
        {"metadata",
         {{"seed", report.seed},
          {"n_samples", report.n_samples},
          {"ci_level", report.ci_level},
          {"tie_count", report.rank_matrix.tie_count},
          {"profile", profile_to_json(report.profile, schema)}}},
    };
}

std::string write_report_json(const HierarchyReport& report, const CovariateSchema& schema) {
    return report_to_json(report, schema).dump();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

}  // namespace rankforge
