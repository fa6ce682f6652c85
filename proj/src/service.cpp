#include "rankforge/service.hpp"

#include <random>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "rankforge/digest.hpp"

namespace rankforge {

using nlohmann::json;

namespace {

struct RequestError {
    int status;
    std::string code;
    std::string message;
    std::string field;
};

HttpResponse json_response(int status, const json& body) { return {status, body.dump()}; }

HttpResponse error_response(const RequestError& e) {
    json err{{"code", e.code}, {"message", e.message}};
    if (!e.field.empty()) err["field"] = e.field;
    return json_response(e.status, json{{"error", std::move(err)}});
}

json parse_body(std::string_view body) {
    try {
        json doc = json::parse(body);
        if (!doc.is_object()) throw RequestError{400, "invalid_request", "request body must be a JSON object", ""};
        return doc;
    } catch (const json::exception& e) {
        throw RequestError{400, "invalid_json", std::string("request body is not valid JSON: ") + e.what(), ""};
    }
}

std::size_t read_n_samples(const json& doc) {
    auto it = doc.find("n_samples");
    if (it == doc.end()) return kDefaultSamples;
    if (!it->is_number()) throw RequestError{400, "invalid_request", "n_samples must be a number", "n_samples"};
    const double n = it->get<double>();
    if (!it->is_number_integer() || n < 1 || n > static_cast<double>(kMaxSamples)) {
        throw RequestError{422, "out_of_range", "n_samples must be an integer in 1..1000000", "n_samples"};
    }
    return it->get<std::size_t>();
}

std::uint64_t read_seed(const json& doc) {
    auto it = doc.find("seed");
    if (it == doc.end() || it->is_null()) {
        std::random_device entropy;
        return (static_cast<std::uint64_t>(entropy()) << 32) ^ entropy();
    }
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
        throw RequestError{400, "invalid_request", "seed must be a non-negative integer", "seed"};
    }
    return it->get<std::uint64_t>();
}

int read_comparator(const json& doc, const TreatmentSet& treatments) {
    auto it = doc.find("comparator");
    if (it == doc.end() || it->is_null()) return 1;
    if (!it->is_string()) throw RequestError{400, "invalid_request", "comparator must be a treatment label", "comparator"};
    auto idx = treatments.find(it->get<std::string>());
    if (!idx) {
        throw RequestError{400, "unknown_treatment", "unknown comparator '" + it->get<std::string>() + "'",
                           "comparator"};
    }
    return *idx;
}

CovariateProfile read_profile(const json& doc, const char* key, const CovariateSchema& schema) {
    auto it = doc.find(key);
    if (it == doc.end()) throw RequestError{400, "invalid_request", std::string("missing '") + key + "'", key};
    try {
        return parse_profile_json(*it, schema);
    } catch (const FieldError& e) {
        throw RequestError{400, "invalid_profile", std::string(key) + ": " + e.what(),
                           std::string(key) + "." + e.field()};
    } catch (const ValidationError& e) {
        throw RequestError{400, "invalid_profile", std::string(key) + ": " + e.what(), key};
    }
}

}  // namespace

HierarchyService::HierarchyService(ModelArtifact model)
    : model_(std::move(model)), digest_(sha256_hex(write_model(model_))) {}

HttpResponse HierarchyService::health() const {
    return json_response(200, json{{"status", "ok"}, {"model_digest", digest_}});
}

HttpResponse HierarchyService::model_info() const {
    json treatments = json::array();
    for (int g = 1; g <= model_.treatments.size(); ++g) {
        treatments.push_back({{"index", g}, {"label", model_.treatments.label(g)}});
    }
    json covariates = schema_to_json(model_.schema);
    for (std::size_t q = 0; q < covariates.size(); ++q) {
        if (model_.schema[q].kind == CovariateKind::binary) covariates[q]["levels"] = {0, 1};
    }
    return json_response(200, json{
                                  {"treatments", std::move(treatments)},
                                  {"covariates", std::move(covariates)},
                                  {"direction", std::string(to_string(model_.direction))},
                                  {"comparator_default", model_.treatments.label(1)},
                                  {"n_samples_default", kDefaultSamples},
                                  {"n_samples_max", kMaxSamples},
                                  {"model_digest", digest_},
                              });
}

HttpResponse HierarchyService::hierarchy(std::string_view body) const {
    try {
        const json doc = parse_body(body);
        const auto profile = read_profile(doc, "profile", model_.schema);
        const auto n = read_n_samples(doc);
        const auto seed = read_seed(doc);
        HierarchyOptions options;
        options.comparator = read_comparator(doc, model_.treatments);
        const auto report = personalized_hierarchy(model_.posterior, profile, model_.schema, model_.treatments,
                                                   model_.direction, n, seed, options);
        return json_response(200, report_to_json(report, model_.schema));
    } catch (const RequestError& e) {
        return error_response(e);
    } catch (const NumericError& e) {
        spdlog::error("hierarchy: {}", e.what());
        return error_response({500, "numeric_error", e.what(), ""});
    }
}

HttpResponse HierarchyService::compare(std::string_view body) const {
    try {
        const json doc = parse_body(body);
        const auto profile_a = read_profile(doc, "profile_a", model_.schema);
        const auto profile_b = read_profile(doc, "profile_b", model_.schema);
        const auto n = read_n_samples(doc);
        const auto seed = read_seed(doc);
        HierarchyOptions options;
        options.comparator = read_comparator(doc, model_.treatments);
        const auto a = personalized_hierarchy(model_.posterior, profile_a, model_.schema, model_.treatments,
                                              model_.direction, n, seed, options);
        const auto b = personalized_hierarchy(model_.posterior, profile_b, model_.schema, model_.treatments,
                                              model_.direction, n, seed, options);
        json deltas = json::array();
        for (std::size_t t = 0; t < a.treatments.size(); ++t) {
            deltas.push_back({{"label", a.treatments[t].label},
                              {"position_a", a.treatments[t].position},
                              {"position_b", b.treatments[t].position},
                              {"delta", b.treatments[t].position - a.treatments[t].position}});
        }
        return json_response(200, json{{"report_a", report_to_json(a, model_.schema)},
                                       {"report_b", report_to_json(b, model_.schema)},
                                       {"rank_deltas", std::move(deltas)}});
    } catch (const RequestError& e) {
        return error_response(e);
    } catch (const NumericError& e) {
        spdlog::error("compare: {}", e.what());
        return error_response({500, "numeric_error", e.what(), ""});
    }
}

HttpResponse HierarchyService::handle(std::string_view method, std::string_view path, std::string_view body) const {
    if (method == "GET" && path == "/health") return health();
    if (method == "GET" && path == "/model") return model_info();
    if (method == "POST" && path == "/hierarchy") return hierarchy(body);
    if (method == "POST" && path == "/compare") return compare(body);
    const bool known = path == "/health" || path == "/model" || path == "/hierarchy" || path == "/compare";
    if (known) return error_response({405, "method_not_allowed", std::string(method) + " not allowed on " + std::string(path), ""});
    return error_response({404, "not_found", "no route for " + std::string(path), ""});
}

struct HttpServer::Impl {
    httplib::Server server;
};

HttpServer::HttpServer(const HierarchyService& service, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
    const std::string origin = options.cors_origin;
    auto dispatch = [&service, origin](const httplib::Request& req, httplib::Response& res) {
        const auto out = service.handle(req.method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body, "application/json");
        if (!origin.empty()) res.set_header("Access-Control-Allow-Origin", origin);
        spdlog::info("{} {} -> {}", req.method, req.path, out.status);
    };
    // httplib defaults to SO_REUSEPORT, which lets a second server share a busy port.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    impl_->server.Get(".*", dispatch);
    impl_->server.Post(".*", dispatch);
    impl_->server.Put(".*", dispatch);
    impl_->server.Delete(".*", dispatch);
    impl_->server.Options(".*", [origin](const httplib::Request&, httplib::Response& res) {
        if (!origin.empty()) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        }
        res.status = 204;
    });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(host);
        if (port_ < 0) throw BindError("cannot bind " + host + " to any port");
    } else {
        if (!impl_->server.bind_to_port(host, port)) {
            throw BindError("cannot bind " + host + ":" + std::to_string(port));
        }
        port_ = port;
    }
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace rankforge
