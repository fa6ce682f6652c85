#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "rankforge/io.hpp"

namespace rankforge {

inline constexpr std::size_t kDefaultSamples = 100'000;
inline constexpr std::size_t kMaxSamples = 1'000'000;

struct HttpResponse {
    int status = 200;
    std::string body;
};

struct ServiceOptions {
    std::string cors_origin = "*";
};

/// Stateless what-if API over one immutable model. Every handler is const and
/// safe to call concurrently.
///
///   GET  /health     {status, model_digest}
///   GET  /model      treatments, covariate schema, direction, default comparator
///   POST /hierarchy  {profile, n_samples?, seed?, comparator?} -> report
///   POST /compare    {profile_a, profile_b, n_samples?, seed?, comparator?}
///                    -> {report_a, report_b, rank_deltas}
///
/// Errors carry {"error": {"code", "message", "field"?}}: 400 for malformed
/// requests and profile errors, 422 for n_samples outside 1..1e6, 404 for
/// unknown routes.
class HierarchyService {
public:
    explicit HierarchyService(ModelArtifact model);

    HttpResponse health() const;
    HttpResponse model_info() const;
    HttpResponse hierarchy(std::string_view body) const;
    HttpResponse compare(std::string_view body) const;
    HttpResponse handle(std::string_view method, std::string_view path, std::string_view body) const;

    const ModelArtifact& model() const noexcept { return model_; }
    const std::string& digest() const noexcept { return digest_; }

private:
    ModelArtifact model_;
    std::string digest_;
};

class BindError : public Error {
public:
    using Error::Error;
};

/// HTTP/1.1 front end for a HierarchyService.
class HttpServer {
public:
    HttpServer(const HierarchyService& service, ServiceOptions options = {});
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Throws BindError.
    void bind(const std::string& host, int port);
    int port() const noexcept { return port_; }

    /// Serves until stop() is called from another thread.
    void run();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace rankforge
