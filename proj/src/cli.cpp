#include "rankforge/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "rankforge/digest.hpp"
#include "rankforge/io.hpp"
#include "rankforge/log.hpp"
#include "rankforge/service.hpp"

namespace rankforge {
namespace {

constexpr const char* kToolName = "rankforge 0.1.0";

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct FitArgs {
    std::string ipd;
    std::string schema;
    double prior_sd = kDefaultPriorSd;
    std::string out;
};

int cmd_fit(const FitArgs& args, std::ostream& out) {
    if (!(args.prior_sd > 0) || !std::isfinite(args.prior_sd)) {
        throw ValidationError("--prior-sd must be > 0");
    }
    const std::string ipd_bytes = read_file(args.ipd);
    const SchemaConfig config = parse_schema_config(read_file(args.schema));
    const IPDDataset dataset = parse_ipd_csv(ipd_bytes, config);
    for (const auto& w : validate_dataset(dataset).warnings()) spdlog::warn("{}", w);

    const auto fits = fit_all_studies(dataset);
    const Layout network = network_layout(dataset.treatments, dataset.schema);
    std::vector<ConsistencyDesign> designs;
    for (const auto& fit : fits) designs.push_back(build_consistency_design(fit, network));
    const auto prior = GaussianPrior::independent(network.size(), args.prior_sd);
    const auto posterior = combine(fits, designs, network, prior);

    ModelArtifact artifact;
    artifact.treatments = dataset.treatments;
    artifact.schema = dataset.schema;
    artifact.direction = dataset.direction;
    artifact.posterior = posterior;
    artifact.stage1 = fits;
    artifact.provenance = {utc_now(), sha256_hex(ipd_bytes), kToolName};
    const std::string bytes = write_model(artifact);
    write_file(args.out, bytes);

    std::ostringstream summary;
    for (const auto& fit : fits) {
        summary << "study " << fit.study << ": reference " << dataset.treatments.label(fit.reference)
                << ", contrasts [";
        for (std::size_t i = 0; i < fit.layout.treatments.size(); ++i) {
            summary << (i ? ", " : "") << dataset.treatments.label(fit.layout.treatments[i]);
        }
        summary << "], n=" << fit.n_records << ", residual variance " << fit.residual_variance;
        if (fit.jitter > 0) summary << ", covariance jitter " << fit.jitter;
        summary << "\n";
    }
    summary << "estimability: " << network.size() << " basic parameters identified by " << fits.size()
            << " studies; posterior condition number " << std::setprecision(3)
            << posterior_condition_number(posterior) << "\n";
    summary << "wrote " << args.out << " (sha256 " << sha256_hex(bytes) << ")\n";
    out << summary.str();
    return kExitOk;
}

struct RankArgs {
    std::string model;
    std::string profile;
    std::size_t samples = kDefaultSamples;
    std::uint64_t seed = 0;
    std::string comparator;
    std::string format = "json";
};

std::string format_table(const HierarchyReport& report) {
    std::size_t width = std::string_view("Treatment").size();
    for (const auto& t : report.treatments) width = std::max(width, t.label.size());
    std::ostringstream table;
    table << std::left << std::setw(static_cast<int>(width)) << "Treatment" << " | SUCRA | Rank\n";
    for (int idx : report.order()) {
        const auto& t = report.treatments[static_cast<std::size_t>(idx - 1)];
        table << std::left << std::setw(static_cast<int>(width)) << t.label << " | " << std::fixed
              << std::setprecision(2) << std::setw(5) << t.sucra << " | " << t.position << "\n";
    }
    return table.str();
}

int cmd_rank(const RankArgs& args, std::ostream& out) {
    if (args.samples < 1 || args.samples > kMaxSamples) throw ValidationError("--samples must be in 1..1000000");
    if (args.format != "json" && args.format != "table") throw ValidationError("--format must be json or table");
    const ModelArtifact model = read_model(read_file(args.model));
    const CovariateProfile profile = parse_profile_json(std::string_view(read_file(args.profile)), model.schema);
    HierarchyOptions options;
    if (!args.comparator.empty()) {
        auto idx = model.treatments.find(args.comparator);
        if (!idx) throw FieldError("comparator", "unknown comparator '" + args.comparator + "'");
        options.comparator = *idx;
    }
    const auto report = personalized_hierarchy(model.posterior, profile, model.schema, model.treatments,
                                               model.direction, args.samples, args.seed, options);
    out << (args.format == "json" ? write_report_json(report, model.schema) + "\n" : format_table(report));
    return kExitOk;
}

struct ServeArgs {
    std::string model;
    std::string listen = "127.0.0.1:8080";
    std::string cors_origin = "*";
};

std::pair<std::string, int> split_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw ValidationError("--listen must look like host:port");
    const std::string host = listen.substr(0, colon);
    int port = -1;
    try {
        std::size_t used = 0;
        port = std::stoi(listen.substr(colon + 1), &used);
        if (used != listen.size() - colon - 1) port = -1;
    } catch (const std::exception&) {
        port = -1;
    }
    if (host.empty() || port < 0 || port > 65535) throw ValidationError("--listen must look like host:port");
    return {host, port};
}

int cmd_serve(const ServeArgs& args, std::ostream& out) {
    const auto [host, port] = split_listen(args.listen);
    const HierarchyService service(read_model(read_file(args.model)));
    HttpServer server(service, ServiceOptions{args.cors_origin});

    // Signals are consumed by a watcher thread; the mask is inherited by the
    // server's worker threads created after this point.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigset_t previous;
    pthread_sigmask(SIG_BLOCK, &signals, &previous);

    try {
        server.bind(host, port);
    } catch (...) {
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
        throw;
    }
    out << "serving model " << service.digest() << " on http://" << host << ":" << server.port() << std::endl;

    std::atomic<bool> done{false};
    std::thread watcher([&] {
        const timespec tick{0, 200'000'000};
        while (!done.load()) {
            if (sigtimedwait(&signals, nullptr, &tick) > 0) {
                spdlog::info("signal received, shutting down");
                server.stop();
                return;
            }
        }
    });
    server.run();
    done = true;
    watcher.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    init_logging();

    CLI::App app{"Personalized treatment hierarchies from IPD network meta-analysis", "rankforge"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the two-stage model and write a model artifact");
    fit_cmd->add_option("--ipd", fit.ipd, "IPD CSV file")->required();
    fit_cmd->add_option("--schema", fit.schema, "Schema config JSON")->required();
    fit_cmd->add_option("--prior-sd", fit.prior_sd, "Prior standard deviation per coefficient")
        ->default_val(kDefaultPriorSd);
    fit_cmd->add_option("--out", fit.out, "Model artifact path")->required();

    RankArgs rank;
    auto* rank_cmd = app.add_subcommand("rank", "Compute a personalized hierarchy for a covariate profile");
    rank_cmd->add_option("--model", rank.model, "Model artifact")->required();
    rank_cmd->add_option("--profile", rank.profile, "Profile JSON")->required();
    rank_cmd->add_option("--samples", rank.samples, "Posterior draws")->default_val(kDefaultSamples);
    rank_cmd->add_option("--seed", rank.seed, "Random seed")->default_val(0);
    rank_cmd->add_option("--comparator", rank.comparator, "Comparator treatment label (default: treatment 1)");
    rank_cmd->add_option("--format", rank.format, "json or table")->default_val("json");

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the what-if HTTP API");
    serve_cmd->add_option("--model", serve.model, "Model artifact")->required();
    serve_cmd->add_option("--listen", serve.listen, "host:port")->default_val("127.0.0.1:8080");
    serve_cmd->add_option("--cors-origin", serve.cors_origin, "Access-Control-Allow-Origin value")
        ->default_val("*");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (fit_cmd->parsed()) return cmd_fit(fit, out);
        if (rank_cmd->parsed()) return cmd_rank(rank, out);
        if (serve_cmd->parsed()) return cmd_serve(serve, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const BindError& e) {
        err << "error: " << e.what() << "\n";
        return kExitBind;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

}  // namespace rankforge
