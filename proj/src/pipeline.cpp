#include "lpfdr/pipeline.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "lpfdr/wire.hpp"

namespace lpfdr {

namespace {

int thread_budget(const RunConfig& config) {
    if (config.threads > 0) return config.threads;
    if (const char* env = std::getenv("LPFDR_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// Runs fn(0..n-1), fanning out over `budget` threads when budget > 1. Work
// items write to disjoint slots, so scheduling order cannot affect results.
void parallel_for(std::size_t n, int budget, const std::function<void(std::size_t)>& fn) {
    if (budget <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto drain = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(budget), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(drain);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// A worker that exits before draining its stdin must surface as an error
// return from write(), not a fatal signal.
void ignore_sigpipe() {
    static const bool installed = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)installed;
}

[[noreturn]] void throw_errno(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

void close_fd(int& fd) {
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

// Spawns `binary summarize --input ... --kind ... [--id ...]`, writes the one
// request line, closes the pipe, and reads the worker's whole answer. The
// request always fits the pipe buffer, so write-then-read cannot deadlock.
std::string exec_worker(const std::string& binary, const PartitionSource& src,
                        const std::string& request_line) {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw_errno("pipe");
    if (::pipe(from_child) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw_errno("pipe");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        throw_errno("fork");
    }
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::close(to_child[0]);
        ::close(to_child[1]);
        ::close(from_child[0]);
        ::close(from_child[1]);
        std::vector<std::string> args = {binary,       "summarize", "--input",
                                         src.path,     "--kind",    kind_name(src.kind)};
        if (!src.id.empty()) {
            args.push_back("--id");
            args.push_back(src.id);
        }
        std::vector<char*> argv;
        argv.reserve(args.size() + 1);
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        ::execv(binary.c_str(), argv.data());
        const char* msg = "exec of worker binary failed\n";
        [[maybe_unused]] ssize_t ignored = ::write(STDERR_FILENO, msg, std::strlen(msg));
        ::_exit(127);
    }
    int in_fd = to_child[1];
    int out_fd = from_child[0];
    ::close(to_child[0]);
    ::close(from_child[1]);

    std::string response;
    try {
        const std::string msg = request_line + "\n";
        std::size_t off = 0;
        while (off < msg.size()) {
            const ssize_t w = ::write(in_fd, msg.data() + off, msg.size() - off);
            if (w < 0) {
                if (errno == EINTR) continue;
                throw_errno("write to worker");
            }
            off += static_cast<std::size_t>(w);
        }
        close_fd(in_fd);
        char buf[65536];
        while (true) {
            const ssize_t r = ::read(out_fd, buf, sizeof buf);
            if (r < 0) {
                if (errno == EINTR) continue;
                throw_errno("read from worker");
            }
            if (r == 0) break;
            response.append(buf, static_cast<std::size_t>(r));
        }
        close_fd(out_fd);
    } catch (...) {
        close_fd(in_fd);
        close_fd(out_fd);
        int status = 0;
        while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
        }
        throw;
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw std::runtime_error("worker for '" + src.path + "' failed (status " +
                                 std::to_string(status) + ")");
    }
    while (!response.empty() && (response.back() == '\n' || response.back() == '\r')) {
        response.pop_back();
    }
    if (response.empty()) {
        throw std::runtime_error("worker for '" + src.path + "' returned no response");
    }
    if (response.find('\n') != std::string::npos) {
        throw std::runtime_error("worker for '" + src.path + "' returned extra lines");
    }
    return response;
}

// Visual aid for the H chart: the 95% null quantile of H for a typical
// (median-size) partition. Simulated exactly for small partitions; for large
// ones n*H is approximately chi-square with m degrees of freedom, so the
// Wilson-Hilferty quantile stands in.
double h_reference(const std::vector<LPSummary>& summaries, int m) {
    if (summaries.empty()) return 0.0;
    std::vector<std::int64_t> sizes;
    sizes.reserve(summaries.size());
    for (const auto& s : summaries) sizes.push_back(s.n);
    std::sort(sizes.begin(), sizes.end());
    const std::int64_t n_med = sizes[sizes.size() / 2];
    if (n_med <= 20000) return h_null_quantile(n_med, m, 0.95, 500, 24601);
    const double q = std_normal_quantile(0.95);
    const double a = 2.0 / (9.0 * m);
    const double chi = m * std::pow(1.0 - a + q * std::sqrt(a), 3.0);
    return chi / static_cast<double>(n_med);
}

void expect_payload_type(const wire::json& payload, const char* want) {
    const std::string got = payload.at("type").get<std::string>();
    if (got != want) {
        throw std::runtime_error("protocol: expected payload type '" + std::string(want) +
                                 "', got '" + got + "'");
    }
}

void write_outputs_inner(const RunConfig& config, PipelineResult& result,
                         const std::filesystem::path& dir, const std::string& report_path,
                         std::vector<std::string>& written);

void write_outputs(const RunConfig& config, PipelineResult& result) {
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    const fs::path dir(config.output_dir);
    const std::string report_path = (dir / "report.json").string();
    // Drop any previous report first, and write the new one last: a present
    // report.json must imply a complete, consistent directory. If any write
    // fails, everything this run already produced is removed again.
    fs::remove(report_path);
    std::vector<std::string> written;
    try {
        write_outputs_inner(config, result, dir, report_path, written);
    } catch (...) {
        for (const auto& path : written) {
            std::error_code ec;
            fs::remove(path, ec);
        }
        throw;
    }
    result.report_path = report_path;
}

void write_outputs_inner(const RunConfig& config, PipelineResult& result,
                         const std::filesystem::path& dir, const std::string& report_path,
                         std::vector<std::string>& written) {
    auto track = [&written](std::string path) -> const std::string& {
        written.push_back(std::move(path));
        return written.back();
    };

    write_hchart_csv(result.hchart, track((dir / "hchart.csv").string()));
    write_infomap_csv(result.infomap, track((dir / "infomap.csv").string()));
    if (config.svg) {
        write_hchart_svg(result.hchart, result.hchart_reference,
                         track((dir / "hchart.svg").string()));
        write_infomap_svg(result.infomap, track((dir / "infomap.svg").string()));
    }

    atomic_write_file(track((dir / "model.json").string()),
                      wire::model_to_json(result.model).dump(2) + "\n");

    std::string lines;
    for (const auto& s : result.summaries) {
        lines += wire::lp_summary_to_json(s).dump();
        lines += '\n';
    }
    atomic_write_file(track((dir / "summaries.jsonl").string()), lines);

    if (config.mode == RunConfig::Mode::Workers) {
        wire::json proto;
        wire::json parts = wire::json::array();
        for (const auto& p : result.protocol.partitions) {
            wire::json e;
            e["id"] = p.id;
            e["bytes_sent"] = p.bytes_sent;
            e["bytes_received"] = p.bytes_received;
            parts.push_back(std::move(e));
        }
        proto["partitions"] = std::move(parts);
        proto["total_bytes"] = result.protocol.total_bytes();
        atomic_write_file(track((dir / "protocol.json").string()), proto.dump(2) + "\n");
    }

    wire::json report;
    report["schema_version"] = wire::kSchemaVersion;
    report["n_total"] = result.moments.n_total;
    report["m"] = config.m;
    wire::json carrier;
    carrier["gamma"] = result.model.carrier.gamma;
    carrier["beta"] = result.model.carrier.beta;
    carrier["clamped"] = result.carrier_clamped;
    report["carrier"] = std::move(carrier);
    wire::json moments;
    moments["m1"] = result.moments.m1;
    moments["m2"] = result.moments.m2;
    report["moments"] = std::move(moments);
    report["model"] = wire::model_to_json(result.model);
    report["h_global"] = result.h_global;
    wire::json parts = wire::json::array();
    for (const auto& s : result.summaries) {
        wire::json e;
        e["id"] = s.id;
        e["n"] = s.n;
        e["h"] = s.h_statistic;
        parts.push_back(std::move(e));
    }
    report["partitions"] = std::move(parts);
    wire::json methods = wire::json::array();
    for (const auto& r : result.reports) methods.push_back(wire::rejection_report_to_json(r));
    report["methods"] = std::move(methods);
    atomic_write_file(report_path, report.dump(2) + "\n");
}

}  // namespace

std::uint64_t ProtocolStats::total_bytes() const {
    std::uint64_t total = 0;
    for (const auto& p : partitions) total += p.bytes_sent + p.bytes_received;
    return total;
}

std::uint64_t ProtocolStats::max_partition_bytes() const {
    std::uint64_t worst = 0;
    for (const auto& p : partitions) worst = std::max(worst, p.bytes_sent + p.bytes_received);
    return worst;
}

std::string worker_handle_line(const std::string& line, const PValuePartition& partition) {
    const wire::ParsedMessage msg = wire::parse_message(line);
    switch (msg.round) {
        case 1:
            expect_payload_type(msg.payload, "request_moments");
            return wire::make_round1_response(summarize_moments(partition));
        case 2: {
            expect_payload_type(msg.payload, "carrier");
            const BetaParams carrier{msg.payload.at("gamma").get<double>(),
                                     msg.payload.at("beta").get<double>()};
            const int m = msg.payload.at("m").get<int>();
            return wire::make_round2_response(summarize_lp(partition, carrier, m));
        }
        case 3: {
            const wire::ThresholdBroadcast b = wire::threshold_broadcast_from_json(msg.payload);
            const PartitionDecision d =
                b.method == Method::LocalFdr
                    ? apply_local_fdr_to_partition(*b.model, b.eta, b.alpha, partition)
                    : apply_threshold_to_partition(partition, b.u_max);
            return wire::make_round3_response(partition.id, b.method, d);
        }
        default:
            throw std::logic_error("worker_handle_line: unreachable round");
    }
}

int worker_serve(const PartitionSource& source, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        // Re-ingest per message: each round sees the file fresh, exactly as a
        // newly spawned process would.
        const PValuePartition partition = ingest_partition(source.path, source.kind, source.id);
        out << worker_handle_line(line, partition) << '\n';
        out.flush();
        if (!out) throw std::runtime_error("worker: failed to write response");
    }
    return 0;
}

PipelineResult run_pipeline(const RunConfig& config) {
    if (config.m < 1 || config.m > kMaxOrder) {
        throw std::invalid_argument("run_pipeline: m must be in [1, " +
                                    std::to_string(kMaxOrder) + "]");
    }
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw std::invalid_argument("run_pipeline: alpha must be in (0,1)");
    }
    if (!(config.alpha0 > 0.0 && config.alpha0 <= 1.0)) {
        throw std::invalid_argument("run_pipeline: alpha0 must be in (0,1]");
    }
    const bool use_memory = !config.memory_partitions.empty();
    if (use_memory && !config.sources.empty()) {
        throw std::invalid_argument("run_pipeline: give file sources or in-memory partitions, not both");
    }
    if (!use_memory && config.sources.empty()) {
        throw std::invalid_argument("run_pipeline: no partitions");
    }
    const bool workers = config.mode == RunConfig::Mode::Workers;
    if (workers && use_memory) {
        throw std::invalid_argument("run_pipeline: worker mode needs file sources");
    }

    // Canonical method order, duplicates dropped.
    std::vector<Method> methods;
    for (Method m : {Method::SmoothBH, Method::ClassicalBH, Method::HigherCriticism,
                     Method::LocalFdr, Method::WeightedBH}) {
        if (std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end()) {
            methods.push_back(m);
        }
    }
    if (methods.empty()) {
        throw std::invalid_argument("run_pipeline: no decision methods requested");
    }
    if (std::find(methods.begin(), methods.end(), Method::ClassicalBH) != methods.end()) {
        throw std::invalid_argument(
            "run_pipeline: classical-bh needs the pooled sample and cannot run over aggregates");
    }

    // Materialize the partition list (in-process) or the effective ids (workers).
    std::vector<PValuePartition> storage;
    std::vector<const PValuePartition*> local;
    std::vector<std::string> ids;
    if (use_memory) {
        for (const auto& p : config.memory_partitions) {
            local.push_back(&p);
            ids.push_back(p.id);
        }
    } else if (!workers) {
        storage.reserve(config.sources.size());
        for (const auto& s : config.sources) {
            storage.push_back(ingest_partition(s.path, s.kind, s.id));
        }
        for (const auto& p : storage) {
            local.push_back(&p);
            ids.push_back(p.id);
        }
    } else {
        for (const auto& s : config.sources) {
            ids.push_back(s.id.empty() ? file_stem(s.path) : s.id);
        }
    }
    const std::size_t k = ids.size();

    const std::string binary = config.worker_binary.empty() ? "/proc/self/exe" : config.worker_binary;
    if (workers) ignore_sigpipe();

    PipelineResult result;
    result.protocol.partitions.resize(k);
    for (std::size_t i = 0; i < k; ++i) result.protocol.partitions[i].id = ids[i];

    auto exchange = [&](std::size_t i, const std::string& request) {
        std::string response = workers ? exec_worker(binary, config.sources[i], request)
                                       : worker_handle_line(request, *local[i]);
        result.protocol.partitions[i].bytes_sent += request.size() + 1;
        result.protocol.partitions[i].bytes_received += response.size() + 1;
        return response;
    };
    const int budget = thread_budget(config);

    // Round 1: moments -> carrier fit.
    std::vector<MomentSummary> moment_summaries(k);
    {
        const std::string request = wire::make_round1_request();
        parallel_for(k, budget, [&](std::size_t i) {
            const wire::ParsedMessage msg = wire::parse_message(exchange(i, request));
            if (msg.round != 1) throw std::runtime_error("protocol: expected a round-1 response");
            moment_summaries[i] = wire::moment_summary_from_json(msg.payload);
            if (moment_summaries[i].id != ids[i]) {
                throw std::runtime_error("protocol: partition '" + ids[i] +
                                         "' answered with id '" + moment_summaries[i].id + "'");
            }
        });
    }
    result.moments = merge_moments(moment_summaries);
    const BetaParams carrier =
        fit_beta_moments(result.moments.m1, result.moments.m2, &result.carrier_clamped);

    // Round 2: LP summaries -> merged coefficients -> selected model.
    std::vector<LPSummary> summaries(k);
    {
        const std::string request = wire::make_round2_request(carrier, config.m);
        parallel_for(k, budget, [&](std::size_t i) {
            const wire::ParsedMessage msg = wire::parse_message(exchange(i, request));
            if (msg.round != 2) throw std::runtime_error("protocol: expected a round-2 response");
            summaries[i] = wire::lp_summary_from_json(msg.payload);
            if (summaries[i].id != ids[i]) {
                throw std::runtime_error("protocol: partition '" + ids[i] +
                                         "' answered with id '" + summaries[i].id + "'");
            }
        });
    }
    std::sort(summaries.begin(), summaries.end(),
              [](const LPSummary& a, const LPSummary& b) { return a.id < b.id; });
    result.raw_beta = merge_lp(summaries, LPChannel::Beta);
    result.raw_unif = merge_lp(summaries, LPChannel::Uniform);
    result.h_global = chi_square_divergence(result.raw_unif);
    const LPCoefficients selected = select_coefficients_aic(result.raw_beta, result.moments.n_total);
    result.model =
        SkewBetaModel::build(carrier, selected, result.moments.n_total, config.eta_override);
    result.summaries = summaries;
    result.hchart = h_chart(summaries);
    result.infomap = information_map(summaries);
    result.hchart_reference = h_reference(summaries, config.m);

    // Report indices are assembled from the coordinator's own ingestion:
    // round-3 responses carry fixed-size counts only, so nothing sized by the
    // rejection list ever crosses the wire. In workers mode that means
    // ingesting each source here once as well.
    if (workers) {
        storage.reserve(config.sources.size());
        for (const auto& s : config.sources) {
            storage.push_back(ingest_partition(s.path, s.kind, s.id));
        }
        for (const auto& p : storage) local.push_back(&p);
    }

    // Round 3: one broadcast per method.
    for (Method method : methods) {
        wire::ThresholdBroadcast b;
        b.method = method;
        RejectionReport report;
        report.method = method;
        std::map<std::string, double> per_partition_cutoff;
        switch (method) {
            case Method::SmoothBH:
                b.alpha = config.alpha;
                b.eta = result.model.eta;
                b.u_max = smooth_bh_threshold(result.model, b.eta, config.alpha);
                report.alpha = config.alpha;
                report.eta_used = b.eta;
                report.global_threshold = b.u_max;
                break;
            case Method::HigherCriticism:
                b.alpha = config.alpha0;
                b.eta = 1.0;
                b.u_max = higher_criticism_smooth_threshold(result.model, config.alpha0);
                report.alpha = config.alpha0;
                report.eta_used = std::numeric_limits<double>::quiet_NaN();
                report.global_threshold = b.u_max;
                break;
            case Method::LocalFdr:
                b.alpha = config.alpha;
                b.eta = result.model.eta;
                b.model = result.model;
                report.alpha = config.alpha;
                report.eta_used = b.eta;
                report.global_threshold = b.eta / (2.0 * config.alpha);
                break;
            case Method::WeightedBH:
                b.alpha = config.alpha;
                b.eta = result.model.eta;
                per_partition_cutoff =
                    weighted_bh_thresholds(result.model, summaries, b.eta, config.alpha);
                report.alpha = config.alpha;
                report.eta_used = b.eta;
                report.global_threshold = std::numeric_limits<double>::quiet_NaN();
                break;
            case Method::ClassicalBH:
                throw std::logic_error("run_pipeline: unreachable method");
        }

        std::vector<std::string> requests(k);
        if (method == Method::WeightedBH) {
            for (std::size_t i = 0; i < k; ++i) {
                b.u_max = per_partition_cutoff.at(ids[i]);
                requests[i] = wire::make_round3_request(b);
            }
        } else {
            const std::string request = wire::make_round3_request(b);
            for (auto& r : requests) r = request;
        }

        std::vector<PartitionDecision> decisions(k);
        parallel_for(k, budget, [&](std::size_t i) {
            decisions[i] =
                method == Method::LocalFdr
                    ? apply_local_fdr_to_partition(result.model, b.eta, config.alpha, *local[i])
                    : apply_threshold_to_partition(
                          *local[i], method == Method::WeightedBH ? per_partition_cutoff.at(ids[i])
                                                                  : b.u_max);
            const wire::ParsedMessage msg = wire::parse_message(exchange(i, requests[i]));
            if (msg.round != 3) throw std::runtime_error("protocol: expected a round-3 response");
            expect_payload_type(msg.payload, "decision_counts");
            if (msg.payload.at("id").get<std::string>() != ids[i]) {
                throw std::runtime_error("protocol: partition '" + ids[i] +
                                         "' answered for a different id");
            }
            if (method_from_name(msg.payload.at("method").get<std::string>()) != method) {
                throw std::runtime_error("protocol: round-3 response method mismatch");
            }
            // The broadcast round trips bit-exactly, so the worker's counts
            // must agree with the decision recomputed here.
            const PartitionDecision acked = wire::decision_counts_from_json(msg.payload);
            if (acked.threshold != decisions[i].threshold ||
                acked.n_rejected != decisions[i].n_rejected ||
                acked.n_left != decisions[i].n_left || acked.n_right != decisions[i].n_right) {
                throw std::runtime_error("protocol: partition '" + ids[i] +
                                         "' acknowledged counts that disagree with the "
                                         "coordinator's decision");
            }
        });
        for (std::size_t i = 0; i < k; ++i) {
            report.total_rejected += decisions[i].n_rejected;
            report.total_left += decisions[i].n_left;
            report.total_right += decisions[i].n_right;
            report.per_partition.emplace(ids[i], std::move(decisions[i]));
        }
        result.reports.push_back(std::move(report));
    }

    std::sort(result.protocol.partitions.begin(), result.protocol.partitions.end(),
              [](const ProtocolStats::PerPartition& a, const ProtocolStats::PerPartition& b) {
                  return a.id < b.id;
              });

    if (!config.output_dir.empty()) write_outputs(config, result);
    return result;
}

}  // namespace lpfdr
