#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lpfdr/diagnostics.hpp"
#include "lpfdr/inference.hpp"
#include "lpfdr/io.hpp"

namespace lpfdr {

// Full three-round coordinator run. Partitions come either from files
// (`sources`) or, for in-process runs only, from `memory_partitions`.
//
// The two modes share every computation: InProcess routes the identical wire
// messages through the worker handler in this process, Workers spawns one
// short-lived `summarize` subprocess per partition per round. Outputs are
// byte-identical either way, and nothing in them records which mode ran.
struct RunConfig {
    enum class Mode { InProcess, Workers };

    std::vector<PartitionSource> sources;
    std::vector<PValuePartition> memory_partitions;
    int m = 8;
    double alpha = 0.05;
    double alpha0 = 0.5;  // higher-criticism search window
    std::optional<double> eta_override;
    std::vector<Method> methods = {Method::SmoothBH, Method::LocalFdr};
    Mode mode = Mode::InProcess;
    std::string output_dir;  // empty: compute only, write nothing
    bool svg = false;
    int threads = 0;                // 0: LPFDR_THREADS env var, else 1
    std::string worker_binary;      // empty: /proc/self/exe
};

// Bytes exchanged with each partition's worker across all three rounds
// (request and response lines including newlines). Counted identically in
// both modes so tests can assert the aggregates-only bound.
struct ProtocolStats {
    struct PerPartition {
        std::string id;
        std::uint64_t bytes_sent = 0;      // coordinator -> worker
        std::uint64_t bytes_received = 0;  // worker -> coordinator
    };
    std::vector<PerPartition> partitions;

    std::uint64_t total_bytes() const;
    std::uint64_t max_partition_bytes() const;
};

struct PipelineResult {
    MergedMoments moments;
    bool carrier_clamped = false;
    LPCoefficients raw_beta;  // merged coefficients before selection
    LPCoefficients raw_unif;
    double h_global = 0.0;  // sum of squared merged uniform-basis coefficients
    SkewBetaModel model;
    std::vector<LPSummary> summaries;  // ascending id
    std::vector<RejectionReport> reports;
    std::vector<HChartPoint> hchart;
    double hchart_reference = 0.0;
    std::vector<InfoMapPoint> infomap;
    ProtocolStats protocol;
    std::string report_path;  // set when output_dir was given
};

PipelineResult run_pipeline(const RunConfig& config);

// Handles one wire line against one partition and returns the response line
// (no trailing newline). Both execution modes funnel through this.
std::string worker_handle_line(const std::string& line, const PValuePartition& partition);

// Protocol loop for the `summarize` subcommand: reads envelope lines from
// `in`, re-ingests the source per message (spawns are stateless), answers on
// `out`. Returns the process exit code.
int worker_serve(const PartitionSource& source, std::istream& in, std::ostream& out);

}  // namespace lpfdr
