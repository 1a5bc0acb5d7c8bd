#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lpfdr/partition_engine.hpp"

namespace lpfdr {

enum class Method { SmoothBH, ClassicalBH, HigherCriticism, LocalFdr, WeightedBH };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct PartitionDecision {
    // p-value cutoff for threshold methods; the density cutoff for LocalFdr.
    double threshold = 0.0;
    std::vector<std::int64_t> rejected_indices;
    std::int64_t n_rejected = 0;
    std::int64_t n_left = 0;   // rejected values whose originating z < 0
    std::int64_t n_right = 0;  // rejected values whose originating z > 0
};

// One decision method's outcome across all partitions. For HigherCriticism
// the alpha field carries alpha0 (the search-window fraction) and eta_used is
// NaN; the tail splits are zero when values were ingested without z-scores.
struct RejectionReport {
    Method method = Method::SmoothBH;
    double alpha = 0.0;
    double eta_used = 1.0;
    double global_threshold = 0.0;
    std::map<std::string, PartitionDecision> per_partition;
    std::int64_t total_rejected = 0;
    std::int64_t total_left = 0;
    std::int64_t total_right = 0;
};

// u_max = sup { u in (0,1] : D(u)/u >= eta/alpha }, located by a 4096-point
// log-spaced scan refined by bisection (absolute accuracy 1e-10); 0 when no
// point qualifies. The overload taking a callable accepts any CDF, e.g. an
// empirical one.
double smooth_bh_threshold(const std::function<double(double)>& cdf, double eta, double alpha);
double smooth_bh_threshold(const SkewBetaModel& model, double eta, double alpha);

struct BHResult {
    std::int64_t k = 0;        // number of order statistics passing the step-up rule
    double threshold = 0.0;    // u_(k), 0 when nothing is rejected
    std::vector<std::int64_t> rejected;  // indices into the pooled input
};

// Step-up rule on the pooled sample: largest i with D~(u_(i))/u_(i) >= eta/alpha,
// ties resolved by rejecting every p-value <= u_(k).
BHResult classical_bh(std::span<const double> pooled, double eta, double alpha);

struct HCResult {
    std::int64_t k = 0;
    double threshold = 0.0;
    double statistic = 0.0;
    std::vector<std::int64_t> rejected;
};

// Higher criticism over the first floor(alpha0 * N) order statistics (at
// least one): argmax of sqrt(N) (D~(u_(i)) - u_(i)) / sqrt(u_(i)(1-u_(i))).
HCResult higher_criticism(std::span<const double> pooled, double alpha0);

// Model-based variant: maximizes the same statistic with D-hat on a fixed
// log-spaced grid restricted to { u : D-hat(u) <= alpha0 }.
double higher_criticism_smooth_threshold(const SkewBetaModel& model, double alpha0);

// Indices with density_eval(u) strictly above eta / (2 alpha).
std::vector<std::int64_t> local_fdr_reject(const SkewBetaModel& model, double eta, double alpha,
                                           const PValuePartition& partition);

// Partition weights w_l = (pi_l)^-1 H_l / sum_l H_l (so sum_l pi_l w_l = 1).
// When every H vanishes the weights fall back to 1 and *degenerate reports it.
std::map<std::string, double> compute_weights(const std::vector<LPSummary>& summaries,
                                              bool* degenerate = nullptr);

// Per-partition smooth-BH cutoffs at level eta / (w_l alpha); w_l = 0 maps to
// a zero threshold (nothing rejected there).
std::map<std::string, double> weighted_bh_thresholds(const SkewBetaModel& model,
                                                     const std::vector<LPSummary>& summaries,
                                                     double eta, double alpha);

// Report builders over in-memory partitions.
PartitionDecision apply_threshold_to_partition(const PValuePartition& p, double u_max);
PartitionDecision apply_local_fdr_to_partition(const SkewBetaModel& model, double eta, double alpha,
                                               const PValuePartition& p);

RejectionReport apply_global_threshold(Method method, double u_max, double alpha, double eta_used,
                                       const std::vector<PValuePartition>& partitions);
RejectionReport local_fdr_report(const SkewBetaModel& model, double eta, double alpha,
                                 const std::vector<PValuePartition>& partitions);
RejectionReport weighted_bh(const SkewBetaModel& model, const std::vector<LPSummary>& summaries,
                            const std::vector<PValuePartition>& partitions, double eta,
                            double alpha);

}  // namespace lpfdr
