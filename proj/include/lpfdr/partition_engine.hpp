#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpfdr/lp_model.hpp"

namespace lpfdr {

// One worker's share of the p-values. z_signs optionally tags each value with
// the sign of the originating z-statistic (+1/-1, 0 when unknown) so reports
// can split rejections by tail; empty when values were ingested raw.
struct PValuePartition {
    std::string id;
    std::vector<double> values;
    std::vector<std::int8_t> z_signs;
    std::string origin;  // source path, informational
};

// Round-1 aggregate: raw first and second moments.
struct MomentSummary {
    std::string id;
    std::int64_t n = 0;
    double m1 = 0.0;
    double m2 = 0.0;
};

// Round-2 aggregate: LP coefficients in both bases plus the H-statistic,
// H = sum_j |LP_unif[j]|^2.
struct LPSummary {
    std::string id;
    std::int64_t n = 0;
    LPCoefficients lp_beta;
    LPCoefficients lp_unif;
    double h_statistic = 0.0;
};

MomentSummary summarize_moments(const PValuePartition& p);

struct MergedMoments {
    std::int64_t n_total = 0;
    double m1 = 0.0;
    double m2 = 0.0;
};

// Size-weighted moment reduction in ascending-id order with compensated
// summation; duplicate ids are an error.
MergedMoments merge_moments(const std::vector<MomentSummary>& summaries);

LPSummary summarize_lp(const PValuePartition& p, const BetaParams& carrier, int m);

enum class LPChannel { Beta, Uniform };

// Coefficient-wise weighted mean LP[j] = sum_l (n_l/N) LP_l[j], ascending-id
// order, compensated. All summaries must share the basis and the order m.
LPCoefficients merge_lp(const std::vector<LPSummary>& summaries,
                        LPChannel channel = LPChannel::Beta);

// Max absolute gap over the grid between sum_l pi_l d_l(u) and d_global(u),
// both evaluated in raw (unclipped) form. All models must share the carrier.
double superposition_check(const std::vector<std::pair<double, SkewBetaModel>>& locals,
                           const SkewBetaModel& global, std::span<const double> grid);

// Single-machine reference: moments -> carrier fit -> LP -> AIC -> model on
// the pooled sample. The distributed path must reproduce this exactly.
SkewBetaModel centralized_oracle(std::span<const double> all_values, int m,
                                 std::optional<double> eta_override = std::nullopt);

// Two-group per-covariate moment aggregates for distributed test statistics.
struct GroupMomentSummary {
    std::string id;
    std::int64_t n0 = 0;
    std::int64_t n1 = 0;
    std::vector<double> mean0, mean1;  // per covariate
    std::vector<double> ssq0, ssq1;    // per covariate raw sums of squares
};

struct PooledGroupStats {
    std::int64_t n0 = 0;
    std::int64_t n1 = 0;
    std::vector<double> mean0, var0, mean1, var1;
    std::vector<double> t;  // pooled-variance two-sample t
    std::vector<double> z;  // Welch z
};

// Pools group moments across partitions (size-weighted means, exact variance
// reconstruction from sums of squares) and emits two-sample statistics.
PooledGroupStats merge_group_moments(const std::vector<GroupMomentSummary>& summaries);

}  // namespace lpfdr
