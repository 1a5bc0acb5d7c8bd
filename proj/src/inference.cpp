#include "lpfdr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lpfdr {

namespace {

constexpr int kScanPoints = 4096;
constexpr double kScanFloor = 1e-15;

void check_alpha(double alpha, const char* fn) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument(std::string(fn) + ": alpha must be in (0,1), got " +
                                    std::to_string(alpha));
    }
}

void check_eta(double eta, const char* fn) {
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument(std::string(fn) + ": eta must be in (0,1], got " +
                                    std::to_string(eta));
    }
}

double scan_point(int i) {
    // Log-spaced from kScanFloor up to exactly 1, dense near zero.
    return std::exp(std::log(kScanFloor) * (1.0 - static_cast<double>(i) / (kScanPoints - 1)));
}

// sup { u : cdf(u)/u >= ratio }: last qualifying point of the log grid,
// sharpened by bisection against the first non-qualifying neighbour.
double threshold_for_ratio(const std::function<double(double)>& cdf, double ratio) {
    auto qualifies = [&](double u) { return cdf(u) >= ratio * u; };
    int last = -1;
    for (int i = kScanPoints - 1; i >= 0; --i) {
        if (qualifies(scan_point(i))) {
            last = i;
            break;
        }
    }
    if (last < 0) return 0.0;
    if (last == kScanPoints - 1) return 1.0;
    double lo = scan_point(last);
    double hi = scan_point(last + 1);
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (qualifies(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

// Tie-aware empirical comparison distribution at the i-th order statistic:
// D~(u_(i)) = (#values <= u_(i)) / N, i.e. the rank of the last tie.
std::vector<double> tie_upper_cdf(const std::vector<double>& sorted) {
    const size_t n = sorted.size();
    std::vector<double> d(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
        const double v = static_cast<double>(j + 1) / static_cast<double>(n);
        for (size_t k = i; k <= j; ++k) d[k] = v;
        i = j + 1;
    }
    return d;
}

void tally_tails(const PValuePartition& p, const std::vector<std::int64_t>& rejected,
                 PartitionDecision& out) {
    if (p.z_signs.size() != p.values.size()) return;
    for (std::int64_t i : rejected) {
        if (p.z_signs[i] < 0) ++out.n_left;
        if (p.z_signs[i] > 0) ++out.n_right;
    }
}

RejectionReport assemble(Method method, double alpha, double eta_used, double global_threshold,
                         const std::vector<PValuePartition>& partitions,
                         const std::function<PartitionDecision(const PValuePartition&)>& decide) {
    RejectionReport report;
    report.method = method;
    report.alpha = alpha;
    report.eta_used = eta_used;
    report.global_threshold = global_threshold;
    for (const auto& p : partitions) {
        if (report.per_partition.count(p.id)) {
            throw std::invalid_argument("rejection report: duplicate partition id '" + p.id + "'");
        }
        PartitionDecision d = decide(p);
        report.total_rejected += d.n_rejected;
        report.total_left += d.n_left;
        report.total_right += d.n_right;
        report.per_partition.emplace(p.id, std::move(d));
    }
    return report;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::SmoothBH: return "smooth-bh";
        case Method::ClassicalBH: return "classical-bh";
        case Method::HigherCriticism: return "hc";
        case Method::LocalFdr: return "local-fdr";
        case Method::WeightedBH: return "weighted-bh";
    }
    throw std::invalid_argument("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
    if (name == "smooth-bh") return Method::SmoothBH;
    if (name == "classical-bh") return Method::ClassicalBH;
    if (name == "hc") return Method::HigherCriticism;
    if (name == "local-fdr") return Method::LocalFdr;
    if (name == "weighted-bh") return Method::WeightedBH;
    throw std::invalid_argument("unknown method '" + name + "'");
}

double smooth_bh_threshold(const std::function<double(double)>& cdf, double eta, double alpha) {
    check_eta(eta, "smooth_bh_threshold");
    check_alpha(alpha, "smooth_bh_threshold");
    return threshold_for_ratio(cdf, eta / alpha);
}

double smooth_bh_threshold(const SkewBetaModel& model, double eta, double alpha) {
    return smooth_bh_threshold([&model](double u) { return cdf_eval(model, u); }, eta, alpha);
}

BHResult classical_bh(std::span<const double> pooled, double eta, double alpha) {
    check_eta(eta, "classical_bh");
    check_alpha(alpha, "classical_bh");
    if (pooled.empty()) {
        throw std::invalid_argument("classical_bh: empty sample");
    }
    std::vector<double> sorted(pooled.begin(), pooled.end());
    std::sort(sorted.begin(), sorted.end());
    const std::vector<double> d = tie_upper_cdf(sorted);
    const double ratio = eta / alpha;
    BHResult out;
    for (std::int64_t i = static_cast<std::int64_t>(sorted.size()); i >= 1; --i) {
        if (d[i - 1] >= ratio * sorted[i - 1]) {
            out.k = i;
            out.threshold = sorted[i - 1];
            break;
        }
    }
    if (out.k > 0) {
        for (size_t i = 0; i < pooled.size(); ++i) {
            if (pooled[i] <= out.threshold) out.rejected.push_back(static_cast<std::int64_t>(i));
        }
    }
    return out;
}

HCResult higher_criticism(std::span<const double> pooled, double alpha0) {
    if (!(alpha0 > 0.0 && alpha0 <= 1.0)) {
        throw std::invalid_argument("higher_criticism: alpha0 must be in (0,1]");
    }
    if (pooled.empty()) {
        throw std::invalid_argument("higher_criticism: empty sample");
    }
    std::vector<double> sorted(pooled.begin(), pooled.end());
    std::sort(sorted.begin(), sorted.end());
    const std::vector<double> d = tie_upper_cdf(sorted);
    const double n = static_cast<double>(sorted.size());
    const std::int64_t window =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(alpha0 * n));
    HCResult out;
    out.statistic = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 1; i <= window && i <= static_cast<std::int64_t>(sorted.size()); ++i) {
        const double u = sorted[i - 1];
        const double denom = u * (1.0 - u);
        if (!(denom > 0.0)) continue;
        const double hc = std::sqrt(n) * (d[i - 1] - u) / std::sqrt(denom);
        if (hc > out.statistic) {
            out.statistic = hc;
            out.k = i;
            out.threshold = u;
        }
    }
    if (out.k > 0) {
        for (size_t i = 0; i < pooled.size(); ++i) {
            if (pooled[i] <= out.threshold) out.rejected.push_back(static_cast<std::int64_t>(i));
        }
    }
    return out;
}

double higher_criticism_smooth_threshold(const SkewBetaModel& model, double alpha0) {
    if (!(alpha0 > 0.0 && alpha0 <= 1.0)) {
        throw std::invalid_argument("higher_criticism_smooth_threshold: alpha0 must be in (0,1]");
    }
    const double n = static_cast<double>(std::max<std::int64_t>(model.n_total, 1));
    double best = -std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (int i = 0; i < kScanPoints - 1; ++i) {  // exclude u = 1
        const double u = scan_point(i);
        const double dd = cdf_eval(model, u);
        if (dd > alpha0) continue;
        const double hc = std::sqrt(n) * (dd - u) / std::sqrt(u * (1.0 - u));
        if (hc > best) {
            best = hc;
            arg = u;
        }
    }
    return arg;
}

std::vector<std::int64_t> local_fdr_reject(const SkewBetaModel& model, double eta, double alpha,
                                           const PValuePartition& partition) {
    check_eta(eta, "local_fdr_reject");
    check_alpha(alpha, "local_fdr_reject");
    const double cut = eta / (2.0 * alpha);
    std::vector<std::int64_t> out;
    for (size_t i = 0; i < partition.values.size(); ++i) {
        if (density_eval(model, partition.values[i]) > cut) {
            out.push_back(static_cast<std::int64_t>(i));
        }
    }
    return out;
}

std::map<std::string, double> compute_weights(const std::vector<LPSummary>& summaries,
                                              bool* degenerate) {
    if (summaries.empty()) {
        throw std::invalid_argument("compute_weights: no summaries");
    }
    std::int64_t n_total = 0;
    double h_sum = 0.0;
    for (const auto& s : summaries) {
        if (s.n < 1) {
            throw std::invalid_argument("compute_weights: summary '" + s.id + "' has n < 1");
        }
        if (!(s.h_statistic >= 0.0)) {
            throw std::invalid_argument("compute_weights: negative H in '" + s.id + "'");
        }
        n_total += s.n;
        h_sum += s.h_statistic;
    }
    std::map<std::string, double> w;
    if (h_sum == 0.0) {
        if (degenerate) *degenerate = true;
        for (const auto& s : summaries) w[s.id] = 1.0;
        return w;
    }
    if (degenerate) *degenerate = false;
    for (const auto& s : summaries) {
        const double pi = static_cast<double>(s.n) / static_cast<double>(n_total);
        const auto [it, fresh] = w.emplace(s.id, s.h_statistic / (pi * h_sum));
        if (!fresh) {
            throw std::invalid_argument("compute_weights: duplicate partition id '" + s.id + "'");
        }
    }
    return w;
}

std::map<std::string, double> weighted_bh_thresholds(const SkewBetaModel& model,
                                                     const std::vector<LPSummary>& summaries,
                                                     double eta, double alpha) {
    check_eta(eta, "weighted_bh_thresholds");
    check_alpha(alpha, "weighted_bh_thresholds");
    const std::map<std::string, double> w = compute_weights(summaries);
    auto cdf = [&model](double u) { return cdf_eval(model, u); };
    std::map<std::string, double> out;
    for (const auto& [id, weight] : w) {
        out[id] = weight > 0.0 ? threshold_for_ratio(cdf, eta / (weight * alpha)) : 0.0;
    }
    return out;
}

PartitionDecision apply_threshold_to_partition(const PValuePartition& p, double u_max) {
    PartitionDecision d;
    d.threshold = u_max;
    for (size_t i = 0; i < p.values.size(); ++i) {
        if (p.values[i] <= u_max) d.rejected_indices.push_back(static_cast<std::int64_t>(i));
    }
    d.n_rejected = static_cast<std::int64_t>(d.rejected_indices.size());
    tally_tails(p, d.rejected_indices, d);
    return d;
}

PartitionDecision apply_local_fdr_to_partition(const SkewBetaModel& model, double eta, double alpha,
                                               const PValuePartition& p) {
    PartitionDecision d;
    d.threshold = eta / (2.0 * alpha);
    d.rejected_indices = local_fdr_reject(model, eta, alpha, p);
    d.n_rejected = static_cast<std::int64_t>(d.rejected_indices.size());
    tally_tails(p, d.rejected_indices, d);
    return d;
}

RejectionReport apply_global_threshold(Method method, double u_max, double alpha, double eta_used,
                                       const std::vector<PValuePartition>& partitions) {
    return assemble(method, alpha, eta_used, u_max, partitions,
                    [u_max](const PValuePartition& p) {
                        return apply_threshold_to_partition(p, u_max);
                    });
}

RejectionReport local_fdr_report(const SkewBetaModel& model, double eta, double alpha,
                                 const std::vector<PValuePartition>& partitions) {
    return assemble(Method::LocalFdr, alpha, eta, eta / (2.0 * alpha), partitions,
                    [&](const PValuePartition& p) {
                        return apply_local_fdr_to_partition(model, eta, alpha, p);
                    });
}

RejectionReport weighted_bh(const SkewBetaModel& model, const std::vector<LPSummary>& summaries,
                            const std::vector<PValuePartition>& partitions, double eta,
                            double alpha) {
    const std::map<std::string, double> cuts = weighted_bh_thresholds(model, summaries, eta, alpha);
    for (const auto& p : partitions) {
        if (!cuts.count(p.id)) {
            throw std::invalid_argument("weighted_bh: no summary for partition '" + p.id + "'");
        }
    }
    RejectionReport report =
        assemble(Method::WeightedBH, alpha, eta, std::numeric_limits<double>::quiet_NaN(),
                 partitions, [&cuts](const PValuePartition& p) {
                     return apply_threshold_to_partition(p, cuts.at(p.id));
                 });
    return report;
}

}  // namespace lpfdr
