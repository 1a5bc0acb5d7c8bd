#include "lpfdr/partition_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lpfdr/kahan.hpp"

namespace lpfdr {

namespace {

// Indices of summaries sorted by ascending id; rejects duplicates so the
// reduction order (and therefore every bit of the result) is canonical.
template <typename T>
std::vector<size_t> ascending_id_order(const std::vector<T>& summaries, const char* fn) {
    if (summaries.empty()) {
        throw std::invalid_argument(std::string(fn) + ": no summaries");
    }
    std::vector<size_t> order(summaries.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&summaries](size_t a, size_t b) {
        return summaries[a].id < summaries[b].id;
    });
    for (size_t i = 1; i < order.size(); ++i) {
        if (summaries[order[i - 1]].id == summaries[order[i]].id) {
            throw std::invalid_argument(std::string(fn) + ": duplicate partition id '" +
                                        summaries[order[i]].id + "'");
        }
    }
    return order;
}

}  // namespace

MomentSummary summarize_moments(const PValuePartition& p) {
    if (p.values.empty()) {
        throw std::invalid_argument("summarize_moments: empty partition '" + p.id + "'");
    }
    KahanAccumulator s1, s2;
    for (size_t i = 0; i < p.values.size(); ++i) {
        const double u = p.values[i];
        if (!(u > 0.0 && u < 1.0)) {
            throw std::invalid_argument("summarize_moments: partition '" + p.id +
                                        "' value at index " + std::to_string(i) +
                                        " outside (0,1)");
        }
        s1.add(u);
        s2.add(u * u);
    }
    MomentSummary out;
    out.id = p.id;
    out.n = static_cast<std::int64_t>(p.values.size());
    const double n = static_cast<double>(out.n);
    out.m1 = s1.total() / n;
    out.m2 = s2.total() / n;
    return out;
}

MergedMoments merge_moments(const std::vector<MomentSummary>& summaries) {
    const auto order = ascending_id_order(summaries, "merge_moments");
    std::int64_t n_total = 0;
    for (const auto& s : summaries) {
        if (s.n < 1) {
            throw std::invalid_argument("merge_moments: summary '" + s.id + "' has n < 1");
        }
        n_total += s.n;
    }
    const double n = static_cast<double>(n_total);
    KahanAccumulator m1, m2;
    for (size_t k : order) {
        const double pi = static_cast<double>(summaries[k].n) / n;
        m1.add(pi * summaries[k].m1);
        m2.add(pi * summaries[k].m2);
    }
    return MergedMoments{n_total, m1.total(), m2.total()};
}

LPSummary summarize_lp(const PValuePartition& p, const BetaParams& carrier, int m) {
    LPSummary out;
    out.id = p.id;
    out.n = static_cast<std::int64_t>(p.values.size());
    out.lp_beta = lp_coefficients(p.values, LPBasis::beta(carrier), m);
    out.lp_unif = lp_coefficients(p.values, LPBasis::uniform(), m);
    out.h_statistic = chi_square_divergence(out.lp_unif);
    return out;
}

LPCoefficients merge_lp(const std::vector<LPSummary>& summaries, LPChannel channel) {
    const auto order = ascending_id_order(summaries, "merge_lp");
    auto pick = [channel](const LPSummary& s) -> const LPCoefficients& {
        return channel == LPChannel::Beta ? s.lp_beta : s.lp_unif;
    };
    const LPCoefficients& first = pick(summaries[order[0]]);
    const int m = first.order();
    std::int64_t n_total = 0;
    for (const auto& s : summaries) {
        const LPCoefficients& c = pick(s);
        if (!(c.basis == first.basis) || c.order() != m) {
            throw std::invalid_argument("merge_lp: summary '" + s.id +
                                        "' has a mismatched basis or order");
        }
        if (s.n < 1) {
            throw std::invalid_argument("merge_lp: summary '" + s.id + "' has n < 1");
        }
        n_total += s.n;
    }
    const double n = static_cast<double>(n_total);
    std::vector<KahanAccumulator> acc(m);
    for (size_t k : order) {
        const LPSummary& s = summaries[k];
        const double pi = static_cast<double>(s.n) / n;
        const LPCoefficients& c = pick(s);
        for (int j = 0; j < m; ++j) acc[j].add(pi * c.values[j]);
    }
    LPCoefficients out;
    out.basis = first.basis;
    out.values.resize(m);
    for (int j = 0; j < m; ++j) out.values[j] = acc[j].total();
    return out;
}

double superposition_check(const std::vector<std::pair<double, SkewBetaModel>>& locals,
                           const SkewBetaModel& global, std::span<const double> grid) {
    if (locals.empty()) {
        throw std::invalid_argument("superposition_check: no local models");
    }
    for (const auto& [pi, model] : locals) {
        if (!(model.carrier == global.carrier)) {
            throw std::invalid_argument("superposition_check: local carrier differs from global");
        }
        if (!(pi >= 0.0)) {
            throw std::invalid_argument("superposition_check: negative partition weight");
        }
    }
    double worst = 0.0;
    for (double u : grid) {
        KahanAccumulator mix;
        for (const auto& [pi, model] : locals) {
            mix.add(pi * density_eval_raw(model, u));
        }
        worst = std::max(worst, std::fabs(mix.total() - density_eval_raw(global, u)));
    }
    return worst;
}

SkewBetaModel centralized_oracle(std::span<const double> all_values, int m,
                                 std::optional<double> eta_override) {
    PValuePartition pooled;
    pooled.id = "pooled";
    pooled.values.assign(all_values.begin(), all_values.end());
    const MomentSummary mom = summarize_moments(pooled);
    const BetaParams carrier = fit_beta_moments(mom.m1, mom.m2);
    const LPCoefficients raw = lp_coefficients(all_values, LPBasis::beta(carrier), m);
    LPCoefficients selected = select_coefficients_aic(raw, mom.n);
    return SkewBetaModel::build(carrier, std::move(selected), mom.n, eta_override);
}

PooledGroupStats merge_group_moments(const std::vector<GroupMomentSummary>& summaries) {
    const auto order = ascending_id_order(summaries, "merge_group_moments");
    const size_t dim = summaries[order[0]].mean0.size();
    for (const auto& s : summaries) {
        if (s.mean0.size() != dim || s.mean1.size() != dim || s.ssq0.size() != dim ||
            s.ssq1.size() != dim) {
            throw std::invalid_argument("merge_group_moments: summary '" + s.id +
                                        "' has an inconsistent covariate dimension");
        }
        if (s.n0 < 0 || s.n1 < 0) {
            throw std::invalid_argument("merge_group_moments: negative group count in '" + s.id +
                                        "'");
        }
    }
    PooledGroupStats out;
    for (size_t k : order) {
        out.n0 += summaries[k].n0;
        out.n1 += summaries[k].n1;
    }
    if (out.n0 == 0 || out.n1 == 0) {
        throw std::invalid_argument("merge_group_moments: a group has zero total count");
    }
    out.mean0.resize(dim);
    out.var0.resize(dim);
    out.mean1.resize(dim);
    out.var1.resize(dim);
    out.t.resize(dim);
    out.z.resize(dim);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (size_t c = 0; c < dim; ++c) {
        KahanAccumulator mean0, mean1, ssq0, ssq1;
        for (size_t k : order) {
            const GroupMomentSummary& s = summaries[k];
            mean0.add(static_cast<double>(s.n0) / out.n0 * s.mean0[c]);
            mean1.add(static_cast<double>(s.n1) / out.n1 * s.mean1[c]);
            ssq0.add(s.ssq0[c]);
            ssq1.add(s.ssq1[c]);
        }
        out.mean0[c] = mean0.total();
        out.mean1[c] = mean1.total();
        out.var0[c] = out.n0 > 1
                          ? (ssq0.total() - out.n0 * out.mean0[c] * out.mean0[c]) / (out.n0 - 1)
                          : nan;
        out.var1[c] = out.n1 > 1
                          ? (ssq1.total() - out.n1 * out.mean1[c] * out.mean1[c]) / (out.n1 - 1)
                          : nan;
        const double diff = out.mean1[c] - out.mean0[c];
        if (out.n0 > 1 && out.n1 > 1) {
            const double pooled_var = ((out.n0 - 1) * out.var0[c] + (out.n1 - 1) * out.var1[c]) /
                                      (out.n0 + out.n1 - 2);
            out.t[c] = diff / std::sqrt(pooled_var * (1.0 / out.n0 + 1.0 / out.n1));
            out.z[c] = diff / std::sqrt(out.var0[c] / out.n0 + out.var1[c] / out.n1);
        } else {
            out.t[c] = nan;
            out.z[c] = nan;
        }
    }
    return out;
}

}  // namespace lpfdr
