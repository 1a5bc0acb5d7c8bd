#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lpfdr/partition_engine.hpp"
#include "test_util.hpp"

using namespace lpfdr;

namespace {

PValuePartition part(std::string id, std::vector<double> values) {
    PValuePartition p;
    p.id = std::move(id);
    p.values = std::move(values);
    return p;
}

// Splits `pooled` into k round-robin partitions with deterministic ids.
std::vector<PValuePartition> round_robin_split(const std::vector<double>& pooled, int k) {
    std::vector<PValuePartition> out(k);
    for (int i = 0; i < k; ++i) out[i].id = "part_" + std::to_string(i);
    for (size_t i = 0; i < pooled.size(); ++i) out[i % k].values.push_back(pooled[i]);
    return out;
}

std::vector<double> beta_skewed_sample(size_t n, std::uint64_t seed) {
    testutil::Rng rng(seed);
    std::vector<double> v(n);
    const BetaParams p{0.7, 1.4};
    for (auto& x : v) x = beta_quantile(rng.unit(), p);
    return v;
}

}  // namespace

TEST_CASE("moment summary of tiny partitions") {
    const auto s1 = summarize_moments(part("a", {0.5}));
    CHECK(s1.n == 1);
    CHECK(s1.m1 == doctest::Approx(0.5));
    CHECK(s1.m2 == doctest::Approx(0.25));

    const auto s2 = summarize_moments(part("b", {0.2, 0.4}));
    CHECK(s2.n == 2);
    CHECK(s2.m1 == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(s2.m2 == doctest::Approx(0.1).epsilon(1e-15));

    CHECK_THROWS_AS((void)summarize_moments(part("c", {})), std::invalid_argument);
}

TEST_CASE("moment merge is the size-weighted mean") {
    MomentSummary a{"a", 1, 0.2, 0.1};
    MomentSummary b{"b", 3, 0.6, 0.4};
    const auto merged = merge_moments({a, b});
    CHECK(merged.n_total == 4);
    CHECK(merged.m1 == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(merged.m2 == doctest::Approx(0.325).epsilon(1e-15));

    CHECK_THROWS_AS((void)merge_moments({a, a}), std::invalid_argument);
    CHECK_THROWS_AS((void)merge_moments({}), std::invalid_argument);
}

TEST_CASE("lp summary of a single point carries both bases and H") {
    const auto s = summarize_lp(part("a", {0.5}), BetaParams{1.0, 1.0}, 2);
    REQUIRE(s.lp_unif.order() == 2);
    REQUIRE(s.lp_beta.order() == 2);
    CHECK(s.lp_unif.values[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(s.lp_unif.values[1] == doctest::Approx(-1.1180339887498948).epsilon(1e-14));
    // uniform carrier: both channels coincide
    CHECK(s.lp_beta.values[1] == doctest::Approx(s.lp_unif.values[1]).epsilon(1e-14));
    CHECK(s.h_statistic == doctest::Approx(1.25).epsilon(1e-13));
}

TEST_CASE("h statistic equals the uniform-basis chi-square of the summary") {
    const auto values = beta_skewed_sample(500, 42);
    const auto s = summarize_lp(part("a", values), BetaParams{0.9, 1.1}, 8);
    CHECK(s.h_statistic == doctest::Approx(chi_square_divergence(s.lp_unif)).epsilon(1e-12));
}

TEST_CASE("lp merge averages coefficient-wise with size weights") {
    auto sa = summarize_lp(part("a", {0.3, 0.5}), BetaParams{1.0, 1.0}, 1);
    auto sb = summarize_lp(part("b", {0.6, 0.8}), BetaParams{1.0, 1.0}, 1);
    const auto merged = merge_lp({sa, sb}, LPChannel::Uniform);
    const double want = 0.5 * (sa.lp_unif.values[0] + sb.lp_unif.values[0]);
    CHECK(merged.values[0] == doctest::Approx(want).epsilon(1e-14));

    // K = 1 reduces to the summary itself
    const auto solo = merge_lp({sa}, LPChannel::Uniform);
    CHECK(solo.values[0] == sa.lp_unif.values[0]);

    // mismatched order is rejected
    auto sc = summarize_lp(part("c", {0.2}), BetaParams{1.0, 1.0}, 2);
    CHECK_THROWS_AS((void)merge_lp({sa, sc}, LPChannel::Uniform), std::invalid_argument);
}

TEST_CASE("lp merge is permutation-invariant and grouping-stable") {
    const auto pooled = beta_skewed_sample(3000, 777);
    auto parts = round_robin_split(pooled, 5);
    const BetaParams carrier{0.8, 1.2};
    std::vector<LPSummary> sums;
    for (const auto& p : parts) sums.push_back(summarize_lp(p, carrier, 6));

    const auto merged = merge_lp(sums, LPChannel::Beta);

    // permuting the input vector changes nothing: merge orders by id
    auto shuffled = sums;
    std::rotate(shuffled.begin(), shuffled.begin() + 2, shuffled.end());
    std::swap(shuffled[0], shuffled[3]);
    const auto merged_perm = merge_lp(shuffled, LPChannel::Beta);
    for (int j = 0; j < merged.order(); ++j) {
        CHECK(merged_perm.values[j] == merged.values[j]);
    }

    // two-stage merge (explicit size-weighted combination of sub-merges)
    // agrees with the flat merge to near machine precision
    const std::vector<LPSummary> lo(sums.begin(), sums.begin() + 2);
    const std::vector<LPSummary> hi(sums.begin() + 2, sums.end());
    const auto m_lo = merge_lp(lo, LPChannel::Beta);
    const auto m_hi = merge_lp(hi, LPChannel::Beta);
    double n_lo = 0, n_hi = 0;
    for (const auto& s : lo) n_lo += static_cast<double>(s.n);
    for (const auto& s : hi) n_hi += static_cast<double>(s.n);
    for (int j = 0; j < merged.order(); ++j) {
        const double two_stage =
            (n_lo * m_lo.values[j] + n_hi * m_hi.values[j]) / (n_lo + n_hi);
        CHECK(std::fabs(two_stage - merged.values[j]) <=
              1e-12 * std::max(1.0, std::fabs(merged.values[j])));
    }
}

TEST_CASE("merged coefficients reproduce the pooled-sample coefficients") {
    const auto pooled = beta_skewed_sample(10000, 2024);
    const BetaParams carrier{0.75, 1.3};
    const auto direct = lp_coefficients(pooled, LPBasis::beta(carrier), 8);

    for (int k : {1, 3, 16, 200}) {
        auto parts = round_robin_split(pooled, k);
        std::vector<LPSummary> sums;
        for (const auto& p : parts) sums.push_back(summarize_lp(p, carrier, 8));
        const auto merged = merge_lp(sums, LPChannel::Beta);
        for (int j = 0; j < 8; ++j) {
            CHECK(std::fabs(merged.values[j] - direct.values[j]) <=
                  1e-12 * std::max(1.0, std::fabs(direct.values[j])));
        }
    }
}

TEST_CASE("distributed pipeline reproduces the centralized oracle model") {
    const auto pooled = beta_skewed_sample(20000, 31415);
    const auto oracle = centralized_oracle(pooled, 8);

    for (int k : {1, 7, 64}) {
        auto parts = round_robin_split(pooled, k);

        // round 1: moments -> carrier
        std::vector<MomentSummary> msums;
        for (const auto& p : parts) msums.push_back(summarize_moments(p));
        const auto mm = merge_moments(msums);
        CHECK(mm.n_total == static_cast<std::int64_t>(pooled.size()));
        const auto carrier = fit_beta_moments(mm.m1, mm.m2);
        CHECK(carrier.gamma == doctest::Approx(oracle.carrier.gamma).epsilon(1e-12));
        CHECK(carrier.beta == doctest::Approx(oracle.carrier.beta).epsilon(1e-12));

        // round 2: lp summaries -> merged -> truncated model
        std::vector<LPSummary> lsums;
        for (const auto& p : parts) lsums.push_back(summarize_lp(p, carrier, 8));
        const auto merged = merge_lp(lsums, LPChannel::Beta);
        const auto selected = select_coefficients_aic(merged, mm.n_total);
        for (int j = 0; j < 8; ++j) {
            CHECK(std::fabs(selected.values[j] - oracle.coefficients.values[j]) <=
                  1e-12 * std::max(1.0, std::fabs(oracle.coefficients.values[j])));
        }

        const auto model = SkewBetaModel::build(carrier, selected, mm.n_total, std::nullopt);
        CHECK(model.eta == doctest::Approx(oracle.eta).epsilon(1e-10));
        CHECK(model.repair_applied == oracle.repair_applied);
        for (double u : {0.05, 0.3, 0.7, 0.95}) {
            CHECK(density_eval(model, u) ==
                  doctest::Approx(density_eval(oracle, u)).epsilon(1e-10));
        }
    }
}

TEST_CASE("superposition of local models reconstructs the merged raw density") {
    std::vector<double> grid;
    for (int i = 1; i < 200; ++i) grid.push_back(i / 200.0);

    const auto pooled = beta_skewed_sample(6000, 555);
    const BetaParams carrier{0.85, 1.15};

    // K = 1: the "mixture" is the model itself, gap is exactly zero
    const auto all = lp_coefficients(pooled, LPBasis::beta(carrier), 8);
    const auto global = SkewBetaModel::build(carrier, all, 6000, 1.0);
    CHECK(superposition_check({{1.0, global}}, global, grid) == 0.0);

    // uneven random splits: raw densities superpose to within rounding
    for (int k : {2, 5, 23}) {
        auto parts = round_robin_split(pooled, k);
        std::vector<std::pair<double, SkewBetaModel>> locals;
        std::vector<LPSummary> sums;
        for (const auto& p : parts) {
            const auto s = summarize_lp(p, carrier, 8);
            sums.push_back(s);
            const double pi = static_cast<double>(p.values.size()) / pooled.size();
            locals.emplace_back(pi, SkewBetaModel::build(carrier, s.lp_beta, s.n, 1.0));
        }
        const auto merged = merge_lp(sums, LPChannel::Beta);
        const auto g = SkewBetaModel::build(carrier, merged, 6000, 1.0);
        CHECK(superposition_check(locals, g, grid) <= 1e-10);
    }
}

TEST_CASE("uniform data yields a near-null merged model") {
    testutil::Rng rng(99991);
    std::vector<double> pooled(100000);
    for (auto& v : pooled) v = rng.unit();
    const auto oracle = centralized_oracle(pooled, 8);
    // coefficients of pure noise stay at the 1/sqrt(n) scale after truncation
    const double bound = 5.0 / std::sqrt(static_cast<double>(pooled.size()));
    for (double c : oracle.coefficients.values) CHECK(std::fabs(c) <= bound);
    CHECK(chi_square_divergence(oracle.coefficients) <= 8 * bound * bound);
}

TEST_CASE("group moment pooling reconstructs two-sample statistics") {
    // one partition holding both groups entirely: pooled stats are the
    // class means/variances and the t statistic follows the textbook formula
    // group 0 values {0, 2}: mean 1, raw ssq 4; group 1 values {2, 4}: mean 3, raw ssq 20
    GroupMomentSummary g1;
    g1.id = "a";
    g1.n0 = 2;
    g1.n1 = 2;
    g1.mean0 = {1.0};
    g1.ssq0 = {4.0};
    g1.mean1 = {3.0};
    g1.ssq1 = {20.0};
    const auto pooled = merge_group_moments({g1});
    CHECK(pooled.n0 == 2);
    CHECK(pooled.n1 == 2);
    CHECK(pooled.mean0[0] == doctest::Approx(1.0));
    CHECK(pooled.mean1[0] == doctest::Approx(3.0));
    // sample variances: group 0 {0,2} -> 2, group 1 {2,4} -> 2
    CHECK(pooled.var0[0] == doctest::Approx(2.0));
    CHECK(pooled.var1[0] == doctest::Approx(2.0));
    // pooled t = (3-1)/sqrt(2*(1/2+1/2)) = sqrt(2)
    CHECK(pooled.t[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    // equal group means across partitions: t = 0 exactly
    GroupMomentSummary h1, h2;
    h1.id = "a";
    h1.n0 = 2;
    h1.n1 = 1;
    h1.mean0 = {2.0};
    h1.ssq0 = {1.0 + 9.0};
    h1.mean1 = {2.0};
    h1.ssq1 = {4.0};
    h2.id = "b";
    h2.n0 = 2;
    h2.n1 = 3;
    h2.mean0 = {2.0};
    h2.ssq0 = {4.0 + 4.0};
    h2.mean1 = {2.0};
    h2.ssq1 = {1.0 + 4.0 + 9.0};
    const auto eq = merge_group_moments({h1, h2});
    CHECK(eq.mean0[0] == doctest::Approx(2.0));
    CHECK(eq.mean1[0] == doctest::Approx(2.0));
    CHECK(eq.t[0] == doctest::Approx(0.0));
    CHECK(eq.z[0] == doctest::Approx(0.0));
}

TEST_CASE("split-partition group moments match the single-partition pool") {
    // the same data described as one summary or split across two must pool
    // to identical statistics
    // group 0 values: {0, 2, 4, 6} -> mean 3, ssq 56; group 1: {1, 5} -> mean 3, ssq 26
    GroupMomentSummary whole;
    whole.id = "w";
    whole.n0 = 4;
    whole.n1 = 2;
    whole.mean0 = {3.0};
    whole.ssq0 = {56.0};
    whole.mean1 = {3.0};
    whole.ssq1 = {26.0};

    GroupMomentSummary a, b;
    a.id = "a";
    a.n0 = 1;
    a.n1 = 1;
    a.mean0 = {0.0};
    a.ssq0 = {0.0};
    a.mean1 = {1.0};
    a.ssq1 = {1.0};
    b.id = "b";
    b.n0 = 3;
    b.n1 = 1;
    b.mean0 = {4.0};
    b.ssq0 = {56.0};
    b.mean1 = {5.0};
    b.ssq1 = {25.0};

    const auto p1 = merge_group_moments({whole});
    const auto p2 = merge_group_moments({a, b});
    CHECK(p2.mean0[0] == doctest::Approx(p1.mean0[0]).epsilon(1e-14));
    CHECK(p2.var0[0] == doctest::Approx(p1.var0[0]).epsilon(1e-12));
    CHECK(p2.mean1[0] == doctest::Approx(p1.mean1[0]).epsilon(1e-14));
    CHECK(p2.var1[0] == doctest::Approx(p1.var1[0]).epsilon(1e-12));
    CHECK(p2.t[0] == doctest::Approx(p1.t[0]).epsilon(1e-12));
    CHECK(p2.z[0] == doctest::Approx(p1.z[0]).epsilon(1e-12));

    // covariate-count mismatch is rejected
    GroupMomentSummary bad = a;
    bad.id = "c";
    bad.mean0 = {0.0, 1.0};
    CHECK_THROWS_AS((void)merge_group_moments({a, bad}), std::invalid_argument);
}
