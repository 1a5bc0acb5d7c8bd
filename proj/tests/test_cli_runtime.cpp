#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpfdr/pipeline.hpp"
#include "lpfdr/simulate.hpp"
#include "test_util.hpp"

using namespace lpfdr;
using nlohmann::json;

TEST_CASE("p-value kinds transform z-scores as documented") {
    CHECK(p_value_from_z(1.96, PValueKind::TwoSidedFromZ) ==
          doctest::Approx(0.049995790296440868).epsilon(1e-12));
    CHECK(p_value_from_z(-1.96, PValueKind::TwoSidedFromZ) ==
          doctest::Approx(0.049995790296440868).epsilon(1e-12));
    CHECK(p_value_from_z(-1.0, PValueKind::LeftFromZ) ==
          doctest::Approx(std_normal_cdf(-1.0)).epsilon(1e-14));
    CHECK(p_value_from_z(-1.0, PValueKind::RightFromZ) ==
          doctest::Approx(std_normal_cdf(1.0)).epsilon(1e-14));
    CHECK_THROWS_AS((void)p_value_from_z(0.5, PValueKind::Raw), std::invalid_argument);
}

TEST_CASE("kind names round-trip") {
    for (PValueKind k : {PValueKind::Raw, PValueKind::TwoSidedFromZ, PValueKind::LeftFromZ,
                         PValueKind::RightFromZ}) {
        CHECK(kind_from_name(kind_name(k)) == k);
    }
    CHECK_THROWS_AS((void)kind_from_name("zzz"), std::invalid_argument);
}

TEST_CASE("raw ingestion keeps values, skips comments, derives the id") {
    const auto dir = testutil::scratch_dir("ingest_raw");
    const auto path = testutil::write_lines(dir, "batch_01.txt",
                                            {"# header comment", "0.25", "", "0.75", "1.0"});
    const auto p = ingest_partition(path, PValueKind::Raw);
    CHECK(p.id == "batch_01");
    REQUIRE(p.values.size() == 3);
    CHECK(p.values[0] == doctest::Approx(0.25));
    CHECK(p.values[1] == doctest::Approx(0.75));
    // raw 1.0 is clamped into the open interval
    CHECK(p.values[2] == doctest::Approx(1.0 - 1e-15));
    CHECK(p.z_signs.empty());

    const auto q = ingest_partition(path, PValueKind::Raw, "custom");
    CHECK(q.id == "custom");
}

TEST_CASE("z ingestion transforms, clamps, and records tail signs") {
    const auto dir = testutil::scratch_dir("ingest_z");
    const auto path = testutil::write_lines(dir, "z.txt", {"0.0", "1.96", "-1.96", "40.0"});
    const auto p = ingest_partition(path, PValueKind::TwoSidedFromZ);
    REQUIRE(p.values.size() == 4);
    // z = 0 gives p = 1, clamped just inside the interval
    CHECK(p.values[0] == doctest::Approx(1.0 - 1e-15));
    CHECK(p.values[1] == doctest::Approx(0.049995790296440868).epsilon(1e-12));
    CHECK(p.values[2] == doctest::Approx(0.049995790296440868).epsilon(1e-12));
    // an extreme z underflows and is clamped away from zero
    CHECK(p.values[3] == doctest::Approx(1e-15));
    REQUIRE(p.z_signs.size() == 4);
    CHECK(p.z_signs[0] == 0);
    CHECK(p.z_signs[1] == 1);
    CHECK(p.z_signs[2] == -1);
    CHECK(p.z_signs[3] == 1);
}

TEST_CASE("ingestion errors carry the file and line number") {
    const auto dir = testutil::scratch_dir("ingest_err");
    const auto bad_tok = testutil::write_lines(dir, "tok.txt", {"0.5", "oops"});
    try {
        (void)ingest_partition(bad_tok, PValueKind::Raw);
        FAIL("expected a parse error");
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        CHECK(msg.find("tok.txt") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }

    const auto out_of_range = testutil::write_lines(dir, "range.txt", {"1.5"});
    CHECK_THROWS_AS((void)ingest_partition(out_of_range, PValueKind::Raw), std::runtime_error);

    CHECK_THROWS_AS((void)ingest_partition(dir + "/absent.txt", PValueKind::Raw),
                    std::runtime_error);
}

TEST_CASE("manifests round-trip and resolve relative paths") {
    const auto dir = testutil::scratch_dir("manifest");
    testutil::write_lines(dir, "a.txt", {"0.5"});
    std::vector<PartitionSource> sources(1);
    sources[0].path = "a.txt";
    sources[0].kind = PValueKind::Raw;
    const auto mpath = dir + "/manifest.json";
    write_manifest(sources, mpath);

    const auto loaded = read_manifest(mpath);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].kind == PValueKind::Raw);
    // relative entries resolve against the manifest directory
    CHECK(std::filesystem::path(loaded[0].path).is_absolute());
    const auto p = ingest_partition(loaded[0].path, loaded[0].kind);
    CHECK(p.values.size() == 1);
}

TEST_CASE("heterogeneous 200-partition layout has the documented shape") {
    const auto parts = simulate_example2_values(7);
    REQUIRE(parts.size() == 200);
    std::int64_t total = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
        const size_t want = i < 8 ? 74 : 49;
        CHECK(parts[i].partition.values.size() == want);
        CHECK(parts[i].is_signal.size() == want);
        CHECK(parts[i].z.size() == want);
        total += static_cast<std::int64_t>(want);
        // signal flags: 25 in the contaminated partitions, none elsewhere
        const int signals =
            static_cast<int>(std::count(parts[i].is_signal.begin(), parts[i].is_signal.end(), 1));
        CHECK(signals == (i < 8 ? 25 : 0));
    }
    CHECK(total == 10000);

    // deterministic in the seed
    const auto again = simulate_example2_values(7);
    for (size_t i = 0; i < parts.size(); ++i) {
        REQUIRE(again[i].partition.values.size() == parts[i].partition.values.size());
        for (size_t j = 0; j < parts[i].partition.values.size(); ++j) {
            CHECK(again[i].partition.values[j] == parts[i].partition.values[j]);
        }
    }
    const auto other = simulate_example2_values(8);
    bool any_diff = false;
    for (size_t j = 0; j < parts[0].partition.values.size(); ++j) {
        any_diff |= other[0].partition.values[j] != parts[0].partition.values[j];
    }
    CHECK(any_diff);
}

TEST_CASE("example file tree round-trips through ingestion byte-identically") {
    const auto dir1 = testutil::scratch_dir("ex2_files_a");
    const auto dir2 = testutil::scratch_dir("ex2_files_b");
    const auto m1 = simulate_example2_files(11, dir1);
    const auto m2 = simulate_example2_files(11, dir2);
    const auto s1 = read_manifest(m1);
    const auto s2 = read_manifest(m2);
    REQUIRE(s1.size() == 200);
    REQUIRE(s2.size() == 200);
    // same seed, two trees: identical file bytes
    for (size_t i = 0; i < s1.size(); ++i) {
        CHECK(testutil::read_file(s1[i].path) == testutil::read_file(s2[i].path));
    }
    // the in-memory values survive the write/read cycle
    const auto mem = simulate_example2_values(11);
    const auto p0 = ingest_partition(s1[0].path, s1[0].kind);
    REQUIRE(p0.values.size() == mem[0].partition.values.size());
    for (size_t j = 0; j < p0.values.size(); ++j) {
        CHECK(p0.values[j] == doctest::Approx(mem[0].partition.values[j]).epsilon(1e-14));
    }
}

TEST_CASE("mixture simulation respects eta and the alternative") {
    const auto alt = MixtureAlternative::parse("normal:2.0");
    CHECK(alt.kind == MixtureAlternative::Kind::NormalShift);
    CHECK(alt.mu == doctest::Approx(2.0));

    const auto parts = simulate_mixture_values(10000, 0.9, alt, 4, 321);
    REQUIRE(parts.size() == 4);
    std::int64_t n = 0, signals = 0;
    for (const auto& p : parts) {
        n += static_cast<std::int64_t>(p.partition.values.size());
        signals += std::count(p.is_signal.begin(), p.is_signal.end(), 1);
    }
    CHECK(n == 10000);
    // Binomial(10000, 0.1): this fixed seed lands well inside +-5%
    CHECK(signals > 950);
    CHECK(signals < 1050);

    // eta = 1 produces no signals at all
    const auto pure = simulate_mixture_values(5000, 1.0, alt, 3, 99);
    for (const auto& p : pure) {
        CHECK(std::count(p.is_signal.begin(), p.is_signal.end(), 1) == 0);
    }

    const auto beta_alt = MixtureAlternative::parse("beta:0.1,1");
    CHECK(beta_alt.kind == MixtureAlternative::Kind::Beta);
    CHECK(beta_alt.a == doctest::Approx(0.1));
    CHECK(beta_alt.b == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)MixtureAlternative::parse("cauchy:1"), std::invalid_argument);
}

TEST_CASE("pipeline on uniform data rejects nothing") {
    testutil::Rng rng(140001);
    RunConfig cfg;
    cfg.memory_partitions.resize(5);
    for (size_t i = 0; i < 5; ++i) {
        cfg.memory_partitions[i].id = "mem_" + std::to_string(i);
        cfg.memory_partitions[i].values.resize(2000);
        for (auto& v : cfg.memory_partitions[i].values) v = rng.unit();
    }
    cfg.methods = {Method::SmoothBH, Method::LocalFdr};
    cfg.alpha = 0.05;

    const auto result = run_pipeline(cfg);
    CHECK(result.moments.n_total == 10000);
    CHECK(result.moments.m1 == doctest::Approx(0.5).epsilon(0.02));
    CHECK(result.model.carrier.gamma == doctest::Approx(1.0).epsilon(0.1));
    CHECK(result.model.carrier.beta == doctest::Approx(1.0).epsilon(0.1));
    REQUIRE(result.reports.size() == 2);
    for (const auto& rep : result.reports) {
        CHECK(rep.total_rejected == 0);
    }
    CHECK(result.summaries.size() == 5);
    CHECK(result.hchart.size() == 5);
    CHECK(result.hchart_reference > 0.0);
}

TEST_CASE("pipeline writes a complete artifact set") {
    const auto data_dir = testutil::scratch_dir("run_data");
    const auto out_dir = testutil::scratch_dir("run_out");
    const auto manifest = simulate_example2_files(3, data_dir);

    RunConfig cfg;
    cfg.sources = read_manifest(manifest);
    cfg.output_dir = out_dir;
    cfg.methods = {Method::SmoothBH, Method::LocalFdr};

    const auto result = run_pipeline(cfg);
    CHECK(result.report_path == out_dir + "/report.json");

    const auto report = json::parse(testutil::read_file(out_dir + "/report.json"));
    CHECK(report.at("schema_version").get<int>() == 1);
    CHECK(report.at("n_total").get<std::int64_t>() == 10000);
    CHECK(report.at("partitions").size() == 200);
    CHECK(report.at("methods").size() == 2);
    for (const auto& m : report.at("methods")) {
        CHECK(m.contains("total_rejected"));
        CHECK(m.contains("per_partition"));
    }
    // no field records the execution mode
    CHECK_FALSE(report.contains("mode"));

    const auto model = json::parse(testutil::read_file(out_dir + "/model.json"));
    CHECK(model.contains("gamma"));
    CHECK(model.contains("eta"));
    CHECK(model.at("coefficients").size() == 8);

    const auto hlines = testutil::read_lines(out_dir + "/hchart.csv");
    CHECK(hlines.size() == 201);
    const auto ilines = testutil::read_lines(out_dir + "/infomap.csv");
    CHECK(ilines.size() == 201);
    const auto slines = testutil::read_lines(out_dir + "/summaries.jsonl");
    CHECK(slines.size() == 200);
    // in-process runs do not emit transport statistics
    CHECK_FALSE(std::filesystem::exists(out_dir + "/protocol.json"));
    // svg only on request
    CHECK_FALSE(std::filesystem::exists(out_dir + "/hchart.svg"));

    RunConfig cfg_svg = cfg;
    cfg_svg.svg = true;
    (void)run_pipeline(cfg_svg);
    CHECK(std::filesystem::exists(out_dir + "/hchart.svg"));
    CHECK(std::filesystem::exists(out_dir + "/infomap.svg"));
}

TEST_CASE("different partitionings of the same values give one analysis") {
    // the same pooled sample cut as 1 file or 6 files must yield the same
    // carrier, coefficients, and decisions
    const auto alt = MixtureAlternative::parse("beta:0.1,1");
    const auto parts = simulate_mixture_values(6000, 0.9, alt, 6, 777);

    RunConfig one;
    one.memory_partitions.resize(1);
    one.memory_partitions[0].id = "all";
    for (const auto& p : parts) {
        one.memory_partitions[0].values.insert(one.memory_partitions[0].values.end(),
                                               p.partition.values.begin(),
                                               p.partition.values.end());
    }
    RunConfig six;
    for (const auto& p : parts) six.memory_partitions.push_back(p.partition);

    const auto r1 = run_pipeline(one);
    const auto r6 = run_pipeline(six);

    CHECK(r6.model.carrier.gamma == doctest::Approx(r1.model.carrier.gamma).epsilon(1e-12));
    CHECK(r6.model.carrier.beta == doctest::Approx(r1.model.carrier.beta).epsilon(1e-12));
    REQUIRE(r6.model.coefficients.values.size() == r1.model.coefficients.values.size());
    for (size_t j = 0; j < r1.model.coefficients.values.size(); ++j) {
        CHECK(std::fabs(r6.model.coefficients.values[j] - r1.model.coefficients.values[j]) <=
              1e-12 * std::max(1.0, std::fabs(r1.model.coefficients.values[j])));
    }
    CHECK(r6.model.eta == doctest::Approx(r1.model.eta).epsilon(1e-10));

    // decision agreement: same totals and the same global thresholds
    REQUIRE(r1.reports.size() == r6.reports.size());
    for (size_t i = 0; i < r1.reports.size(); ++i) {
        CHECK(r1.reports[i].method == r6.reports[i].method);
        CHECK(r1.reports[i].total_rejected == r6.reports[i].total_rejected);
        CHECK(r6.reports[i].global_threshold ==
              doctest::Approx(r1.reports[i].global_threshold).epsilon(1e-9));
    }
}

TEST_CASE("eta override reaches the model and the reports") {
    RunConfig cfg;
    cfg.memory_partitions.resize(1);
    cfg.memory_partitions[0].id = "a";
    testutil::Rng rng(31001);
    cfg.memory_partitions[0].values.resize(3000);
    for (auto& v : cfg.memory_partitions[0].values) v = rng.unit();
    cfg.eta_override = 0.65;
    cfg.methods = {Method::SmoothBH};

    const auto r = run_pipeline(cfg);
    CHECK(r.model.eta == doctest::Approx(0.65));
    REQUIRE(r.reports.size() == 1);
    CHECK(r.reports[0].eta_used == doctest::Approx(0.65));
}

TEST_CASE("invalid configurations are rejected up front") {
    RunConfig cfg;  // neither sources nor memory partitions
    CHECK_THROWS_AS((void)run_pipeline(cfg), std::invalid_argument);

    RunConfig both;
    both.memory_partitions.resize(1);
    both.memory_partitions[0].id = "a";
    both.memory_partitions[0].values = {0.5};
    both.sources.resize(1);
    both.sources[0].path = "/nonexistent";
    CHECK_THROWS_AS((void)run_pipeline(both), std::invalid_argument);

    RunConfig bad_alpha;
    bad_alpha.memory_partitions = both.memory_partitions;
    bad_alpha.alpha = 1.5;
    CHECK_THROWS_AS((void)run_pipeline(bad_alpha), std::invalid_argument);

    RunConfig bad_m = bad_alpha;
    bad_m.alpha = 0.05;
    bad_m.m = 0;
    CHECK_THROWS_AS((void)run_pipeline(bad_m), std::invalid_argument);

    // the pooled-sample step-up rule needs raw values, not aggregates
    RunConfig classical = bad_m;
    classical.m = 8;
    classical.methods = {Method::ClassicalBH};
    CHECK_THROWS_AS((void)run_pipeline(classical), std::invalid_argument);

    // workers mode cannot run on memory partitions
    RunConfig workers = classical;
    workers.methods = {Method::SmoothBH};
    workers.mode = RunConfig::Mode::Workers;
    CHECK_THROWS_AS((void)run_pipeline(workers), std::invalid_argument);
}

TEST_CASE("failed output writing leaves no partial artifacts behind") {
    const auto data_dir = testutil::scratch_dir("crash_data");
    const auto out_dir = testutil::scratch_dir("crash_out");
    const auto manifest = simulate_example2_files(5, data_dir);

    // a directory squatting on model.json forces a failure after the csv
    // artifacts are already on disk
    std::filesystem::create_directories(out_dir + "/model.json");

    RunConfig cfg;
    cfg.sources = read_manifest(manifest);
    cfg.output_dir = out_dir;

    CHECK_THROWS(run_pipeline(cfg));
    CHECK_FALSE(std::filesystem::exists(out_dir + "/report.json"));
    CHECK_FALSE(std::filesystem::exists(out_dir + "/hchart.csv"));
    CHECK_FALSE(std::filesystem::exists(out_dir + "/infomap.csv"));
    CHECK_FALSE(std::filesystem::exists(out_dir + "/summaries.jsonl"));

    // with the obstruction gone the same config succeeds
    std::filesystem::remove(out_dir + "/model.json");
    const auto r = run_pipeline(cfg);
    CHECK(std::filesystem::exists(out_dir + "/report.json"));
    CHECK(r.report_path == out_dir + "/report.json");
}

TEST_CASE("missing partition files abort before any output is written") {
    const auto out_dir = testutil::scratch_dir("missing_out");
    RunConfig cfg;
    cfg.sources.resize(1);
    cfg.sources[0].path = out_dir + "/never_there.txt";
    cfg.output_dir = out_dir;
    CHECK_THROWS(run_pipeline(cfg));
    CHECK_FALSE(std::filesystem::exists(out_dir + "/report.json"));
    CHECK_FALSE(std::filesystem::exists(out_dir + "/hchart.csv"));
}
