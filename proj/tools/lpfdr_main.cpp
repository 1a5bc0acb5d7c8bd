#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpfdr/format.hpp"
#include "lpfdr/pipeline.hpp"
#include "lpfdr/simulate.hpp"
#include "lpfdr/wire.hpp"

namespace {

using namespace lpfdr;

std::vector<Method> parse_methods(const std::string& csv) {
    std::vector<Method> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(method_from_name(item));
    }
    return out;
}

// Accepts either full envelopes or bare payload lines (the summaries.jsonl
// format), and merges whichever round the stream contains.
int run_merge(std::istream& in, const std::optional<double>& eta_override) {
    std::vector<MomentSummary> moments;
    std::vector<LPSummary> lps;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        wire::json payload;
        if (line.find("schema_version") != std::string::npos) {
            payload = wire::parse_message(line).payload;
        } else {
            payload = wire::json::parse(line);
        }
        const std::string type = payload.at("type").get<std::string>();
        if (type == "moments") {
            moments.push_back(wire::moment_summary_from_json(payload));
        } else if (type == "lp") {
            lps.push_back(wire::lp_summary_from_json(payload));
        } else {
            throw std::runtime_error("merge: unsupported summary type '" + type + "'");
        }
    }
    if (!moments.empty() && !lps.empty()) {
        throw std::runtime_error("merge: mixed moment and LP summaries in one stream");
    }
    if (!moments.empty()) {
        const MergedMoments merged = merge_moments(moments);
        bool clamped = false;
        const BetaParams carrier = fit_beta_moments(merged.m1, merged.m2, &clamped);
        wire::json out;
        out["n_total"] = merged.n_total;
        out["m1"] = merged.m1;
        out["m2"] = merged.m2;
        out["gamma"] = carrier.gamma;
        out["beta"] = carrier.beta;
        out["clamped"] = clamped;
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    if (!lps.empty()) {
        std::int64_t n_total = 0;
        for (const auto& s : lps) n_total += s.n;
        const LPCoefficients raw = merge_lp(lps, LPChannel::Beta);
        const LPCoefficients raw_unif = merge_lp(lps, LPChannel::Uniform);
        const LPCoefficients selected = select_coefficients_aic(raw, n_total);
        const SkewBetaModel model =
            SkewBetaModel::build(raw.basis.carrier, selected, n_total, eta_override);
        wire::json out = wire::model_to_json(model);
        out["raw_coefficients"] = raw.values;
        out["h_global"] = chi_square_divergence(raw_unif);
        std::cout << out.dump(2) << "\n";
        return 0;
    }
    throw std::runtime_error("merge: the input stream holds no summaries");
}

void print_run_summary(const PipelineResult& r) {
    std::cout << "n_total " << r.moments.n_total << "\n";
    std::cout << "carrier gamma=" << format_double(r.model.carrier.gamma)
              << " beta=" << format_double(r.model.carrier.beta)
              << (r.carrier_clamped ? " (clamped)" : "") << "\n";
    std::cout << "coefficients [";
    for (std::size_t j = 0; j < r.model.coefficients.values.size(); ++j) {
        if (j) std::cout << ", ";
        std::cout << format_double(r.model.coefficients.values[j]);
    }
    std::cout << "]\n";
    std::cout << "eta " << format_double(r.model.eta)
              << (r.model.repair_applied ? " (density repaired)" : "") << "\n";
    std::cout << "h_global " << format_double(r.h_global) << "\n";
    for (const auto& report : r.reports) {
        std::cout << method_name(report.method);
        if (std::isfinite(report.global_threshold)) {
            std::cout << " threshold=" << format_double(report.global_threshold);
        }
        std::cout << " rejected=" << report.total_rejected;
        if (report.total_left + report.total_right > 0) {
            std::cout << " (left=" << report.total_left << " right=" << report.total_right << ")";
        }
        std::cout << "\n";
    }
    if (!r.report_path.empty()) {
        std::cout << "report " << r.report_path << "\n";
    }
}

int run_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report '" + path + "'");
    wire::json doc;
    in >> doc;
    std::cout << "n_total " << doc.at("n_total").get<std::int64_t>() << "\n";
    const auto& carrier = doc.at("carrier");
    std::cout << "carrier gamma=" << format_double(carrier.at("gamma").get<double>())
              << " beta=" << format_double(carrier.at("beta").get<double>()) << "\n";
    std::cout << "eta " << format_double(doc.at("model").at("eta").get<double>()) << "\n";
    std::cout << "h_global " << format_double(doc.at("h_global").get<double>()) << "\n";
    for (const auto& m : doc.at("methods")) {
        std::cout << m.at("method").get<std::string>();
        const auto& thr = m.at("global_threshold");
        if (thr.is_number()) {
            std::cout << " threshold=" << format_double(thr.get<double>());
        }
        std::cout << " rejected=" << m.at("total_rejected").get<std::int64_t>() << " (left="
                  << m.at("total_left").get<std::int64_t>()
                  << " right=" << m.at("total_right").get<std::int64_t>() << ")\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized large-scale multiple testing over p-value partitions"};
    app.require_subcommand(1);

    // simulate-example2
    auto* sim2 = app.add_subcommand("simulate-example2",
                                    "Generate the 200-partition benchmark with 8 signal sites");
    std::uint64_t sim2_seed = 1;
    std::string sim2_out;
    std::string sim2_kind = "two-sided-from-z";
    sim2->add_option("--seed", sim2_seed, "RNG seed");
    sim2->add_option("--out", sim2_out, "Output directory")->required();
    sim2->add_option("--kind", sim2_kind, "p-value kind for the manifest");

    // simulate-mixture
    auto* simx = app.add_subcommand("simulate-mixture",
                                    "Generate a two-group mixture split into K partitions");
    std::int64_t simx_n = 10000;
    double simx_eta = 0.9;
    std::string simx_alt = "beta:0.1,1";
    int simx_k = 10;
    std::uint64_t simx_seed = 1;
    std::string simx_out;
    simx->add_option("--n", simx_n, "Total number of p-values");
    simx->add_option("--eta", simx_eta, "Null proportion");
    simx->add_option("--alt", simx_alt, "Alternative: beta:a,b or normal:mu");
    simx->add_option("--partitions", simx_k, "Number of partitions");
    simx->add_option("--seed", simx_seed, "RNG seed");
    simx->add_option("--out", simx_out, "Output directory")->required();

    // prostate-partitions
    auto* pros = app.add_subcommand(
        "prostate-partitions", "Split a z-score study into 200 partitions with extreme blocks");
    std::string pros_zfile;
    std::uint64_t pros_seed = 1;
    std::string pros_out;
    std::string pros_kind = "left-from-z";
    pros->add_option("--zfile", pros_zfile, "One z-score per line")->required();
    pros->add_option("--seed", pros_seed, "RNG seed for the bulk shuffle");
    pros->add_option("--out", pros_out, "Output directory")->required();
    pros->add_option("--kind", pros_kind, "p-value kind for the manifest");

    // run
    auto* run = app.add_subcommand("run", "Full three-round analysis over a manifest");
    std::string run_manifest;
    RunConfig config;
    std::string run_methods = "smooth-bh,local-fdr";
    std::string run_mode = "inprocess";
    double run_eta = -1.0;
    run->add_option("--manifest", run_manifest, "Partition manifest")->required();
    run->add_option("--m", config.m, "Number of basis coefficients");
    run->add_option("--alpha", config.alpha, "Target false-discovery level");
    run->add_option("--alpha0", config.alpha0, "Higher-criticism search fraction");
    run->add_option("--eta", run_eta, "Override the estimated null proportion");
    run->add_option("--methods", run_methods,
                    "Comma list of smooth-bh, hc, local-fdr, weighted-bh");
    run->add_option("--mode", run_mode, "inprocess or workers");
    run->add_option("--out", config.output_dir, "Output directory");
    run->add_flag("--svg", config.svg, "Also render SVG charts");
    run->add_option("--threads", config.threads, "Exchange fan-out (0: LPFDR_THREADS or 1)");
    run->add_option("--worker-binary", config.worker_binary,
                    "Worker executable (default: this binary)");

    // summarize (worker protocol loop)
    auto* summ = app.add_subcommand("summarize", "Serve one partition over the wire protocol");
    std::string summ_input;
    std::string summ_kind = "raw";
    std::string summ_id;
    summ->add_option("--input", summ_input, "Partition file")->required();
    summ->add_option("--kind", summ_kind, "Value kind of the file");
    summ->add_option("--id", summ_id, "Partition id (default: file stem)");

    // merge
    auto* merge = app.add_subcommand("merge", "Merge summary lines into moments or a model");
    std::string merge_input;
    double merge_eta = -1.0;
    merge->add_option("--input", merge_input, "Summary JSONL file (default: stdin)");
    merge->add_option("--eta", merge_eta, "Override the estimated null proportion");

    // report
    auto* rep = app.add_subcommand("report", "Print a saved report");
    std::string rep_input;
    rep->add_option("--input", rep_input, "report.json path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim2->parsed()) {
            std::cout << simulate_example2_files(sim2_seed, sim2_out, kind_from_name(sim2_kind))
                      << "\n";
            return 0;
        }
        if (simx->parsed()) {
            const MixtureAlternative alt = MixtureAlternative::parse(simx_alt);
            std::cout << simulate_mixture_files(simx_n, simx_eta, alt, simx_k, simx_seed, simx_out)
                      << "\n";
            return 0;
        }
        if (pros->parsed()) {
            std::cout << prostate_partition_files(pros_zfile, pros_seed, pros_out,
                                                  kind_from_name(pros_kind))
                      << "\n";
            return 0;
        }
        if (run->parsed()) {
            config.sources = read_manifest(run_manifest);
            config.methods = parse_methods(run_methods);
            if (run_eta >= 0.0) config.eta_override = run_eta;
            if (run_mode == "inprocess") {
                config.mode = RunConfig::Mode::InProcess;
            } else if (run_mode == "workers") {
                config.mode = RunConfig::Mode::Workers;
            } else {
                throw std::runtime_error("unknown mode '" + run_mode + "'");
            }
            print_run_summary(run_pipeline(config));
            return 0;
        }
        if (summ->parsed()) {
            PartitionSource src;
            src.path = summ_input;
            src.kind = kind_from_name(summ_kind);
            src.id = summ_id;
            return worker_serve(src, std::cin, std::cout);
        }
        if (merge->parsed()) {
            std::optional<double> eta;
            if (merge_eta >= 0.0) eta = merge_eta;
            if (merge_input.empty()) return run_merge(std::cin, eta);
            std::ifstream in(merge_input);
            if (!in) throw std::runtime_error("cannot open '" + merge_input + "'");
            return run_merge(in, eta);
        }
        if (rep->parsed()) {
            return run_report(rep_input);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
