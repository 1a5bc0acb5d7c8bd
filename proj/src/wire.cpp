#include "lpfdr/wire.hpp"

#include <stdexcept>

namespace lpfdr::wire {

namespace {

std::string envelope(int round, json payload) {
    json msg;
    msg["schema_version"] = kSchemaVersion;
    msg["round"] = round;
    msg["payload"] = std::move(payload);
    return msg.dump();
}

void expect_type(const json& payload, const char* type) {
    const std::string got = payload.at("type").get<std::string>();
    if (got != type) {
        throw std::runtime_error("wire: expected payload type '" + std::string(type) +
                                 "', got '" + got + "'");
    }
}

}  // namespace

json moment_summary_to_json(const MomentSummary& s) {
    json j;
    j["type"] = "moments";
    j["id"] = s.id;
    j["n"] = s.n;
    j["m1"] = s.m1;
    j["m2"] = s.m2;
    return j;
}

MomentSummary moment_summary_from_json(const json& j) {
    expect_type(j, "moments");
    MomentSummary s;
    s.id = j.at("id").get<std::string>();
    s.n = j.at("n").get<std::int64_t>();
    s.m1 = j.at("m1").get<double>();
    s.m2 = j.at("m2").get<double>();
    return s;
}

json lp_summary_to_json(const LPSummary& s) {
    json j;
    j["type"] = "lp";
    j["id"] = s.id;
    j["n"] = s.n;
    if (s.lp_beta.basis.kind != LPBasis::Kind::Beta ||
        s.lp_unif.basis.kind != LPBasis::Kind::Uniform) {
        throw std::runtime_error("wire: LP summary has mislabeled bases");
    }
    j["gamma"] = s.lp_beta.basis.carrier.gamma;
    j["beta"] = s.lp_beta.basis.carrier.beta;
    j["lp_beta"] = s.lp_beta.values;
    j["lp_unif"] = s.lp_unif.values;
    j["h"] = s.h_statistic;
    return j;
}

LPSummary lp_summary_from_json(const json& j) {
    expect_type(j, "lp");
    LPSummary s;
    s.id = j.at("id").get<std::string>();
    s.n = j.at("n").get<std::int64_t>();
    BetaParams carrier{j.at("gamma").get<double>(), j.at("beta").get<double>()};
    s.lp_beta.basis = LPBasis::beta(carrier);
    s.lp_beta.values = j.at("lp_beta").get<std::vector<double>>();
    s.lp_unif.basis = LPBasis::uniform();
    s.lp_unif.values = j.at("lp_unif").get<std::vector<double>>();
    if (s.lp_beta.values.size() != s.lp_unif.values.size()) {
        throw std::runtime_error("wire: LP summary channel lengths differ");
    }
    s.h_statistic = j.at("h").get<double>();
    return s;
}

json model_to_json(const SkewBetaModel& model) {
    json j;
    j["gamma"] = model.carrier.gamma;
    j["beta"] = model.carrier.beta;
    j["m"] = model.coefficients.order();
    j["coefficients"] = model.coefficients.values;
    j["n_total"] = model.n_total;
    j["eta"] = model.eta;
    j["repair_applied"] = model.repair_applied;
    return j;
}

SkewBetaModel model_from_json(const json& j) {
    const BetaParams carrier{j.at("gamma").get<double>(), j.at("beta").get<double>()};
    LPCoefficients coeffs;
    coeffs.basis = LPBasis::beta(carrier);
    coeffs.values = j.at("coefficients").get<std::vector<double>>();
    if (j.at("m").get<int>() != static_cast<int>(coeffs.values.size())) {
        throw std::runtime_error("wire: model order disagrees with coefficient count");
    }
    SkewBetaModel model = SkewBetaModel::build(carrier, std::move(coeffs),
                                               j.at("n_total").get<std::int64_t>(),
                                               j.at("eta").get<double>());
    if (model.repair_applied != j.at("repair_applied").get<bool>()) {
        throw std::runtime_error("wire: model repair flag disagrees with rebuilt model");
    }
    return model;
}

json partition_decision_to_json(const PartitionDecision& d) {
    json j;
    j["threshold"] = d.threshold;
    j["n_rejected"] = d.n_rejected;
    j["n_left"] = d.n_left;
    j["n_right"] = d.n_right;
    j["rejected_indices"] = d.rejected_indices;
    return j;
}

PartitionDecision partition_decision_from_json(const json& j) {
    PartitionDecision d;
    d.threshold = j.at("threshold").get<double>();
    d.n_rejected = j.at("n_rejected").get<std::int64_t>();
    d.n_left = j.at("n_left").get<std::int64_t>();
    d.n_right = j.at("n_right").get<std::int64_t>();
    d.rejected_indices = j.at("rejected_indices").get<std::vector<std::int64_t>>();
    return d;
}

json rejection_report_to_json(const RejectionReport& r) {
    json j;
    j["method"] = method_name(r.method);
    j["alpha"] = r.alpha;
    j["eta_used"] = r.eta_used;
    j["global_threshold"] = r.global_threshold;
    j["total_rejected"] = r.total_rejected;
    j["total_left"] = r.total_left;
    j["total_right"] = r.total_right;
    json per = json::object();
    for (const auto& [id, d] : r.per_partition) {
        per[id] = partition_decision_to_json(d);
    }
    j["per_partition"] = std::move(per);
    return j;
}

std::string make_round1_request() {
    json payload;
    payload["type"] = "request_moments";
    return envelope(1, std::move(payload));
}

std::string make_round2_request(const BetaParams& carrier, int m) {
    json payload;
    payload["type"] = "carrier";
    payload["gamma"] = carrier.gamma;
    payload["beta"] = carrier.beta;
    payload["m"] = m;
    return envelope(2, std::move(payload));
}

std::string make_round3_request(const ThresholdBroadcast& b) {
    json payload;
    payload["type"] = "threshold";
    payload["method"] = method_name(b.method);
    payload["alpha"] = b.alpha;
    payload["eta"] = b.eta;
    if (b.method == Method::LocalFdr) {
        if (!b.model) {
            throw std::runtime_error("wire: local-fdr broadcast needs the density model");
        }
        payload["model"] = model_to_json(*b.model);
    } else {
        payload["u_max"] = b.u_max;
    }
    return envelope(3, std::move(payload));
}

std::string make_round1_response(const MomentSummary& s) {
    return envelope(1, moment_summary_to_json(s));
}

std::string make_round2_response(const LPSummary& s) {
    return envelope(2, lp_summary_to_json(s));
}

std::string make_round3_response(const std::string& id, Method method,
                                 const PartitionDecision& d) {
    json out;
    out["type"] = "decision_counts";
    out["id"] = id;
    out["method"] = method_name(method);
    out["threshold"] = d.threshold;
    out["n_rejected"] = d.n_rejected;
    out["n_left"] = d.n_left;
    out["n_right"] = d.n_right;
    return envelope(3, std::move(out));
}

PartitionDecision decision_counts_from_json(const json& payload) {
    PartitionDecision d;
    d.threshold = payload.at("threshold").get<double>();
    d.n_rejected = payload.at("n_rejected").get<std::int64_t>();
    d.n_left = payload.at("n_left").get<std::int64_t>();
    d.n_right = payload.at("n_right").get<std::int64_t>();
    return d;
}

ParsedMessage parse_message(const std::string& line) {
    json msg;
    try {
        msg = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("wire: malformed message: ") + e.what());
    }
    ParsedMessage out;
    try {
        const int version = msg.at("schema_version").get<int>();
        if (version != kSchemaVersion) {
            throw std::runtime_error("wire: unsupported schema version " +
                                     std::to_string(version));
        }
        out.round = msg.at("round").get<int>();
        out.payload = msg.at("payload");
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("wire: incomplete envelope: ") + e.what());
    }
    if (out.round < 1 || out.round > 3) {
        throw std::runtime_error("wire: round out of range");
    }
    return out;
}

ThresholdBroadcast threshold_broadcast_from_json(const json& payload) {
    expect_type(payload, "threshold");
    ThresholdBroadcast b;
    b.method = method_from_name(payload.at("method").get<std::string>());
    b.alpha = payload.at("alpha").get<double>();
    b.eta = payload.at("eta").get<double>();
    if (b.method == Method::LocalFdr) {
        b.model = model_from_json(payload.at("model"));
    } else {
        b.u_max = payload.at("u_max").get<double>();
    }
    return b;
}

}  // namespace lpfdr::wire
