#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "lpfdr/inference.hpp"

namespace lpfdr::wire {

// Messages are single-line JSON envelopes {schema_version, round, payload}.
// Every number is serialized as the shortest decimal that reloads to the
// identical double, so a round trip through the wire is bit-exact.
using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

json moment_summary_to_json(const MomentSummary& s);
MomentSummary moment_summary_from_json(const json& j);

json lp_summary_to_json(const LPSummary& s);
LPSummary lp_summary_from_json(const json& j);

// The documented model object {gamma, beta, m, coefficients, n_total, eta,
// repair_applied}; loading rebuilds the repair cache from the coefficients.
json model_to_json(const SkewBetaModel& model);
SkewBetaModel model_from_json(const json& j);

// Full decision object as written into report.json (includes the index list).
json partition_decision_to_json(const PartitionDecision& d);
PartitionDecision partition_decision_from_json(const json& j);

// Round-3 acknowledgment body: threshold plus counts, never the index list,
// so per-partition traffic stays fixed-size no matter how many values a
// partition holds or rejects. rejected_indices is left empty.
PartitionDecision decision_counts_from_json(const json& payload);

json rejection_report_to_json(const RejectionReport& r);

// Round-3 instruction to one worker: apply a p-value cutoff (threshold
// methods; weighted-BH sends each worker its own cutoff) or the broadcast
// density model (local-fdr).
struct ThresholdBroadcast {
    Method method = Method::SmoothBH;
    double alpha = 0.0;  // alpha0 for HigherCriticism
    double eta = 1.0;
    double u_max = 0.0;
    std::optional<SkewBetaModel> model;  // LocalFdr only
};

std::string make_round1_request();
std::string make_round2_request(const BetaParams& carrier, int m);
std::string make_round3_request(const ThresholdBroadcast& b);

std::string make_round1_response(const MomentSummary& s);
std::string make_round2_response(const LPSummary& s);

// Counts-only acknowledgment (see decision_counts_from_json): the worker
// applies the broadcast cutoff locally and keeps its rejection list local.
std::string make_round3_response(const std::string& id, Method method,
                                 const PartitionDecision& d);

struct ParsedMessage {
    int round = 0;
    json payload;
};

// Parses and validates one wire line (schema version, envelope shape).
ParsedMessage parse_message(const std::string& line);

ThresholdBroadcast threshold_broadcast_from_json(const json& payload);

}  // namespace lpfdr::wire
