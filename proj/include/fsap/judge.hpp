#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsap/corpus.hpp"
#include "fsap/llm_gateway.hpp"
#include "fsap/templates.hpp"
#include "fsap/util.hpp"

namespace fsap {

/// Re-asks after an unparseable judge reply.
inline constexpr int kJudgeReasks = 2;

/// Finds the single vocabulary label in a judge reply (case-insensitive,
/// whole tokens only). No label, or two different labels: nullopt.
std::optional<std::string> parse_verdict(std::string_view raw, std::span<const std::string_view> vocabulary);

/// Outcome of one judging question; `value` is empty when the reply stayed unparseable.
struct JudgeOutcome {
    std::optional<bool> value;
    std::string raw;
    int attempts = 0;
};

/// True iff the judge labels the document's stance as `intended`.
JudgeOutcome judge_stance(const PromptTemplate& tmpl, const Topic& topic, const Document& doc,
                          Stance intended, Gateway& judge);

/// True iff the judge lets the document PASS (not flagged as adversarial).
JudgeOutcome judge_detection(const PromptTemplate& tmpl, const Document& doc, Gateway& judge);

struct JudgeVerdict {
    std::string record_id;
    std::string topic_id;
    std::string method_id;
    std::string judge_model;
    std::optional<bool> stance_aligned;
    std::optional<bool> flagged_adversarial;
    std::string raw_judge_output;

    json to_json() const;
    static JudgeVerdict from_json(const json& j);
};

}  // namespace fsap
