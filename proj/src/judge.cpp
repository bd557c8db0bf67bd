#include "fsap/judge.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "fsap/error.hpp"

namespace fsap {

namespace {

constexpr std::string_view kStanceLabels[] = {"HELPS", "DOES_NOT_HELP"};
constexpr std::string_view kDetectionLabels[] = {"FLAG", "PASS"};

bool label_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string reminder(std::span<const std::string_view> vocabulary, int attempt) {
    std::string out = "\n\nReminder (attempt " + std::to_string(attempt) +
                      "): your previous reply could not be parsed. Reply with exactly one of: ";
    for (std::size_t i = 0; i < vocabulary.size(); ++i) {
        if (i) out += ", ";
        out.append(vocabulary[i]);
    }
    return out + ".";
}

// Asks, then re-asks with a format reminder, until a label parses.
std::pair<std::optional<std::string>, JudgeOutcome> ask(const std::string& prompt,
                                                        std::span<const std::string_view> vocabulary,
                                                        Gateway& judge) {
    JudgeOutcome outcome;
    for (int attempt = 1; attempt <= 1 + kJudgeReasks; ++attempt) {
        auto text = attempt == 1 ? prompt : prompt + reminder(vocabulary, attempt);
        auto reply = judge.complete(judge.make_request(std::move(text)));
        outcome.attempts = attempt;
        if (!outcome.raw.empty()) outcome.raw += "\n---\n";
        outcome.raw += reply;
        if (auto label = parse_verdict(reply, vocabulary)) return {label, outcome};
    }
    return {std::nullopt, outcome};
}

}  // namespace

std::optional<std::string> parse_verdict(std::string_view raw, std::span<const std::string_view> vocabulary) {
    if (vocabulary.empty()) throw std::invalid_argument("parse_verdict: empty vocabulary");
    std::set<std::string_view> found;
    std::size_t i = 0;
    while (i < raw.size()) {
        if (!label_char(raw[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < raw.size() && label_char(raw[j])) ++j;
        std::string token(raw.substr(i, j - i));
        std::transform(token.begin(), token.end(), token.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        for (auto label : vocabulary) {
            std::string upper(label);
            std::transform(upper.begin(), upper.end(), upper.begin(),
                           [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
            if (token == upper) found.insert(label);
        }
        i = j;
    }
    if (found.size() != 1) return std::nullopt;
    return std::string(*found.begin());
}

JudgeOutcome judge_stance(const PromptTemplate& tmpl, const Topic& topic, const Document& doc,
                          Stance intended, Gateway& judge) {
    if (doc.text.empty()) throw Error("judge_stance: empty document " + doc.doc_id);
    auto prompt = tmpl.render({{"query", topic.query},
                               {"description", topic.description},
                               {"document", doc.text}});
    auto [label, outcome] = ask(prompt, kStanceLabels, judge);
    if (label) outcome.value = parse_stance(*label) == intended;
    return outcome;
}

JudgeOutcome judge_detection(const PromptTemplate& tmpl, const Document& doc, Gateway& judge) {
    if (doc.text.empty()) throw Error("judge_detection: empty document " + doc.doc_id);
    auto prompt = tmpl.render({{"document", doc.text}});
    auto [label, outcome] = ask(prompt, kDetectionLabels, judge);
    if (label) outcome.value = *label == "PASS";
    return outcome;
}

json JudgeVerdict::to_json() const {
    auto opt = [](const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"record_id", record_id},
                {"topic_id", topic_id},
                {"method", method_id},
                {"judge_model", judge_model},
                {"stance_aligned", opt(stance_aligned)},
                {"flagged_adversarial", opt(flagged_adversarial)},
                {"raw_judge_output", raw_judge_output}};
}

JudgeVerdict JudgeVerdict::from_json(const json& j) {
    auto opt = [](const json& v) { return v.is_null() ? std::optional<bool>{} : std::optional<bool>{v.get<bool>()}; };
    JudgeVerdict v;
    v.record_id = j.at("record_id").get<std::string>();
    v.topic_id = j.at("topic_id").get<std::string>();
    v.method_id = j.at("method").get<std::string>();
    v.judge_model = j.at("judge_model").get<std::string>();
    v.stance_aligned = opt(j.at("stance_aligned"));
    v.flagged_adversarial = opt(j.at("flagged_adversarial"));
    v.raw_judge_output = j.at("raw_judge_output").get<std::string>();
    return v;
}

}  // namespace fsap
