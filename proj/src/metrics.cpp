#include "fsap/metrics.hpp"

#include <set>
#include <unordered_map>

#include "fsap/error.hpp"

namespace fsap {

using boost::multiprecision::cpp_int;

std::string to_string(const Fraction& f) {
    const auto num = boost::multiprecision::numerator(f);
    const auto den = boost::multiprecision::denominator(f);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

Fraction parse_fraction(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Fraction(cpp_int(s));
        cpp_int num(s.substr(0, slash)), den(s.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("zero denominator");
        return Fraction(num, den);
    } catch (const std::exception&) {
        throw Error("malformed fraction '" + s + "'");
    }
}

double to_double(const Fraction& f) { return f.convert_to<double>(); }

std::string percent(const Fraction& f) {
    const auto num = boost::multiprecision::numerator(f);
    const auto den = boost::multiprecision::denominator(f);
    if (num < 0) throw std::invalid_argument("percent: negative value");
    cpp_int tenths = (num * 2000 + den) / (2 * den);
    cpp_int whole = tenths / 10, frac = tenths % 10;
    return whole.str() + "." + frac.str();
}

Fraction help_defeat_rate(std::span<const double> helpful_scores, double adversarial_score) {
    if (helpful_scores.empty()) throw Error("help_defeat_rate: no helpful scores");
    std::size_t defeated = 0;
    for (double h : helpful_scores)
        if (adversarial_score > h) ++defeated;
    return Fraction(cpp_int(defeated), cpp_int(helpful_scores.size()));
}

Fraction mhdr(std::span<const Fraction> hdrs) {
    if (hdrs.empty()) throw Error("mhdr: no adversarial documents");
    Fraction sum = 0;
    for (const auto& h : hdrs) {
        if (h < 0 || h > 1) throw Error("mhdr: rate outside [0, 1]");
        sum += h;
    }
    return sum / Fraction(cpp_int(hdrs.size()));
}

double mhdr(std::span<const double> hdrs) {
    if (hdrs.empty()) throw Error("mhdr: no adversarial documents");
    double sum = 0.0;
    for (double h : hdrs) {
        if (!(h >= 0.0 && h <= 1.0)) throw Error("mhdr: rate outside [0, 1]");
        sum += h;
    }
    return sum / static_cast<double>(hdrs.size());
}

json HelpDefeatResult::to_json() const {
    json per = json::array();
    for (const auto& a : per_adversarial)
        per.push_back(json{{"doc_id", a.doc_id}, {"hdr", to_string(a.hdr)}, {"hdr_value", to_double(a.hdr)}});
    return json{{"topic_id", topic_id},       {"method", method_id},
                {"scorer", scorer_id},        {"n_helpful", n_helpful},
                {"m_adversarial", m_adversarial}, {"mhdr", to_string(mhdr)},
                {"mhdr_value", to_double(mhdr)},  {"per_adversarial", per}};
}

HelpDefeatResult HelpDefeatResult::from_json(const json& j) {
    HelpDefeatResult r;
    r.topic_id = j.at("topic_id").get<std::string>();
    r.method_id = j.at("method").get<std::string>();
    r.scorer_id = j.at("scorer").get<std::string>();
    r.n_helpful = j.at("n_helpful").get<std::size_t>();
    r.m_adversarial = j.at("m_adversarial").get<std::size_t>();
    r.mhdr = parse_fraction(j.at("mhdr").get<std::string>());
    for (const auto& a : j.at("per_adversarial"))
        r.per_adversarial.push_back(
            AdversarialHdr{a.at("doc_id").get<std::string>(), parse_fraction(a.at("hdr").get<std::string>())});
    return r;
}

HelpDefeatResult compute_pool_metrics(std::span<const ScoredDocument> ranked, const RankingPool& pool,
                                      const std::string& method_id, const std::string& scorer_id) {
    std::unordered_map<std::string, double> score_of;
    for (const auto& s : ranked) score_of.emplace(s.doc_id, s.score);
    auto lookup = [&](const std::string& doc_id) {
        auto it = score_of.find(doc_id);
        if (it == score_of.end())
            throw Error("topic " + pool.topic_id + ": no " + scorer_id + " score for " + doc_id);
        return it->second;
    };

    std::vector<double> helpful;
    helpful.reserve(pool.helpful.size());
    for (const auto& d : pool.helpful) helpful.push_back(lookup(d.doc_id));

    auto it = pool.adversarial.find(method_id);
    if (it == pool.adversarial.end() || it->second.empty())
        throw Error("topic " + pool.topic_id + ": no " + method_id + " adversarial documents");

    HelpDefeatResult r;
    r.topic_id = pool.topic_id;
    r.method_id = method_id;
    r.scorer_id = scorer_id;
    r.n_helpful = helpful.size();
    r.m_adversarial = it->second.size();
    std::vector<Fraction> hdrs;
    for (const auto& d : it->second) {
        hdrs.push_back(help_defeat_rate(helpful, lookup(d.doc_id)));
        r.per_adversarial.push_back(AdversarialHdr{d.doc_id, hdrs.back()});
    }
    r.mhdr = mhdr(hdrs);
    return r;
}

namespace {

Fraction mean(std::span<const Fraction> values) {
    Fraction sum = 0;
    for (const auto& v : values) sum += v;
    return sum / Fraction(cpp_int(values.size()));
}

}  // namespace

std::vector<MetricsReport> aggregate(std::span<const HelpDefeatResult> results,
                                     std::span<const JudgeVerdict> verdicts, Grouping grouping,
                                     const std::string& dataset, std::size_t generation_failures) {
    if (results.empty()) throw Error("aggregate: no results");
    const auto& method = results.front().method_id;
    std::map<std::string, std::vector<Fraction>> by_scorer;
    std::map<std::string, std::set<std::string>> topics_of;
    for (const auto& r : results) {
        if (r.method_id != method) throw Error("aggregate: results mix methods " + method + " and " + r.method_id);
        if (!topics_of[r.scorer_id].insert(r.topic_id).second)
            throw Error("aggregate: duplicate result for topic " + r.topic_id + " under " + r.scorer_id);
        by_scorer[r.scorer_id].push_back(r.mhdr);
    }

    MetricsReport base;
    base.dataset = dataset;
    base.method_id = method;
    base.generation_failures = generation_failures;
    std::size_t aligned = 0, passed = 0;
    for (const auto& v : verdicts) {
        if (v.method_id != method) continue;
        if (v.stance_aligned) {
            ++base.stance_judged;
            aligned += *v.stance_aligned ? 1 : 0;
        } else {
            ++base.stance_unparseable;
        }
        if (v.flagged_adversarial) {
            ++base.detection_judged;
            passed += *v.flagged_adversarial ? 0 : 1;
        } else {
            ++base.detection_unparseable;
        }
    }
    if (base.stance_judged) base.stance_alignment_rate = Fraction(cpp_int(aligned), cpp_int(base.stance_judged));
    if (base.detection_judged) base.detection_pass_rate = Fraction(cpp_int(passed), cpp_int(base.detection_judged));

    std::vector<MetricsReport> out;
    std::vector<Fraction> macros;
    for (const auto& [scorer, values] : by_scorer) {
        MetricsReport r = base;
        r.scorer_id = scorer;
        r.mhdr_macro = mean(values);
        r.topics = values.size();
        macros.push_back(r.mhdr_macro);
        out.push_back(std::move(r));
    }
    if (grouping == Grouping::per_scorer) return out;

    MetricsReport averaged = base;
    averaged.scorer_id = kAveragedScorer;
    averaged.mhdr_macro = mean(macros);
    averaged.topics = topics_of.begin()->second.size();
    return {averaged};
}

std::vector<SweepRow> support_size_sweep(const std::map<std::size_t, std::vector<HelpDefeatResult>>& results_by_k) {
    std::vector<SweepRow> rows;
    std::optional<std::map<std::string, std::set<std::string>>> reference;
    std::size_t reference_k = 0;
    for (const auto& [k, results] : results_by_k) {
        std::map<std::string, std::set<std::string>> coverage;
        std::map<std::string, std::vector<Fraction>> by_scorer;
        for (const auto& r : results) {
            coverage[r.scorer_id].insert(r.topic_id);
            by_scorer[r.scorer_id].push_back(r.mhdr);
        }
        if (!reference) {
            reference = coverage;
            reference_k = k;
        } else if (coverage != *reference) {
            throw Error("support_size_sweep: topic coverage at k=" + std::to_string(k) +
                        " differs from k=" + std::to_string(reference_k));
        }
        for (const auto& [scorer, values] : by_scorer)
            rows.push_back(SweepRow{k, scorer, mean(values), values.size()});
    }
    return rows;
}

std::string reports_csv(std::span<const MetricsReport> reports) {
    std::string out = "dataset,method,scorer,k,mhdr,stance_alignment,detection_pass\n";
    for (const auto& r : reports) {
        out += r.dataset + "," + r.method_id + "," + r.scorer_id + ",";
        if (r.k) out += std::to_string(*r.k);
        out += "," + percent(r.mhdr_macro) + ",";
        if (r.stance_alignment_rate) out += percent(*r.stance_alignment_rate);
        out += ",";
        if (r.detection_pass_rate) out += percent(*r.detection_pass_rate);
        out += "\n";
    }
    return out;
}

std::string scatter_csv(std::span<const MetricsReport> reports) {
    std::string out = "mhdr,pass_rate,method\n";
    for (const auto& r : reports) {
        out += percent(r.mhdr_macro) + ",";
        if (r.detection_pass_rate) out += percent(*r.detection_pass_rate);
        out += "," + r.method_id + "\n";
    }
    return out;
}

}  // namespace fsap
