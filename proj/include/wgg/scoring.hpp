#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wgg/core.hpp"
#include "wgg/embeddings.hpp"

namespace wgg {

struct ScoringConfig {
    double ta_threshold = 0.3;
    bool truncate_to_n = true;
};

using WordSet = std::set<std::string>;

struct MatchStep {
    int intersection = 0;
    int truth_index = -1;
    int predicted_index = -1;
};

struct Matching {
    // pairs[i] = predicted index matched to truth i, or nullopt for NULL.
    std::vector<std::optional<int>> pairs;
    std::vector<MatchStep> trace;
};

inline int intersection_size(const WordSet& a, const WordSet& b) {
    int n = 0;
    for (const auto& w : a)
        if (b.count(w)) ++n;
    return n;
}

// Greedy assignment: repeatedly take the (truth, predicted) pair with the
// greatest set intersection among unassigned pairs; ties go to the smaller
// truth index, then the smaller predicted index. Unmatched truths map to
// NULL; surplus predicted groups are left out of evaluation.
inline Matching match_groups(const std::vector<WordSet>& predicted,
                             const std::vector<WordSet>& truth) {
    Matching m;
    m.pairs.assign(truth.size(), std::nullopt);
    std::vector<bool> truth_used(truth.size(), false), pred_used(predicted.size(), false);
    std::size_t rounds = std::min(truth.size(), predicted.size());
    for (std::size_t r = 0; r < rounds; ++r) {
        int best = -1, bt = -1, bp = -1;
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (truth_used[t]) continue;
            for (std::size_t p = 0; p < predicted.size(); ++p) {
                if (pred_used[p]) continue;
                int is = intersection_size(truth[t], predicted[p]);
                if (is > best) { best = is; bt = static_cast<int>(t); bp = static_cast<int>(p); }
            }
        }
        truth_used[bt] = true;
        pred_used[bp] = true;
        m.pairs[bt] = bp;
        m.trace.push_back({best, bt, bp});
    }
    return m;
}

inline double group_f1(const WordSet& truth_group, const std::optional<WordSet>& predicted) {
    if (!predicted || predicted->empty() || truth_group.empty()) return 0.0;
    int tp = intersection_size(truth_group, *predicted);
    if (tp == 0) return 0.0;
    double precision = static_cast<double>(tp) / predicted->size();
    double recall = static_cast<double>(tp) / truth_group.size();
    return 2.0 * precision * recall / (precision + recall);
}

inline double game_ctd(const Matching& matching, const std::vector<WordSet>& truth,
                       const std::vector<WordSet>& predicted) {
    if (truth.empty()) return 0.0;
    int exact = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const auto& p = matching.pairs[t];
        if (p && predicted[*p] == truth[t]) ++exact;
    }
    return static_cast<double>(exact) / truth.size();
}

// True iff similarity(pred, matched) clears the threshold and strictly
// dominates similarity(pred, t) for every other true topic t.
inline bool topic_achieved(const std::string& pred_topic, const std::string& matched_true_topic,
                           const std::vector<std::string>& other_true_topics,
                           const EmbeddingTable& table, const ScoringConfig& cfg) {
    auto pv = embed_phrase(table, pred_topic);
    auto mv = embed_phrase(table, matched_true_topic);
    double sim = cosine(pv.values, mv.values);
    if (sim < cfg.ta_threshold) return false;
    for (const auto& other : other_true_topics) {
        auto ov = embed_phrase(table, other);
        if (cosine(pv.values, ov.values) >= sim) return false;
    }
    return true;
}

namespace detail {

inline std::vector<AnswerGroup> prepare_predicted(const ParsedAnswer& answer, int m,
                                                  const ScoringConfig& cfg) {
    // Dedupe words within a group, drop exact repeated (topic, words) blocks,
    // then truncate to the first m groups.
    std::vector<AnswerGroup> out;
    std::set<std::pair<std::string, std::vector<std::string>>> seen;
    for (const auto& g : answer.groups) {
        AnswerGroup clean;
        clean.topic = trim(g.topic);
        std::set<std::string> uniq;
        for (const auto& w : g.words) {
            std::string nw = normalize_word(w);
            if (!nw.empty() && uniq.insert(nw).second) clean.words.push_back(nw);
        }
        if (!seen.insert({clean.topic, clean.words}).second) continue;
        out.push_back(std::move(clean));
    }
    if (cfg.truncate_to_n && out.size() > static_cast<std::size_t>(m))
        out.resize(static_cast<std::size_t>(m));
    return out;
}

}  // namespace detail

// True when the raw answer restates a (topic, words) block verbatim, the
// multi-block pattern that first-m truncation may silently resolve.
inline bool has_repeated_blocks(const ParsedAnswer& answer) {
    std::set<std::pair<std::string, std::vector<std::string>>> seen;
    for (const auto& g : answer.groups) {
        std::vector<std::string> words;
        std::set<std::string> uniq;
        for (const auto& w : g.words) {
            std::string nw = normalize_word(w);
            if (!nw.empty() && uniq.insert(nw).second) words.push_back(nw);
        }
        if (!seen.insert({trim(g.topic), words}).second) return true;
    }
    return false;
}

inline GameScore score_game(const Game& game, const ParsedAnswer& answer,
                            const EmbeddingTable* table, const ScoringConfig& cfg = {}) {
    auto predicted_groups = detail::prepare_predicted(answer, game.m, cfg);

    std::vector<WordSet> truth, predicted;
    for (const auto& t : game.truth_groups) {
        WordSet s;
        for (const auto& w : t.words) s.insert(normalize_word(w));
        truth.push_back(std::move(s));
    }
    for (const auto& p : predicted_groups)
        predicted.emplace_back(p.words.begin(), p.words.end());

    Matching matching = match_groups(predicted, truth);

    GameScore score;
    score.matching.reserve(truth.size());
    double f1_sum = 0.0;
    int ta_count = 0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        const auto& pm = matching.pairs[t];
        score.matching.emplace_back(static_cast<int>(t), pm);
        double f1 = group_f1(truth[t], pm ? std::optional<WordSet>(predicted[*pm]) : std::nullopt);
        score.per_group_f1.push_back(f1);
        f1_sum += f1;

        bool ta = false;
        if (pm && table) {
            std::vector<std::string> others;
            for (std::size_t o = 0; o < truth.size(); ++o)
                if (o != t) others.push_back(game.truth_groups[o].topic);
            ta = topic_achieved(predicted_groups[*pm].topic, game.truth_groups[t].topic, others,
                                *table, cfg);
        }
        score.topic_achieved.push_back(ta);
        if (ta) ++ta_count;
    }
    if (!truth.empty()) {
        score.game_f1 = f1_sum / truth.size();
        score.ta_rate = static_cast<double>(ta_count) / truth.size();
    }
    score.game_ctd = game_ctd(matching, truth, predicted);
    return score;
}

inline json score_to_json(const GameScore& s) {
    json j;
    j["matching"] = json::array();
    for (const auto& [t, p] : s.matching)
        j["matching"].push_back({{"truth", t}, {"predicted", p ? json(*p) : json(nullptr)}});
    j["per_group_f1"] = s.per_group_f1;
    j["game_f1"] = s.game_f1;
    j["game_ctd"] = s.game_ctd;
    j["topic_achieved"] = s.topic_achieved;
    j["ta_rate"] = s.ta_rate;
    return j;
}

inline GameScore score_from_json(const json& j) {
    GameScore s;
    for (const auto& mj : j.at("matching")) {
        std::optional<int> p;
        if (!mj.at("predicted").is_null()) p = mj.at("predicted").get<int>();
        s.matching.emplace_back(mj.at("truth").get<int>(), p);
    }
    s.per_group_f1 = j.at("per_group_f1").get<std::vector<double>>();
    s.game_f1 = j.at("game_f1").get<double>();
    s.game_ctd = j.at("game_ctd").get<double>();
    s.topic_achieved = j.at("topic_achieved").get<std::vector<bool>>();
    s.ta_rate = j.at("ta_rate").get<double>();
    return s;
}

}  // namespace wgg
