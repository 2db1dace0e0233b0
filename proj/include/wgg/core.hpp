#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wgg/util.hpp"

namespace wgg {

using json = nlohmann::ordered_json;

constexpr std::size_t kGroupingWordCount = 4;

inline const std::set<std::string>& known_tags() {
    static const std::set<std::string> tags = {
        "general_knowledge", "cultural_pop_culture", "linguistic"};
    return tags;
}

// One topic with its four member words; the dataset atom.
struct WordGrouping {
    std::string id;
    std::string language;
    std::string topic;
    std::optional<std::string> topic_translation;
    std::vector<std::string> words;
    bool culturally_related = false;
    std::vector<std::string> tags;
};

struct GroupingDataset {
    std::string subset_name;
    std::vector<WordGrouping> groupings;
};

struct TruthGroup {
    std::string topic;
    std::vector<std::string> words;
};

// An m-by-n game instance with a seeded shuffled pool.
struct Game {
    std::string id;
    std::string subset_name;
    int m = 0;
    int n = 0;
    std::vector<TruthGroup> truth_groups;
    std::vector<std::string> pool;
    std::uint64_t seed = 0;
};

struct AnswerGroup {
    std::string topic;
    std::vector<std::string> words;
};

// Ordered groups extracted from raw model text.
struct ParsedAnswer {
    std::vector<AnswerGroup> groups;
    std::string raw_text;
    bool was_reformatted = false;
};

struct GameScore {
    std::vector<std::pair<int, std::optional<int>>> matching;  // (truth, predicted or nullopt)
    std::vector<double> per_group_f1;
    double game_f1 = 0.0;
    double game_ctd = 0.0;
    std::vector<bool> topic_achieved;
    double ta_rate = 0.0;
};

struct Violation {
    std::string grouping_id;
    std::string rule;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Canonical word form: surrounding-whitespace trim. Comparison is exact and
// case-sensitive after this.
inline std::string normalize_word(std::string_view w) { return trim(w); }

inline json grouping_to_json(const WordGrouping& g) {
    json j;
    j["id"] = g.id;
    j["language"] = g.language;
    j["topic"] = g.topic;
    j["topic_translation"] = g.topic_translation ? json(*g.topic_translation) : json(nullptr);
    j["words"] = g.words;
    j["culturally_related"] = g.culturally_related;
    j["tags"] = g.tags;
    return j;
}

inline WordGrouping grouping_from_json(const json& j) {
    WordGrouping g;
    g.id = j.at("id").get<std::string>();
    g.language = j.at("language").get<std::string>();
    g.topic = j.at("topic").get<std::string>();
    if (j.contains("topic_translation") && !j.at("topic_translation").is_null())
        g.topic_translation = j.at("topic_translation").get<std::string>();
    g.words = j.at("words").get<std::vector<std::string>>();
    g.culturally_related = j.at("culturally_related").get<bool>();
    if (j.contains("tags")) g.tags = j.at("tags").get<std::vector<std::string>>();
    return g;
}

inline GroupingDataset load_groupings(const std::string& path, const std::string& subset_name = "") {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open groupings file: " + path);
    GroupingDataset d;
    d.subset_name = subset_name;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            d.groupings.push_back(grouping_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw LoadError("malformed record at " + path + ":" + std::to_string(line_no) +
                            ": " + e.what());
        }
    }
    return d;
}

inline void save_groupings(const GroupingDataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write groupings file: " + path);
    for (const auto& g : d.groupings) out << grouping_to_json(g).dump() << '\n';
}

inline ValidationReport validate_dataset(const GroupingDataset& d) {
    ValidationReport rep;
    auto add = [&](const std::string& id, const std::string& rule, const std::string& msg) {
        rep.violations.push_back({id, rule, msg});
    };
    std::set<std::string> seen_topics;
    for (const auto& g : d.groupings) {
        if (g.words.size() != kGroupingWordCount)
            add(g.id, "word-count", "expected 4 words, got " + std::to_string(g.words.size()));
        std::set<std::string> uniq;
        for (const auto& w : g.words) {
            std::string nw = normalize_word(w);
            if (nw.empty())
                add(g.id, "empty-word", "empty word after trim");
            else if (!uniq.insert(nw).second)
                add(g.id, "duplicate-word", "repeated word '" + nw + "'");
        }
        if (trim(g.topic).empty()) add(g.id, "empty-topic", "topic is empty");
        if (g.tags.size() > 1)
            add(g.id, "tag-count", "at most one tag allowed, got " + std::to_string(g.tags.size()));
        for (const auto& t : g.tags)
            if (!known_tags().count(t)) add(g.id, "unknown-tag", "unknown tag '" + t + "'");
        if (!trim(g.topic).empty() && !seen_topics.insert(trim(g.topic)).second)
            add(g.id, "duplicate-topic", "topic '" + trim(g.topic) + "' repeats in dataset");
    }
    return rep;
}

inline json game_to_json(const Game& g) {
    json j;
    j["id"] = g.id;
    j["subset"] = g.subset_name;
    j["m"] = g.m;
    j["n"] = g.n;
    j["seed"] = g.seed;
    j["groups"] = json::array();
    for (const auto& t : g.truth_groups) j["groups"].push_back({{"topic", t.topic}, {"words", t.words}});
    j["pool"] = g.pool;
    return j;
}

inline Game game_from_json(const json& j) {
    Game g;
    g.id = j.at("id").get<std::string>();
    g.subset_name = j.at("subset").get<std::string>();
    g.m = j.at("m").get<int>();
    g.n = j.at("n").get<int>();
    g.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("groups"))
        g.truth_groups.push_back({tj.at("topic").get<std::string>(),
                                  tj.at("words").get<std::vector<std::string>>()});
    g.pool = j.at("pool").get<std::vector<std::string>>();
    return g;
}

inline Game load_game(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open game file: " + path);
    json j;
    in >> j;
    return game_from_json(j);
}

}  // namespace wgg
