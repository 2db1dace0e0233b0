#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "wgg/core.hpp"
#include "wgg/embeddings.hpp"
#include "wgg/prompts.hpp"
#include "wgg/util.hpp"

namespace wgg {

struct ModelConfig {
    std::string endpoint;       // e.g. https://api.example.com/v1/chat/completions
    std::string model;
    std::string api_key_env;    // environment variable holding the key
    double temperature = 0.6;
    double top_p = 0.9;
    int max_tokens = 512;
    int max_attempts = 3;
    double backoff_base_s = 0.5;
    int parallelism = 1;
};

struct RawResponse {
    std::string game_id;
    std::string fingerprint;
    std::string text;
    double latency_ms = 0.0;
    int attempts = 0;
    bool from_cache = false;
};

class QueryError : public std::runtime_error {
public:
    explicit QueryError(const std::string& msg, bool auth = false)
        : std::runtime_error(msg), auth_failure(auth) {}
    bool auth_failure = false;
};

class ParseFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string render_pool(const std::vector<std::string>& words, char quote = '\'') {
    std::string out = "[";
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ", ";
        out += quote;
        out += words[i];
        out += quote;
    }
    out += "]";
    return out;
}

inline std::string replace_all(std::string text, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

// Game prompt: pick the group-count template and substitute word count,
// group count, and the shuffled pool.
inline std::string build_prompt(const Game& game) {
    std::string text = prompts::game_template(game.m);
    text = replace_all(text, "#*#", std::to_string(game.m * game.n));
    text = replace_all(text, "$*$", std::to_string(game.m));
    text = replace_all(text, "{}", render_pool(game.pool));
    return text;
}

inline std::string build_reformat_prompt(const std::string& raw) {
    return std::string(prompts::kReformatPrompt) + "\n\n" + raw;
}

inline std::string build_overlap_prompt(const Game& game) {
    std::vector<std::string> topics;
    for (const auto& t : game.truth_groups) topics.push_back(t.topic);
    std::string text = prompts::kOverlapPrompt;
    text = replace_all(text, "LIST_TOPICS", render_pool(topics, '"'));
    text = replace_all(text, "LIST_WORDS", render_pool(game.pool, '"'));
    return text;
}

inline std::string request_fingerprint(const ModelConfig& cfg, const std::string& prompt) {
    std::ostringstream os;
    os << cfg.model << '\x1f' << prompt << '\x1f' << cfg.temperature << '\x1f' << cfg.top_p
       << '\x1f' << cfg.max_tokens;
    std::uint64_t h = fnv1a(os.str());
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
}

// Content-addressed on-disk response cache keyed by request fingerprint.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::string dir) : dir_(std::move(dir)) {
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }

    bool enabled() const { return !dir_.empty(); }

    std::optional<RawResponse> get(const std::string& fingerprint) const {
        if (!enabled()) return std::nullopt;
        std::ifstream in(path(fingerprint));
        if (!in) return std::nullopt;
        json j;
        in >> j;
        RawResponse r;
        r.fingerprint = fingerprint;
        r.text = j.at("text").get<std::string>();
        r.latency_ms = j.value("latency_ms", 0.0);
        r.attempts = j.value("attempts", 0);
        r.from_cache = true;
        return r;
    }

    void put(const RawResponse& r, const ModelConfig& cfg, const std::string& prompt) const {
        if (!enabled()) return;
        json j;
        j["fingerprint"] = r.fingerprint;
        j["model"] = cfg.model;
        j["prompt"] = prompt;
        j["text"] = r.text;
        j["latency_ms"] = r.latency_ms;
        j["attempts"] = r.attempts;
        std::ofstream out(path(r.fingerprint));
        out << j.dump(2) << '\n';
    }

private:
    std::string path(const std::string& fp) const { return dir_ + "/" + fp + ".json"; }
    std::string dir_;
};

namespace detail {

struct EndpointParts {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline EndpointParts split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw QueryError("malformed endpoint URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline bool retryable_status(int status) {
    return status == 429 || status == 408 || (status >= 500 && status < 600);
}

}  // namespace detail

// Single chat-completions request with bounded retries and exponential
// backoff. Auth failures and other client errors do not retry.
inline RawResponse query_model(const ModelConfig& cfg, const std::string& prompt,
                               const ResponseCache& cache = {}, const std::string& game_id = "") {
    RawResponse resp;
    resp.game_id = game_id;
    resp.fingerprint = request_fingerprint(cfg, prompt);
    if (auto cached = cache.get(resp.fingerprint)) {
        cached->game_id = game_id;
        return *cached;
    }

    auto parts = detail::split_endpoint(cfg.endpoint);
    httplib::Client client(parts.base);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);

    httplib::Headers headers;
    if (!cfg.api_key_env.empty()) {
        const char* key = std::getenv(cfg.api_key_env.c_str());
        if (key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    json body;
    body["model"] = cfg.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = cfg.temperature;
    body["top_p"] = cfg.top_p;
    body["max_tokens"] = cfg.max_tokens;
    std::string payload = body.dump();

    auto start = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        resp.attempts = attempt;
        auto res = client.Post(parts.path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failure: " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
            throw QueryError("authentication failed (HTTP " + std::to_string(res->status) + ")",
                             /*auth=*/true);
        } else if (res->status == 200) {
            try {
                json reply = json::parse(res->body);
                resp.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const std::exception& e) {
                throw QueryError("malformed endpoint reply: " + std::string(e.what()));
            }
            auto end = std::chrono::steady_clock::now();
            resp.latency_ms = std::chrono::duration<double, std::milli>(end - start).count();
            cache.put(resp, cfg, prompt);
            return resp;
        } else if (detail::retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
        } else {
            throw QueryError("HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        if (attempt < cfg.max_attempts) {
            auto delay = cfg.backoff_base_s * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
    }
    throw QueryError("exhausted " + std::to_string(cfg.max_attempts) + " attempts: " + last_error);
}

// Extracts every "<TOPIC>: ['w1', 'w2', ...]" block, in order. Zero groups
// is a parse failure (the signal for the reformat fallback).
inline ParsedAnswer parse_answer(const std::string& raw) {
    static const std::regex block_re(R"(<([^<>]+)>\s*:\s*\[([^\]]*)\])");
    static const std::regex word_re(R"re('([^']*)'|"([^"]*)")re");

    ParsedAnswer answer;
    answer.raw_text = raw;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), block_re);
         it != std::sregex_iterator(); ++it) {
        AnswerGroup group;
        group.topic = trim((*it)[1].str());
        if (group.topic.empty()) continue;
        std::string list = (*it)[2].str();
        std::set<std::string> seen;
        for (auto wit = std::sregex_iterator(list.begin(), list.end(), word_re);
             wit != std::sregex_iterator(); ++wit) {
            std::string w = trim((*wit)[1].matched ? (*wit)[1].str() : (*wit)[2].str());
            if (!w.empty() && seen.insert(w).second) group.words.push_back(w);
        }
        answer.groups.push_back(std::move(group));
    }
    if (answer.groups.empty()) throw ParseFailure("no <TOPIC>: [...] groups found in response");
    return answer;
}

using QueryFn = std::function<RawResponse(const ModelConfig&, const std::string&)>;

inline QueryFn default_query_fn(const ResponseCache& cache = {}) {
    return [cache](const ModelConfig& cfg, const std::string& prompt) {
        return query_model(cfg, prompt, cache);
    };
}

// One repair pass: wrap the unparseable text in the reformat prompt, query
// the configured repair model, and re-parse. A second failure propagates.
inline ParsedAnswer reformat_answer(const ModelConfig& repair_cfg, const std::string& raw,
                                    const QueryFn& query) {
    RawResponse repaired = query(repair_cfg, build_reformat_prompt(raw));
    ParsedAnswer answer = parse_answer(repaired.text);
    answer.raw_text = raw;
    answer.was_reformatted = true;
    return answer;
}

struct OverlapProposals {
    std::map<std::string, std::vector<std::string>> by_topic;
    bool dropped_out_of_pool = false;
};

namespace detail {

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Parses a Python-dict-style "topic": [words...] mapping. Topic matching
// against the game is case-insensitive; the A.3 exemplar itself changes case.
inline OverlapProposals parse_proposals(const std::string& text, const Game& game) {
    static const std::regex entry_re(R"(["']([^"']+)["']\s*:\s*\[([^\]]*)\])");
    static const std::regex word_re(R"re('([^']*)'|"([^"]*)")re");

    std::map<std::string, std::vector<std::string>> raw;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), entry_re);
         it != std::sregex_iterator(); ++it) {
        std::vector<std::string> words;
        std::string list = (*it)[2].str();
        for (auto wit = std::sregex_iterator(list.begin(), list.end(), word_re);
             wit != std::sregex_iterator(); ++wit)
            words.push_back(trim((*wit)[1].matched ? (*wit)[1].str() : (*wit)[2].str()));
        raw[lower(trim((*it)[1].str()))] = std::move(words);
    }
    if (raw.empty()) throw ParseFailure("no topic mapping found in overlap response");

    std::set<std::string> pool;
    for (const auto& w : game.pool) pool.insert(normalize_word(w));

    OverlapProposals out;
    for (const auto& t : game.truth_groups) {
        auto it = raw.find(lower(trim(t.topic)));
        if (it == raw.end()) throw ParseFailure("overlap response missing topic '" + t.topic + "'");
        std::vector<std::string> kept;
        for (const auto& w : it->second) {
            std::string nw = normalize_word(w);
            if (pool.count(nw))
                kept.push_back(nw);
            else
                out.dropped_out_of_pool = true;
        }
        out.by_topic[t.topic] = std::move(kept);
    }
    return out;
}

}  // namespace detail

// Candidate proposal probe: ask the model to assign pool words to the true
// topics with replacement, then parse the returned mapping. One repair
// attempt on parse failure.
inline OverlapProposals probe_overlap(const ModelConfig& cfg, const Game& game,
                                      const QueryFn& query) {
    std::string prompt = build_overlap_prompt(game);
    RawResponse resp = query(cfg, prompt);
    try {
        return detail::parse_proposals(resp.text, game);
    } catch (const ParseFailure&) {
        RawResponse repaired = query(cfg, build_reformat_prompt(resp.text));
        return detail::parse_proposals(repaired.text, game);
    }
}

// Offline deterministic prober for networkless runs: a pool word is proposed
// for every topic whose embedded similarity clears the threshold, and always
// for its best-scoring topic. Not part of the published procedure.
inline OverlapProposals probe_overlap_offline(const Game& game, const EmbeddingTable& table,
                                              double threshold = 0.4) {
    OverlapProposals out;
    std::vector<Vector> topic_vecs;
    for (const auto& t : game.truth_groups) {
        out.by_topic[t.topic] = {};
        topic_vecs.push_back(embed_phrase(table, t.topic).values);
    }
    for (const auto& w : game.pool) {
        Vector wv = embed_phrase(table, w).values;
        int best = 0;
        double best_sim = -2.0;
        std::vector<double> sims;
        for (std::size_t t = 0; t < topic_vecs.size(); ++t) {
            double s = cosine(wv, topic_vecs[t]);
            sims.push_back(s);
            if (s > best_sim) { best_sim = s; best = static_cast<int>(t); }
        }
        for (std::size_t t = 0; t < topic_vecs.size(); ++t)
            if (sims[t] > threshold || static_cast<int>(t) == best)
                out.by_topic[game.truth_groups[t].topic].push_back(normalize_word(w));
    }
    return out;
}

}  // namespace wgg
