#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "wgg/llm.hpp"

using namespace wgg;

namespace {

Game make_game(int m, int n) {
    Game g;
    g.id = "t";
    g.subset_name = "en";
    g.m = m;
    g.n = n;
    int w = 0;
    for (int t = 0; t < m; ++t) {
        TruthGroup tg;
        tg.topic = "Topic" + std::to_string(t);
        for (int i = 0; i < n; ++i) tg.words.push_back("word" + std::to_string(w++));
        g.truth_groups.push_back(std::move(tg));
    }
    for (const auto& t : g.truth_groups)
        g.pool.insert(g.pool.end(), t.words.begin(), t.words.end());
    return g;
}

struct ParseFixture {
    std::string name;
    std::string text;
    // Expected groups as (topic, words); empty means a ParseFailure.
    std::vector<std::pair<std::string, std::vector<std::string>>> expected;
};

// Response texts modeled on the output styles real chat models produce:
// clean answers, prose preambles, numbered restatements, self-corrections,
// markdown wrappers, and outright junk.
const std::vector<ParseFixture> kParserCorpus = {
    {"clean single group", "<Animals>: ['Cat', 'Dog', 'Fox', 'Owl']",
     {{"Animals", {"Cat", "Dog", "Fox", "Owl"}}}},
    {"clean two groups",
     "<Animals>: ['Cat', 'Dog'], <Colors>: ['Red', 'Blue']",
     {{"Animals", {"Cat", "Dog"}}, {"Colors", {"Red", "Blue"}}}},
    {"prose preamble",
     "Sure! Looking at the pool, here is my answer: <Fruits>: ['Apple', 'Pear']",
     {{"Fruits", {"Apple", "Pear"}}}},
    {"trailing commentary",
     "<Fruits>: ['Apple', 'Pear']\nI grouped these because they grow on trees.",
     {{"Fruits", {"Apple", "Pear"}}}},
    {"newlines between groups",
     "<A>: ['x', 'y']\n\n<B>: ['z', 'w']\n",
     {{"A", {"x", "y"}}, {"B", {"z", "w"}}}},
    {"double-quoted words", "<Tools>: [\"Saw\", \"Drill\"]",
     {{"Tools", {"Saw", "Drill"}}}},
    {"mixed quoting", "<Tools>: ['Saw', \"Drill\"]",
     {{"Tools", {"Saw", "Drill"}}}},
    {"extra whitespace", "<  Big Cats  > :  [ 'Lion' ,  'Tiger' ]",
     {{"Big Cats", {"Lion", "Tiger"}}}},
    {"multi-word topics and words",
     "<Units of Length>: ['Nautical Mile', 'Light Year']",
     {{"Units of Length", {"Nautical Mile", "Light Year"}}}},
    {"restated answer (two passes over the same groups)",
     "Here is my grouping: <A>: ['x', 'y']. To summarize, the final answer is: "
     "<A>: ['x', 'y'], <B>: ['z', 'w']",
     {{"A", {"x", "y"}}, {"A", {"x", "y"}}, {"B", {"z", "w"}}}},
    {"self-correction (revised groups appended)",
     "<A>: ['x', 'z']\nWait, 'z' fits better elsewhere. Correcting:\n"
     "<A>: ['x', 'y'], <B>: ['z', 'w']",
     {{"A", {"x", "z"}}, {"A", {"x", "y"}}, {"B", {"z", "w"}}}},
    {"markdown bullets",
     "- <A>: ['x', 'y']\n- <B>: ['z', 'w']",
     {{"A", {"x", "y"}}, {"B", {"z", "w"}}}},
    {"markdown code fence",
     "```\n<A>: ['x', 'y']\n```",
     {{"A", {"x", "y"}}}},
    {"repeated word inside a group is deduped",
     "<A>: ['x', 'x', 'y']", {{"A", {"x", "y"}}}},
    {"empty word list yields an empty group",
     "<A>: []", {{"A", {}}}},
    {"unicode words", "<Animales>: ['Tiburón', 'Delfín']",
     {{"Animales", {"Tiburón", "Delfín"}}}},
    {"numbered list restatement",
     "1. <First Group>: ['a', 'b']\n2. <Second Group>: ['c', 'd']",
     {{"First Group", {"a", "b"}}, {"Second Group", {"c", "d"}}}},
    {"apostrophe stripped inside double quotes",
     "<Possessives>: [\"Newton's\", \"Euler's\"]",
     {{"Possessives", {"Newton's", "Euler's"}}}},
    {"junk prose", "I cannot solve this puzzle, sorry.", {}},
    {"empty string", "", {}},
    {"brackets without topics", "['a', 'b', 'c']", {}},
    {"angle brackets without lists", "<A> and <B> are my guesses", {}},
    {"list split across lines",
     "<A>: ['x',\n 'y',\n 'z']", {{"A", {"x", "y", "z"}}}},
};

}  // namespace

TEST_CASE("parse_answer corpus") {
    CHECK(kParserCorpus.size() >= 20);
    for (const auto& fx : kParserCorpus) {
        CAPTURE(fx.name);
        if (fx.expected.empty()) {
            CHECK_THROWS_AS(parse_answer(fx.text), ParseFailure);
            continue;
        }
        ParsedAnswer a;
        REQUIRE_NOTHROW(a = parse_answer(fx.text));
        REQUIRE(a.groups.size() == fx.expected.size());
        for (std::size_t i = 0; i < a.groups.size(); ++i) {
            CHECK(a.groups[i].topic == fx.expected[i].first);
            CHECK(a.groups[i].words == fx.expected[i].second);
        }
        CHECK(a.raw_text == fx.text);
        CHECK(!a.was_reformatted);
    }
}

TEST_CASE("build_prompt substitutes counts and pool for a 4x4 game") {
    auto g = make_game(4, 4);
    auto p = build_prompt(g);
    CHECK(p.find("pool of 16 words") != std::string::npos);
    CHECK(p.find("These 16 words") != std::string::npos);
    CHECK(p.find("The answer must be 4 groups") != std::string::npos);
    CHECK(p.find("#*#") == std::string::npos);
    CHECK(p.find("$*$") == std::string::npos);
    CHECK(p.find("{}") == std::string::npos);
    // Pool rendered as a single-quoted Python-style list, in pool order.
    CHECK(p.find("['word0', 'word1'") != std::string::npos);
    CHECK(p.find("'word15']") != std::string::npos);
}

TEST_CASE("build_prompt picks a template per group count") {
    auto p2 = build_prompt(make_game(2, 3));
    CHECK(p2.find("pool of 6 words") != std::string::npos);
    CHECK(p2.find("NBA TEAMS") != std::string::npos);

    auto p3 = build_prompt(make_game(3, 2));
    CHECK(p3.find("pool of 6 words") != std::string::npos);
    CHECK(p3.find("<Natural Elements>") != std::string::npos);
    CHECK(p3.find("'Pluto'") != std::string::npos);

    auto p4 = build_prompt(make_game(4, 2));
    CHECK(p4.find("pool of 8 words") != std::string::npos);
    CHECK(p4.find("<Emotions>") != std::string::npos);

    Game bad = make_game(2, 2);
    bad.m = 5;
    CHECK_THROWS(build_prompt(bad));
}

TEST_CASE("build_prompt lists each pool word exactly once and leaks no topic") {
    for (int m : {2, 3, 4})
        for (int n : {2, 3, 4}) {
            auto g = make_game(m, n);
            auto p = build_prompt(g);
            for (const auto& w : g.pool) {
                std::string quoted = "'" + w + "'";
                auto first = p.find(quoted);
                REQUIRE(first != std::string::npos);
                CHECK(p.find(quoted, first + 1) == std::string::npos);
            }
            for (const auto& t : g.truth_groups) CHECK(p.find(t.topic) == std::string::npos);
        }
}

TEST_CASE("build_reformat_prompt wraps the raw text") {
    auto p = build_reformat_prompt("garbled output");
    CHECK(p.find("Please reformat") == 0);
    CHECK(p.rfind("garbled output") == p.size() - std::string("garbled output").size());
}

TEST_CASE("build_overlap_prompt lists topics and pool words") {
    auto g = make_game(2, 2);
    auto p = build_overlap_prompt(g);
    CHECK(p.find("[\"Topic0\", \"Topic1\"]") != std::string::npos);
    CHECK(p.find("[\"word0\", \"word1\", \"word2\", \"word3\"]") != std::string::npos);
    CHECK(p.find("LIST_TOPICS") == std::string::npos);
    CHECK(p.find("LIST_WORDS") == std::string::npos);
}

TEST_CASE("request_fingerprint is stable and sensitive to every field") {
    ModelConfig a;
    a.model = "m1";
    auto fp = request_fingerprint(a, "hello");
    CHECK(fp.size() == 16);
    CHECK(fp == request_fingerprint(a, "hello"));
    CHECK(fp != request_fingerprint(a, "hello!"));
    ModelConfig b = a;
    b.model = "m2";
    CHECK(fp != request_fingerprint(b, "hello"));
    b = a;
    b.temperature = 0.0;
    CHECK(fp != request_fingerprint(b, "hello"));
    b = a;
    b.max_tokens = 7;
    CHECK(fp != request_fingerprint(b, "hello"));
}

TEST_CASE("ResponseCache round-trips responses by fingerprint") {
    auto dir = std::filesystem::temp_directory_path() / "wgg_cache_test";
    std::filesystem::remove_all(dir);
    ResponseCache cache(dir.string());
    ModelConfig cfg;
    cfg.model = "m";
    RawResponse r;
    r.fingerprint = request_fingerprint(cfg, "p");
    r.text = "<A>: ['x']";
    r.latency_ms = 12.5;
    r.attempts = 2;
    cache.put(r, cfg, "p");
    auto got = cache.get(r.fingerprint);
    REQUIRE(got.has_value());
    CHECK(got->text == r.text);
    CHECK(got->from_cache);
    CHECK(got->attempts == 2);
    CHECK(!cache.get("feedfacefeedface").has_value());
    ResponseCache disabled;
    CHECK(!disabled.enabled());
    CHECK(!disabled.get(r.fingerprint).has_value());
    std::filesystem::remove_all(dir);
}

TEST_CASE("reformat_answer makes exactly one repair query") {
    int calls = 0;
    ModelConfig repair;
    repair.model = "repair";
    QueryFn query = [&](const ModelConfig&, const std::string& prompt) {
        ++calls;
        CHECK(prompt.find("Please reformat") == 0);
        CHECK(prompt.find("the model rambled") != std::string::npos);
        RawResponse r;
        r.text = "<A>: ['x', 'y']";
        return r;
    };
    auto a = reformat_answer(repair, "the model rambled", query);
    CHECK(calls == 1);
    CHECK(a.was_reformatted);
    CHECK(a.raw_text == "the model rambled");
    REQUIRE(a.groups.size() == 1);
    CHECK(a.groups[0].words == std::vector<std::string>{"x", "y"});

    // A repair that still fails propagates after that single attempt.
    calls = 0;
    QueryFn bad = [&](const ModelConfig&, const std::string&) {
        ++calls;
        RawResponse r;
        r.text = "still unusable";
        return r;
    };
    CHECK_THROWS_AS(reformat_answer(repair, "junk", bad), ParseFailure);
    CHECK(calls == 1);
}

TEST_CASE("probe_overlap parses the dictionary reply") {
    auto g = make_game(2, 2);
    QueryFn query = [&](const ModelConfig&, const std::string&) {
        RawResponse r;
        r.text = "\"topic0\": [\"word0\", \"word1\", \"word2\"], "
                 "\"TOPIC1\": [\"word2\", \"word3\", \"hallucinated\"]";
        return r;
    };
    auto props = probe_overlap({}, g, query);
    CHECK(props.by_topic.at("Topic0") ==
          std::vector<std::string>{"word0", "word1", "word2"});
    CHECK(props.by_topic.at("Topic1") == std::vector<std::string>{"word2", "word3"});
    CHECK(props.dropped_out_of_pool);
}

TEST_CASE("probe_overlap repairs once then propagates a missing topic") {
    auto g = make_game(2, 2);
    int calls = 0;
    QueryFn flaky = [&](const ModelConfig&, const std::string&) {
        ++calls;
        RawResponse r;
        r.text = calls == 1 ? "no dictionary here"
                            : "\"Topic0\": [\"word0\"], \"Topic1\": [\"word2\"]";
        return r;
    };
    auto props = probe_overlap({}, g, flaky);
    CHECK(calls == 2);
    CHECK(props.by_topic.at("Topic0") == std::vector<std::string>{"word0"});

    calls = 0;
    QueryFn partial = [&](const ModelConfig&, const std::string&) {
        ++calls;
        RawResponse r;
        r.text = "\"Topic0\": [\"word0\"]";  // Topic1 never appears
        return r;
    };
    CHECK_THROWS_AS(probe_overlap({}, g, partial), ParseFailure);
    CHECK(calls == 2);
}

TEST_CASE("probe_overlap_offline assigns every word at least once") {
    EmbeddingTable t;
    t.dimension = 2;
    Game g;
    g.m = 2;
    g.n = 2;
    g.truth_groups = {{"alpha", {"a1", "a2"}}, {"beta", {"b1", "shared"}}};
    g.pool = {"a1", "a2", "b1", "shared"};
    t.vocabulary["alpha"] = {1, 0};
    t.vocabulary["beta"] = {0, 1};
    t.vocabulary["a1"] = {1, 0.05};
    t.vocabulary["a2"] = {1, 0.1};
    t.vocabulary["b1"] = {0.05, 1};
    t.vocabulary["shared"] = {1, 1};
    auto props = probe_overlap_offline(g, t, 0.4);
    // Distinct words land with their own topic; the ambiguous one with both.
    CHECK(props.by_topic.at("alpha") == std::vector<std::string>{"a1", "a2", "shared"});
    CHECK(props.by_topic.at("beta") == std::vector<std::string>{"b1", "shared"});
    std::set<std::string> assigned;
    for (const auto& [_, words] : props.by_topic) assigned.insert(words.begin(), words.end());
    CHECK(assigned.size() == g.pool.size());
}

TEST_CASE("query_model retries transient failures then succeeds") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        auto body = json::parse(req.body);
        CHECK(body.at("model") == "test-model");
        CHECK(body.at("messages")[0].at("content") == "ping");
        if (n == 1) {
            res.status = 429;
            return;
        }
        json msg;
        msg["role"] = "assistant";
        msg["content"] = "<A>: ['x']";
        json choice;
        choice["message"] = msg;
        json reply;
        reply["choices"] = json::array({choice});
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ModelConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "test-model";
    cfg.backoff_base_s = 0.01;
    auto resp = query_model(cfg, "ping");
    CHECK(resp.text == "<A>: ['x']");
    CHECK(resp.attempts == 2);
    CHECK(!resp.from_cache);
    CHECK(hits == 2);

    server.stop();
    th.join();
}

TEST_CASE("query_model does not retry authentication failures") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ModelConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "m";
    cfg.backoff_base_s = 0.01;
    try {
        query_model(cfg, "ping");
        FAIL("expected QueryError");
    } catch (const QueryError& e) {
        CHECK(e.auth_failure);
    }
    CHECK(hits == 1);

    server.stop();
    th.join();
}

TEST_CASE("query_model gives up after max_attempts and serves cache hits") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (++hits <= 3) {
            res.status = 503;
            return;
        }
        json msg;
        msg["content"] = "pong";
        json choice;
        choice["message"] = msg;
        json reply;
        reply["choices"] = json::array({choice});
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ModelConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.model = "m";
    cfg.max_attempts = 3;
    cfg.backoff_base_s = 0.01;
    CHECK_THROWS_AS(query_model(cfg, "ping"), QueryError);
    CHECK(hits == 3);

    auto dir = std::filesystem::temp_directory_path() / "wgg_cache_retry";
    std::filesystem::remove_all(dir);
    ResponseCache cache(dir.string());
    auto first = query_model(cfg, "ping", cache, "game-1");
    CHECK(first.text == "pong");
    CHECK(first.game_id == "game-1");
    int hits_after_success = hits;
    auto second = query_model(cfg, "ping", cache, "game-1");
    CHECK(second.from_cache);
    CHECK(second.text == "pong");
    CHECK(hits == hits_after_success);  // no additional network traffic
    std::filesystem::remove_all(dir);

    server.stop();
    th.join();
}

TEST_CASE("prompt asset files match the embedded templates byte for byte") {
    auto read = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        REQUIRE(in.good());
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    std::string dir = std::string(WGG_SOURCE_DIR) + "/assets/prompts/";
    CHECK(read(dir + "game_2_groups.txt") == std::string(prompts::kGamePrompt2Groups) + "\n");
    CHECK(read(dir + "game_3_groups.txt") == std::string(prompts::kGamePrompt3Groups) + "\n");
    CHECK(read(dir + "game_4_groups.txt") == std::string(prompts::kGamePrompt4Groups) + "\n");
    CHECK(read(dir + "reformat.txt") == std::string(prompts::kReformatPrompt) + "\n");
    CHECK(read(dir + "overlap.txt") == std::string(prompts::kOverlapPrompt) + "\n");
}
