#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wgg/analysis.hpp"
#include "wgg/core.hpp"
#include "wgg/gamegen.hpp"
#include "wgg/llm.hpp"
#include "wgg/scoring.hpp"

namespace wgg {

namespace fs = std::filesystem;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HarnessConfig {
    std::map<std::string, std::string> dataset_paths;    // subset -> groupings JSONL
    std::map<std::string, std::string> embedding_paths;  // subset -> vector file
    std::map<std::string, ModelConfig> models;
    std::vector<std::pair<int, int>> settings = {{2, 2}, {2, 3}, {2, 4},
                                                 {3, 2}, {3, 3}, {3, 4},
                                                 {4, 2}, {4, 3}, {4, 4}};
    int count_per_setting = 10;
    std::uint64_t master_seed = 0;
    ScoringConfig scoring;
    DifficultyWeights weights;
    BinningConfig bins;
    OverlapMode overlap_mode = OverlapMode::kUnion;
    double offline_overlap_threshold = 0.4;
    std::string repair_model;  // key into models; empty = no repair pass
};

inline ModelConfig model_config_from_json(const json& j) {
    ModelConfig m;
    m.endpoint = j.value("endpoint", "");
    m.model = j.value("model", "");
    m.api_key_env = j.value("api_key_env", "");
    m.temperature = j.value("temperature", 0.6);
    m.top_p = j.value("top_p", 0.9);
    m.max_tokens = j.value("max_tokens", 512);
    m.max_attempts = j.value("max_attempts", 3);
    m.backoff_base_s = j.value("backoff_base_s", 0.5);
    m.parallelism = j.value("parallelism", 1);
    return m;
}

inline HarnessConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("bad config JSON in " + path + ": " + e.what());
    }
    HarnessConfig cfg;
    if (j.contains("datasets"))
        for (auto& [k, v] : j.at("datasets").items()) cfg.dataset_paths[k] = v.get<std::string>();
    if (j.contains("embeddings"))
        for (auto& [k, v] : j.at("embeddings").items()) cfg.embedding_paths[k] = v.get<std::string>();
    if (j.contains("models"))
        for (auto& [k, v] : j.at("models").items()) cfg.models[k] = model_config_from_json(v);
    if (j.contains("settings")) {
        cfg.settings.clear();
        for (auto& s : j.at("settings")) cfg.settings.emplace_back(s.at(0).get<int>(), s.at(1).get<int>());
    }
    cfg.count_per_setting = j.value("count_per_setting", 10);
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    cfg.scoring.ta_threshold = j.value("ta_threshold", 0.3);
    cfg.scoring.truncate_to_n = j.value("truncate_to_n", true);
    if (j.contains("weights")) {
        auto& w = j.at("weights");
        cfg.weights.w_count = w.value("w_count", cfg.weights.w_count);
        cfg.weights.w_ari = w.value("w_ari", cfg.weights.w_ari);
        cfg.weights.w_overlap = w.value("w_overlap", cfg.weights.w_overlap);
    }
    if (j.contains("bins")) {
        auto& b = j.at("bins");
        if (b.contains("ari_edges")) cfg.bins.ari_edges = b.at("ari_edges").get<std::vector<double>>();
        if (b.contains("overlap_edges"))
            cfg.bins.overlap_edges = b.at("overlap_edges").get<std::vector<double>>();
    }
    if (j.value("overlap_mode", std::string("union")) == "pairwise")
        cfg.overlap_mode = OverlapMode::kPairwise;
    cfg.offline_overlap_threshold = j.value("offline_overlap_threshold", 0.4);
    cfg.repair_model = j.value("repair_model", "");
    return cfg;
}

// ---------------------------------------------------------------------------
// Answer sources. Mock answerers keep the end-to-end path runnable with no
// network; the http answerer speaks the chat-completions shape.

using Answerer = std::function<std::string(const Game&, const std::string& prompt)>;

inline std::string render_truth_answer(const Game& game) {
    std::string out;
    for (std::size_t i = 0; i < game.truth_groups.size(); ++i) {
        if (i) out += ", ";
        out += "<" + game.truth_groups[i].topic + ">: " + render_pool(game.truth_groups[i].words);
    }
    return out;
}

// Seeded random grouping of the pool into m groups of n, with junk topics.
inline std::string render_random_answer(const Game& game, std::uint64_t salt = 0x5eedULL) {
    Rng rng(mix_seed({game.seed, salt}));
    std::vector<std::string> pool = game.pool;
    rng.shuffle(pool);
    std::string out;
    for (int g = 0; g < game.m; ++g) {
        if (g) out += ", ";
        std::vector<std::string> words(pool.begin() + g * game.n, pool.begin() + (g + 1) * game.n);
        out += "<Guess " + std::to_string(g + 1) + ">: " + render_pool(words);
    }
    return out;
}

struct EvalModel {
    std::string name;
    ModelConfig config;  // used for fingerprints; endpoint only for http
    Answerer answer;
};

inline EvalModel make_eval_model(const std::string& name, const HarnessConfig& cfg) {
    EvalModel m;
    m.name = name;
    if (name == "mock-echo") {
        m.config.model = name;
        m.answer = [](const Game& g, const std::string&) { return render_truth_answer(g); };
        return m;
    }
    if (name == "mock-random") {
        m.config.model = name;
        m.answer = [](const Game& g, const std::string&) { return render_random_answer(g); };
        return m;
    }
    auto it = cfg.models.find(name);
    if (it == cfg.models.end()) throw ConfigError("unknown model preset '" + name + "'");
    m.config = it->second;
    if (m.config.model.empty()) m.config.model = name;
    ModelConfig mc = m.config;
    m.answer = [mc](const Game&, const std::string& prompt) {
        return query_model(mc, prompt).text;
    };
    return m;
}

// ---------------------------------------------------------------------------
// Generation.

struct GenerateOutcome {
    int manifests = 0;
    int game_files = 0;
};

inline void write_json_file(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline GenerateOutcome cmd_generate(const HarnessConfig& cfg, const std::string& out_dir) {
    if (cfg.dataset_paths.empty()) throw ConfigError("config error: 'datasets' is empty");
    GenerateOutcome outcome;
    for (const auto& [subset, path] : cfg.dataset_paths) {
        if (!fs::exists(path))
            throw ConfigError("config error: datasets." + subset + " path not found: " + path);
        GroupingDataset d = load_groupings(path, subset);
        auto report = validate_dataset(d);
        if (!report.ok())
            throw ConfigError("dataset '" + subset + "' fails validation: " +
                              report.violations.front().rule + " (" +
                              report.violations.front().message + ")");
        auto suites = generate_suite(d, cfg.settings, cfg.count_per_setting, cfg.master_seed);
        json manifest;
        manifest["subset"] = subset;
        manifest["master_seed"] = cfg.master_seed;
        manifest["settings"] = json::array();
        for (const auto& suite : suites) {
            json sj;
            sj["m"] = suite.m;
            sj["n"] = suite.n;
            sj["dev"] = json::array();
            sj["test"] = json::array();
            auto emit = [&](const std::vector<Game>& games, json& ids) {
                for (const auto& g : games) {
                    write_json_file(fs::path(out_dir) / subset / (std::to_string(suite.m) + "x" +
                                    std::to_string(suite.n)) / (g.id + ".json"),
                                    game_to_json(g));
                    ids.push_back(g.id);
                    ++outcome.game_files;
                }
            };
            emit(suite.dev, sj["dev"]);
            emit(suite.test, sj["test"]);
            manifest["settings"].push_back(std::move(sj));
        }
        write_json_file(fs::path(out_dir) / subset / "manifest.json", manifest);
        ++outcome.manifests;
    }
    return outcome;
}

inline std::vector<Game> load_split(const std::string& suite_dir, const std::string& subset,
                                    const std::string& split) {
    fs::path manifest_path = fs::path(suite_dir) / subset / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open manifest: " + manifest_path.string());
    json manifest;
    in >> manifest;
    std::vector<Game> games;
    for (const auto& sj : manifest.at("settings")) {
        std::string setting = std::to_string(sj.at("m").get<int>()) + "x" +
                              std::to_string(sj.at("n").get<int>());
        for (const auto& id : sj.at(split))
            games.push_back(load_game((fs::path(suite_dir) / subset / setting /
                                       (id.get<std::string>() + ".json")).string()));
    }
    return games;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct ResultRecord {
    std::string game_id;
    std::string subset;
    int m = 0, n = 0;
    std::string model;
    std::string fingerprint;
    ParsedAnswer parsed;
    bool parse_failed = false;
    bool multi_block = false;
    GameScore score;
    std::optional<DifficultyProfile> difficulty;
    std::vector<WordGrouping> groups_meta;  // per truth group, when known
    std::string timestamp;
    std::optional<std::string> error;
    bool from_cache = false;
};

inline json record_to_json(const ResultRecord& r) {
    json j;
    j["game_id"] = r.game_id;
    j["subset"] = r.subset;
    j["m"] = r.m;
    j["n"] = r.n;
    j["model"] = r.model;
    j["fingerprint"] = r.fingerprint;
    j["parsed"] = json::object();
    j["parsed"]["groups"] = json::array();
    for (const auto& g : r.parsed.groups)
        j["parsed"]["groups"].push_back({{"topic", g.topic}, {"words", g.words}});
    j["parsed"]["raw_text"] = r.parsed.raw_text;
    j["parsed"]["was_reformatted"] = r.parsed.was_reformatted;
    j["parse_failed"] = r.parse_failed;
    j["multi_block"] = r.multi_block;
    j["score"] = score_to_json(r.score);
    j["difficulty"] = r.difficulty ? profile_to_json(*r.difficulty) : json(nullptr);
    j["groups_meta"] = json::array();
    for (const auto& g : r.groups_meta)
        j["groups_meta"].push_back({{"topic", g.topic},
                                    {"culturally_related", g.culturally_related},
                                    {"tags", g.tags}});
    j["timestamp"] = r.timestamp;
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    j["from_cache"] = r.from_cache;
    return j;
}

inline ResultRecord record_from_json(const json& j) {
    ResultRecord r;
    r.game_id = j.at("game_id").get<std::string>();
    r.subset = j.at("subset").get<std::string>();
    r.m = j.at("m").get<int>();
    r.n = j.at("n").get<int>();
    r.model = j.at("model").get<std::string>();
    r.fingerprint = j.value("fingerprint", "");
    for (const auto& gj : j.at("parsed").at("groups"))
        r.parsed.groups.push_back({gj.at("topic").get<std::string>(),
                                   gj.at("words").get<std::vector<std::string>>()});
    r.parsed.raw_text = j.at("parsed").value("raw_text", "");
    r.parsed.was_reformatted = j.at("parsed").value("was_reformatted", false);
    r.parse_failed = j.value("parse_failed", false);
    r.multi_block = j.value("multi_block", false);
    r.score = score_from_json(j.at("score"));
    if (j.contains("difficulty") && !j.at("difficulty").is_null())
        r.difficulty = profile_from_json(j.at("difficulty"));
    if (j.contains("groups_meta"))
        for (const auto& gj : j.at("groups_meta")) {
            WordGrouping g;
            g.topic = gj.at("topic").get<std::string>();
            g.culturally_related = gj.value("culturally_related", false);
            if (gj.contains("tags")) g.tags = gj.at("tags").get<std::vector<std::string>>();
            r.groups_meta.push_back(std::move(g));
        }
    r.timestamp = j.value("timestamp", "");
    if (j.contains("error") && !j.at("error").is_null())
        r.error = j.at("error").get<std::string>();
    r.from_cache = j.value("from_cache", false);
    return r;
}

inline std::vector<ResultRecord> load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open results file: " + path);
    std::vector<ResultRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(record_from_json(json::parse(line)));
    }
    return out;
}

struct EvaluateOutcome {
    int records = 0;
    int cache_hits = 0;
    int parse_failures = 0;
    int model_errors = 0;
};

inline std::string now_iso8601() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
    return buf;
}

// Evaluates every game, one JSONL record per game. Responses are cached by
// request fingerprint, so a rerun after interruption serves finished games
// from cache and produces identical records. Per-game model failures are
// recorded and do not stop the run.
inline EvaluateOutcome cmd_evaluate(const std::vector<Game>& games, const EvalModel& model,
                                    const HarnessConfig& cfg, const std::string& out_path,
                                    const ResponseCache& cache = {},
                                    const std::map<std::string, GroupingDataset>* datasets = nullptr,
                                    const std::map<std::string, EmbeddingTable>* tables = nullptr,
                                    const EvalModel* repair = nullptr) {
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? "."
                               : fs::path(out_path).parent_path().string());
    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot write results file: " + out_path);

    EvaluateOutcome outcome;
    for (const auto& game : games) {
        ResultRecord rec;
        rec.game_id = game.id;
        rec.subset = game.subset_name;
        rec.m = game.m;
        rec.n = game.n;
        rec.model = model.name;
        rec.timestamp = now_iso8601();

        std::string prompt = build_prompt(game);
        rec.fingerprint = request_fingerprint(model.config, prompt);
        try {
            std::string text;
            if (auto cached = cache.get(rec.fingerprint)) {
                text = cached->text;
                rec.from_cache = true;
                ++outcome.cache_hits;
            } else {
                text = model.answer(game, prompt);
                RawResponse r;
                r.game_id = game.id;
                r.fingerprint = rec.fingerprint;
                r.text = text;
                cache.put(r, model.config, prompt);
            }
            try {
                rec.parsed = parse_answer(text);
            } catch (const ParseFailure&) {
                if (repair) {
                    try {
                        std::string repaired =
                            repair->answer(game, build_reformat_prompt(text));
                        rec.parsed = parse_answer(repaired);
                        rec.parsed.raw_text = text;
                        rec.parsed.was_reformatted = true;
                    } catch (const std::exception&) {
                        rec.parse_failed = true;
                        rec.parsed.raw_text = text;
                    }
                } else {
                    rec.parse_failed = true;
                    rec.parsed.raw_text = text;
                }
            }
            if (rec.parse_failed) ++outcome.parse_failures;
            rec.multi_block = has_repeated_blocks(rec.parsed);

            const EmbeddingTable* table = nullptr;
            if (tables) {
                auto it = tables->find(game.subset_name);
                if (it != tables->end()) table = &it->second;
            }
            rec.score = score_game(game, rec.parsed, table, cfg.scoring);
        } catch (const std::exception& e) {
            rec.error = e.what();
            rec.score = score_game(game, ParsedAnswer{}, nullptr, cfg.scoring);
            ++outcome.model_errors;
        }

        if (datasets) {
            auto dit = datasets->find(game.subset_name);
            if (dit != datasets->end()) {
                std::map<std::string, const WordGrouping*> by_topic;
                for (const auto& g : dit->second.groupings) by_topic[trim(g.topic)] = &g;
                for (const auto& t : game.truth_groups) {
                    auto it = by_topic.find(trim(t.topic));
                    if (it != by_topic.end()) rec.groups_meta.push_back(*it->second);
                }
            }
        }

        out << record_to_json(rec).dump() << '\n';
        ++outcome.records;
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Difficulty profiling.

using OverlapProber = std::function<OverlapProposals(const Game&)>;

inline DifficultyProfile profile_game(const Game& game, const ResultRecord& rec,
                                      const EmbeddingTable& table, const OverlapProber& prober,
                                      const HarnessConfig& cfg, std::uint64_t seed) {
    DifficultyProfile p;
    p.group_count = game.m;
    p.group_size = game.n;
    p.ari = game_ari(game, table, seed);

    std::vector<Vector> truth_points;
    std::vector<int> truth_labels;
    for (std::size_t g = 0; g < game.truth_groups.size(); ++g)
        for (const auto& w : game.truth_groups[g].words) {
            truth_points.push_back(l2_normalized(embed_phrase(table, w).values));
            truth_labels.push_back(static_cast<int>(g));
        }
    if (game.m >= 2) p.silhouette_truth = silhouette(truth_points, truth_labels);

    std::vector<Vector> pred_points;
    std::vector<int> pred_labels;
    int nonempty = 0;
    for (std::size_t g = 0; g < rec.parsed.groups.size(); ++g) {
        if (rec.parsed.groups[g].words.empty()) continue;
        ++nonempty;
        for (const auto& w : rec.parsed.groups[g].words) {
            pred_points.push_back(l2_normalized(embed_phrase(table, w).values));
            pred_labels.push_back(static_cast<int>(g));
        }
    }
    if (nonempty >= 2) p.silhouette_predicted = silhouette(pred_points, pred_labels);

    auto proposals = prober(game);
    std::vector<std::string> topics;
    for (const auto& t : game.truth_groups) topics.push_back(t.topic);
    p.word_overlap = word_overlap(proposals.by_topic, topics, cfg.overlap_mode);

    p.integrated = integrated_difficulty(game.m, *p.ari, *p.word_overlap, cfg.weights);
    return p;
}

// Adds a DifficultyProfile to every record; per-game failures leave the
// record unchanged with its error noted.
inline std::vector<ResultRecord> cmd_difficulty(std::vector<ResultRecord> records,
                                                const std::map<std::string, Game>& games_by_id,
                                                const std::map<std::string, EmbeddingTable>& tables,
                                                const HarnessConfig& cfg,
                                                const OverlapProber* custom_prober = nullptr) {
    for (auto& rec : records) {
        auto git = games_by_id.find(rec.game_id);
        if (git == games_by_id.end()) {
            rec.error = "difficulty: game not found: " + rec.game_id;
            continue;
        }
        auto tit = tables.find(rec.subset);
        if (tit == tables.end())
            throw ConfigError("config error: no embedding table for subset '" + rec.subset + "'");
        const EmbeddingTable& table = tit->second;
        OverlapProber prober =
            custom_prober ? *custom_prober : OverlapProber([&](const Game& g) {
                return probe_overlap_offline(g, table, cfg.offline_overlap_threshold);
            });
        try {
            rec.difficulty = profile_game(git->second, rec, table, prober, cfg,
                                          mix_seed({cfg.master_seed, fnv1a(rec.game_id)}));
        } catch (const std::exception& e) {
            rec.error = std::string("difficulty: ") + e.what();
        }
    }
    return records;
}

inline void save_results(const std::vector<ResultRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write results file: " + path);
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Reporting.

struct MeanAcc {
    double sum = 0.0;
    int count = 0;
    void add(double v) { sum += v; ++count; }
    std::optional<double> mean() const {
        if (count == 0) return std::nullopt;
        return sum / count;
    }
};

struct ReportBundle {
    // model -> subset -> accumulators
    std::map<std::string, std::map<std::string, MeanAcc>> f1, ctd, ta;
    // model -> subset -> per-group F1 split by cultural label
    std::map<std::string, std::map<std::string, MeanAcc>> group_f1_cultural, group_f1_noncultural;
    // model -> tag -> per-group F1
    std::map<std::string, std::map<std::string, MeanAcc>> group_f1_by_tag;
    // model -> bins
    std::map<std::string, std::vector<BinResult>> ari_bins, overlap_bins;
    std::map<std::string, std::map<int, MeanAcc>> f1_by_group_count, f1_by_group_size;
    // model -> metric -> average Spearman across subsets
    std::map<std::string, std::map<std::string, std::optional<double>>> correlations;
    // 5-bucket score distribution for F1 and CTD
    std::vector<int> f1_hist = std::vector<int>(5, 0), ctd_hist = std::vector<int>(5, 0);
    int total_records = 0;
};

namespace detail {

inline int score_bucket(double v) {
    int b = static_cast<int>(v * 5.0);
    return std::clamp(b, 0, 4);
}

// Average, over subsets, of the Spearman correlation between per-setting
// mean F1 and the per-setting difficulty value.
inline std::optional<double> avg_subset_correlation(
    const std::map<std::string, std::vector<std::pair<double, double>>>& by_subset) {
    MeanAcc acc;
    for (const auto& [_, pts] : by_subset) {
        if (pts.size() < 2) continue;
        std::vector<double> xs, ys;
        for (const auto& [x, y] : pts) { xs.push_back(x); ys.push_back(y); }
        if (auto r = spearman(xs, ys)) acc.add(*r);
    }
    return acc.mean();
}

}  // namespace detail

inline ReportBundle cmd_report(const std::vector<ResultRecord>& records,
                               const HarnessConfig& cfg) {
    if (records.empty()) throw ConfigError("report: empty input set");
    ReportBundle b;
    b.total_records = static_cast<int>(records.size());

    // model -> subset -> setting/bin -> F1 accumulator, feeding correlations
    std::map<std::string, std::map<std::string, std::map<int, MeanAcc>>> f1_by_count, f1_by_size;
    std::map<std::string, std::map<std::string, std::map<int, std::pair<double, MeanAcc>>>>
        f1_by_ari_bin, f1_by_overlap_bin, f1_by_integrated_bin;
    std::map<std::string, std::vector<std::pair<double, double>>> ari_values, overlap_values;

    BinningConfig bins = cfg.bins;
    auto bin_index = [](double v, const std::vector<double>& edges) {
        if (v < edges.front()) return 0;
        if (v > edges.back()) return static_cast<int>(edges.size()) - 2;
        int i = 0;
        while (i + 2 < static_cast<int>(edges.size()) && v > edges[i + 1]) ++i;
        return i;
    };
    std::vector<double> integrated_edges = {0.0, 0.25, 0.5, 0.75, 1.0};

    for (const auto& r : records) {
        b.f1[r.model][r.subset].add(r.score.game_f1);
        b.ctd[r.model][r.subset].add(r.score.game_ctd);
        b.ta[r.model][r.subset].add(r.score.ta_rate);
        b.f1_by_group_count[r.model][r.m].add(r.score.game_f1);
        b.f1_by_group_size[r.model][r.n].add(r.score.game_f1);
        b.f1_hist[detail::score_bucket(r.score.game_f1)]++;
        b.ctd_hist[detail::score_bucket(r.score.game_ctd)]++;

        f1_by_count[r.model][r.subset][r.m].add(r.score.game_f1);
        f1_by_size[r.model][r.subset][r.n].add(r.score.game_f1);

        for (std::size_t g = 0; g < r.groups_meta.size() && g < r.score.per_group_f1.size(); ++g) {
            const auto& meta = r.groups_meta[g];
            double f1 = r.score.per_group_f1[g];
            (meta.culturally_related ? b.group_f1_cultural : b.group_f1_noncultural)[r.model]
                [r.subset].add(f1);
            for (const auto& tag : meta.tags) b.group_f1_by_tag[r.model][tag].add(f1);
        }

        if (r.difficulty && r.difficulty->ari) {
            double ari = *r.difficulty->ari;
            ari_values[r.model].emplace_back(ari, r.score.game_f1);
            int bi = bin_index(ari, bins.ari_edges);
            auto& cell = f1_by_ari_bin[r.model][r.subset][bi];
            cell.first = ari;
            cell.second.add(r.score.game_f1);
        }
        if (r.difficulty && r.difficulty->word_overlap) {
            double ov = *r.difficulty->word_overlap;
            overlap_values[r.model].emplace_back(ov, r.score.game_f1);
            int bi = bin_index(ov, bins.overlap_edges);
            auto& cell = f1_by_overlap_bin[r.model][r.subset][bi];
            cell.first = ov;
            cell.second.add(r.score.game_f1);
        }
        if (r.difficulty && r.difficulty->integrated) {
            int bi = bin_index(*r.difficulty->integrated, integrated_edges);
            auto& cell = f1_by_integrated_bin[r.model][r.subset][bi];
            cell.first = *r.difficulty->integrated;
            cell.second.add(r.score.game_f1);
        }
    }

    for (const auto& [model, vals] : ari_values)
        b.ari_bins[model] = bin_scores(vals, bins.ari_edges);
    for (const auto& [model, vals] : overlap_values)
        b.overlap_bins[model] = bin_scores(vals, bins.overlap_edges);

    // Per-subset rank correlation of mean F1 against the difficulty axis,
    // averaged over subsets.
    std::set<std::string> models;
    for (const auto& r : records) models.insert(r.model);
    for (const auto& model : models) {
        auto collect_int = [&](const std::map<std::string, std::map<int, MeanAcc>>& per_subset) {
            std::map<std::string, std::vector<std::pair<double, double>>> pts;
            for (const auto& [subset, cells] : per_subset)
                for (const auto& [key, acc] : cells)
                    if (auto m = acc.mean()) pts[subset].emplace_back(key, *m);
            return pts;
        };
        auto collect_binned =
            [&](const std::map<std::string, std::map<int, std::pair<double, MeanAcc>>>& per_subset) {
                std::map<std::string, std::vector<std::pair<double, double>>> pts;
                for (const auto& [subset, cells] : per_subset)
                    for (const auto& [bi, cell] : cells)
                        if (auto m = cell.second.mean()) pts[subset].emplace_back(bi, *m);
                return pts;
            };
        b.correlations[model]["group_count"] =
            detail::avg_subset_correlation(collect_int(f1_by_count[model]));
        b.correlations[model]["group_size"] =
            detail::avg_subset_correlation(collect_int(f1_by_size[model]));
        b.correlations[model]["ari"] =
            detail::avg_subset_correlation(collect_binned(f1_by_ari_bin[model]));
        b.correlations[model]["word_overlap"] =
            detail::avg_subset_correlation(collect_binned(f1_by_overlap_bin[model]));
        b.correlations[model]["integrated"] =
            detail::avg_subset_correlation(collect_binned(f1_by_integrated_bin[model]));
    }
    return b;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream os;
    os << *v;
    return os.str();
}

// Writes every bundle table as CSV with a JSON metadata sidecar.
inline void write_report(const ReportBundle& b, const std::string& out_dir) {
    fs::create_directories(out_dir);
    json meta;
    meta["generated_at"] = now_iso8601();
    meta["total_records"] = b.total_records;
    meta["files"] = json::array();

    auto open_csv = [&](const std::string& name, const std::string& header) {
        std::ofstream out(fs::path(out_dir) / name);
        if (!out) throw ConfigError("cannot write report file: " + name);
        out << header << '\n';
        meta["files"].push_back({{"name", name}, {"columns", header}});
        return out;
    };

    {
        auto out = open_csv("scores_by_subset.csv", "model,subset,games,mean_f1,mean_ctd,mean_ta");
        for (const auto& [model, by_subset] : b.f1)
            for (const auto& [subset, acc] : by_subset)
                out << csv_escape(model) << ',' << csv_escape(subset) << ',' << acc.count << ','
                    << fmt_opt(acc.mean()) << ','
                    << fmt_opt(b.ctd.at(model).at(subset).mean()) << ','
                    << fmt_opt(b.ta.at(model).at(subset).mean()) << '\n';
    }
    {
        auto out = open_csv("cultural_delta.csv",
                            "model,subset,noncultural_mean_f1,noncultural_groups,"
                            "cultural_mean_f1,cultural_groups,delta");
        std::set<std::pair<std::string, std::string>> keys;
        for (const auto& [model, by_subset] : b.group_f1_noncultural)
            for (const auto& [subset, _] : by_subset) keys.insert({model, subset});
        for (const auto& [model, by_subset] : b.group_f1_cultural)
            for (const auto& [subset, _] : by_subset) keys.insert({model, subset});
        for (const auto& [model, subset] : keys) {
            MeanAcc nc, cr;
            if (auto it = b.group_f1_noncultural.find(model); it != b.group_f1_noncultural.end())
                if (auto jt = it->second.find(subset); jt != it->second.end()) nc = jt->second;
            if (auto it = b.group_f1_cultural.find(model); it != b.group_f1_cultural.end())
                if (auto jt = it->second.find(subset); jt != it->second.end()) cr = jt->second;
            std::optional<double> delta;
            if (nc.mean() && cr.mean()) delta = *nc.mean() - *cr.mean();
            out << csv_escape(model) << ',' << csv_escape(subset) << ',' << fmt_opt(nc.mean())
                << ',' << nc.count << ',' << fmt_opt(cr.mean()) << ',' << cr.count << ','
                << fmt_opt(delta) << '\n';
        }
    }
    {
        auto out = open_csv("tag_breakdown.csv", "model,tag,groups,mean_group_f1");
        for (const auto& [model, by_tag] : b.group_f1_by_tag)
            for (const auto& [tag, acc] : by_tag)
                out << csv_escape(model) << ',' << csv_escape(tag) << ',' << acc.count << ','
                    << fmt_opt(acc.mean()) << '\n';
    }
    {
        auto out = open_csv("difficulty_group_count.csv", "model,group_count,games,mean_f1");
        for (const auto& [model, cells] : b.f1_by_group_count)
            for (const auto& [m, acc] : cells)
                out << csv_escape(model) << ',' << m << ',' << acc.count << ','
                    << fmt_opt(acc.mean()) << '\n';
    }
    {
        auto out = open_csv("difficulty_group_size.csv", "model,group_size,games,mean_f1");
        for (const auto& [model, cells] : b.f1_by_group_size)
            for (const auto& [n, acc] : cells)
                out << csv_escape(model) << ',' << n << ',' << acc.count << ','
                    << fmt_opt(acc.mean()) << '\n';
    }
    auto write_bins = [&](const std::string& name,
                          const std::map<std::string, std::vector<BinResult>>& bins) {
        auto out = open_csv(name, "model,bin_lo,bin_hi,games,mean_f1,out_of_range_flag");
        for (const auto& [model, rows] : bins)
            for (const auto& bin : rows)
                out << csv_escape(model) << ',' << bin.lo << ',' << bin.hi << ',' << bin.count
                    << ',' << fmt_opt(bin.mean) << ',' << (bin.has_out_of_range ? 1 : 0) << '\n';
    };
    write_bins("difficulty_ari_bins.csv", b.ari_bins);
    write_bins("difficulty_overlap_bins.csv", b.overlap_bins);
    {
        auto out = open_csv("correlations.csv", "model,metric,avg_spearman");
        for (const auto& [model, by_metric] : b.correlations)
            for (const auto& [metric, r] : by_metric)
                out << csv_escape(model) << ',' << metric << ',' << fmt_opt(r) << '\n';
    }
    {
        auto out = open_csv("f1_ctd_histogram.csv", "bucket_lo,bucket_hi,f1_count,ctd_count");
        for (int i = 0; i < 5; ++i)
            out << i * 0.2 << ',' << (i + 1) * 0.2 << ',' << b.f1_hist[i] << ',' << b.ctd_hist[i]
                << '\n';
    }
    write_json_file(fs::path(out_dir) / "report_meta.json", meta);
}

// ---------------------------------------------------------------------------
// TA calibration command.

struct CalibrateOutcome {
    TaCalibrationResult result;
    bool degenerate = false;  // single annotated item
};

inline CalibrateOutcome cmd_calibrate_ta(const std::string& annotation_path,
                                         const std::vector<double>& thresholds = {
                                             0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) {
    std::ifstream in(annotation_path);
    if (!in) throw ConfigError("cannot open annotation file: " + annotation_path);
    std::vector<TaCalibrationItem> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            json j = json::parse(line);
            TaCalibrationItem item;
            item.sim_matched = j.at("sim_matched").get<double>();
            item.max_other_sim = j.value("max_other_sim", 0.0);
            item.human_label = j.at("human_label").get<bool>();
            items.push_back(item);
        } catch (const std::exception& e) {
            throw ConfigError("malformed annotation at line " + std::to_string(line_no) + ": " +
                              e.what());
        }
    }
    if (items.empty()) throw ConfigError("annotation file has no items");
    CalibrateOutcome outcome;
    outcome.result = calibrate_ta(items, thresholds);
    outcome.degenerate = items.size() == 1;
    return outcome;
}

}  // namespace wgg
