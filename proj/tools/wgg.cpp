// Command-line front end: generate suites, evaluate models, profile
// difficulty, and emit report tables.

#include <iostream>

#include <CLI11.hpp>

#include "wgg/harness.hpp"

namespace {

wgg::HarnessConfig load_cfg(const std::string& path) {
    if (path.empty()) return {};
    return wgg::load_config(path);
}

int run(int argc, char** argv) {
    CLI::App app{"Word-grouping game benchmark toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, suite_dir, subset, split = "test";
    std::string model_name, cache_dir, annotations_path;
    std::vector<std::string> result_paths;
    int limit = -1;

    auto* gen = app.add_subcommand("generate", "Synthesize game suites from grouping datasets");
    gen->add_option("--config", config_path, "Config JSON")->required();
    gen->add_option("--out", out_path, "Output suite directory")->required();

    auto* eval = app.add_subcommand("evaluate", "Run a model over a suite and score each game");
    eval->add_option("--config", config_path, "Config JSON")->required();
    eval->add_option("--suite-dir", suite_dir, "Suite directory from 'generate'")->required();
    eval->add_option("--subset", subset, "Subset name")->required();
    eval->add_option("--split", split, "dev or test (default test)");
    eval->add_option("--model", model_name,
                     "Model preset name, or mock-echo / mock-random")->required();
    eval->add_option("--out", out_path, "Results JSONL path")->required();
    eval->add_option("--cache-dir", cache_dir, "Response cache directory");
    eval->add_option("--limit", limit, "Evaluate only the first N games");

    auto* diff = app.add_subcommand("difficulty", "Attach difficulty profiles to results");
    diff->add_option("--config", config_path, "Config JSON")->required();
    diff->add_option("--suite-dir", suite_dir, "Suite directory")->required();
    diff->add_option("--results", result_paths, "Results JSONL file")->required();
    diff->add_option("--out", out_path, "Augmented results JSONL path")->required();

    auto* rep = app.add_subcommand("report", "Aggregate results into report tables");
    rep->add_option("--config", config_path, "Config JSON");
    rep->add_option("--results", result_paths, "Results JSONL files")->required();
    rep->add_option("--out", out_path, "Report output directory")->required();

    auto* cal = app.add_subcommand("calibrate-ta", "Pick the TA threshold against human labels");
    cal->add_option("--annotations", annotations_path, "Annotation JSONL")->required();
    cal->add_option("--out", out_path, "Optional JSON report path");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        auto cfg = load_cfg(config_path);
        auto outcome = wgg::cmd_generate(cfg, out_path);
        std::cout << "wrote " << outcome.manifests << " manifests, " << outcome.game_files
                  << " game files to " << out_path << "\n";
        return 0;
    }

    if (eval->parsed()) {
        auto cfg = load_cfg(config_path);
        auto games = wgg::load_split(suite_dir, subset, split);
        if (limit >= 0 && games.size() > static_cast<std::size_t>(limit))
            games.resize(static_cast<std::size_t>(limit));
        auto model = wgg::make_eval_model(model_name, cfg);
        wgg::ResponseCache cache(cache_dir);

        std::map<std::string, wgg::GroupingDataset> datasets;
        if (auto it = cfg.dataset_paths.find(subset); it != cfg.dataset_paths.end())
            datasets[subset] = wgg::load_groupings(it->second, subset);
        std::map<std::string, wgg::EmbeddingTable> tables;
        if (auto it = cfg.embedding_paths.find(subset); it != cfg.embedding_paths.end())
            tables[subset] = wgg::load_vectors(it->second, std::nullopt, subset);

        std::optional<wgg::EvalModel> repair;
        if (!cfg.repair_model.empty()) repair = wgg::make_eval_model(cfg.repair_model, cfg);

        auto outcome = wgg::cmd_evaluate(games, model, cfg, out_path, cache,
                                         datasets.empty() ? nullptr : &datasets,
                                         tables.empty() ? nullptr : &tables,
                                         repair ? &*repair : nullptr);
        std::cout << outcome.records << " records (" << outcome.cache_hits << " from cache, "
                  << outcome.parse_failures << " parse failures, " << outcome.model_errors
                  << " model errors) -> " << out_path << "\n";
        return 0;
    }

    if (diff->parsed()) {
        auto cfg = load_cfg(config_path);
        auto records = wgg::load_results(result_paths.at(0));

        std::map<std::string, wgg::Game> games_by_id;
        std::set<std::string> subsets;
        for (const auto& r : records) subsets.insert(r.subset);
        std::map<std::string, wgg::EmbeddingTable> tables;
        for (const auto& s : subsets) {
            for (const auto& g : wgg::load_split(suite_dir, s, "dev")) games_by_id[g.id] = g;
            for (const auto& g : wgg::load_split(suite_dir, s, "test")) games_by_id[g.id] = g;
            auto it = cfg.embedding_paths.find(s);
            if (it == cfg.embedding_paths.end())
                throw wgg::ConfigError("config error: embeddings." + s + " is missing");
            tables[s] = wgg::load_vectors(it->second, std::nullopt, s);
        }
        auto augmented = wgg::cmd_difficulty(std::move(records), games_by_id, tables, cfg);
        wgg::save_results(augmented, out_path);
        std::cout << augmented.size() << " records profiled -> " << out_path << "\n";
        return 0;
    }

    if (rep->parsed()) {
        auto cfg = load_cfg(config_path);
        std::vector<wgg::ResultRecord> records;
        for (const auto& p : result_paths) {
            auto part = wgg::load_results(p);
            records.insert(records.end(), part.begin(), part.end());
        }
        auto bundle = wgg::cmd_report(records, cfg);
        wgg::write_report(bundle, out_path);
        std::cout << "report over " << bundle.total_records << " records -> " << out_path << "\n";
        return 0;
    }

    if (cal->parsed()) {
        auto outcome = wgg::cmd_calibrate_ta(annotations_path);
        std::cout << "threshold,kappa\n";
        for (const auto& row : outcome.result.rows)
            std::cout << row.threshold << ',' << row.kappa << '\n';
        std::cout << "selected " << outcome.result.best_threshold << " (kappa "
                  << outcome.result.best_kappa << ")";
        if (outcome.result.tie) std::cout << " [tie]";
        if (outcome.degenerate) std::cout << " [single item; kappa degenerate]";
        std::cout << "\n";
        if (!out_path.empty()) {
            wgg::json j;
            j["best_threshold"] = outcome.result.best_threshold;
            j["best_kappa"] = outcome.result.best_kappa;
            j["tie"] = outcome.result.tie;
            j["degenerate"] = outcome.degenerate;
            j["rows"] = wgg::json::array();
            for (const auto& row : outcome.result.rows)
                j["rows"].push_back({{"threshold", row.threshold}, {"kappa", row.kappa}});
            wgg::write_json_file(out_path, j);
        }
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
