#pragma once

#include <set>
#include <string>
#include <vector>

#include "wgg/core.hpp"
#include "wgg/util.hpp"

namespace wgg {

struct GameSuite {
    int m = 0;
    int n = 0;
    std::vector<Game> dev;
    std::vector<Game> test;
    std::string source_subset;
    std::uint64_t master_seed = 0;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr int kResampleRetryCap = 1000;

namespace detail {

inline std::string make_game_id(const std::string& subset, int m, int n, std::uint64_t seed) {
    std::ostringstream os;
    os << subset << '-' << m << 'x' << n << '-' << std::hex << seed;
    return os.str();
}

// Sample n words without replacement from a grouping, order-randomized.
inline std::vector<std::string> sample_words(const std::vector<std::string>& words, int n, Rng& rng) {
    auto idx = rng.sample_indices(words.size(), static_cast<std::size_t>(n));
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(normalize_word(words[i]));
    return out;
}

}  // namespace detail

// One seeded game: m groupings sampled from the dataset, n words per
// grouping, rejection-resampled until words and topics are game-unique.
inline Game generate_game(const GroupingDataset& d, int m, int n, std::uint64_t seed) {
    if (m < 2 || m > 4 || n < 2 || n > 4)
        throw GenerationError("m and n must be in {2,3,4}");
    if (d.groupings.size() < static_cast<std::size_t>(m))
        throw GenerationError("dataset has fewer than m groupings");

    Rng rng(seed);
    for (int attempt = 0; attempt < kResampleRetryCap; ++attempt) {
        auto chosen = rng.sample_indices(d.groupings.size(), static_cast<std::size_t>(m));
        std::set<std::string> topics, words;
        std::vector<TruthGroup> groups;
        bool ok = true;
        for (auto gi : chosen) {
            const auto& src = d.groupings[gi];
            if (!topics.insert(trim(src.topic)).second) { ok = false; break; }
            auto sampled = detail::sample_words(src.words, n, rng);
            for (const auto& w : sampled)
                if (!words.insert(w).second) { ok = false; break; }
            if (!ok) break;
            groups.push_back({src.topic, std::move(sampled)});
        }
        if (!ok) continue;

        Game g;
        g.subset_name = d.subset_name;
        g.m = m;
        g.n = n;
        g.seed = seed;
        g.truth_groups = std::move(groups);
        for (const auto& t : g.truth_groups)
            g.pool.insert(g.pool.end(), t.words.begin(), t.words.end());
        rng.shuffle(g.pool);
        g.id = detail::make_game_id(d.subset_name, m, n, seed);
        return g;
    }
    throw GenerationError("could not find " + std::to_string(m) +
                          " word-disjoint groupings after " +
                          std::to_string(kResampleRetryCap) + " attempts");
}

inline std::uint64_t derive_game_seed(std::uint64_t master_seed, int m, int n, int index) {
    return mix_seed({master_seed, static_cast<std::uint64_t>(m),
                     static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(index)});
}

inline std::vector<GameSuite> generate_suite(const GroupingDataset& d,
                                             const std::vector<std::pair<int, int>>& settings,
                                             int count_per_setting, std::uint64_t master_seed) {
    if (count_per_setting % 2 != 0)
        throw GenerationError("count_per_setting must be even for an even dev/test split");
    std::vector<GameSuite> suites;
    for (auto [m, n] : settings) {
        GameSuite suite;
        suite.m = m;
        suite.n = n;
        suite.source_subset = d.subset_name;
        suite.master_seed = master_seed;
        for (int i = 0; i < count_per_setting; ++i) {
            Game g = generate_game(d, m, n, derive_game_seed(master_seed, m, n, i));
            g.id += "-" + std::to_string(i);
            if (i < count_per_setting / 2)
                suite.dev.push_back(std::move(g));
            else
                suite.test.push_back(std::move(g));
        }
        suites.push_back(std::move(suite));
    }
    return suites;
}

// Sequential derivation: each source game keeps its own groups together
// (preserving intentional overlap); only the words are down-sampled.
inline GameSuite derive_sequential_games(const std::vector<Game>& source_games, int n,
                                         std::uint64_t seed, int dev_count = -1,
                                         const std::string& subset_name = "nyt-seq") {
    if (n < 2 || n > 4) throw GenerationError("n must be in {2,3,4}");
    GameSuite suite;
    suite.m = 4;
    suite.n = n;
    suite.source_subset = subset_name;
    suite.master_seed = seed;
    std::vector<Game> games;
    int index = 0;
    for (const auto& src : source_games) {
        if (src.truth_groups.size() != 4)
            throw GenerationError("source game " + src.id + " has " +
                                  std::to_string(src.truth_groups.size()) +
                                  " groups, expected 4");
        Rng rng(mix_seed({seed, static_cast<std::uint64_t>(index)}));
        Game g;
        g.subset_name = subset_name;
        g.m = 4;
        g.n = n;
        g.seed = mix_seed({seed, static_cast<std::uint64_t>(index)});
        for (const auto& grp : src.truth_groups)
            g.truth_groups.push_back({grp.topic, detail::sample_words(grp.words, n, rng)});
        for (const auto& t : g.truth_groups)
            g.pool.insert(g.pool.end(), t.words.begin(), t.words.end());
        rng.shuffle(g.pool);
        g.id = subset_name + "-" + src.id + "-" + std::to_string(n) + "w";
        games.push_back(std::move(g));
        ++index;
    }
    if (dev_count < 0) dev_count = static_cast<int>(games.size()) / 2;
    for (std::size_t i = 0; i < games.size(); ++i) {
        if (static_cast<int>(i) < dev_count)
            suite.dev.push_back(std::move(games[i]));
        else
            suite.test.push_back(std::move(games[i]));
    }
    return suite;
}

}  // namespace wgg
