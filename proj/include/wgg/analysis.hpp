#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wgg/core.hpp"
#include "wgg/embeddings.hpp"

namespace wgg {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DifficultyProfile {
    int group_count = 0;
    int group_size = 0;
    std::optional<double> ari;
    std::optional<double> silhouette_truth;
    std::optional<double> silhouette_predicted;
    std::optional<double> word_overlap;
    std::optional<double> integrated;
};

struct DifficultyWeights {
    double w_count = 1.000;
    double w_ari = -0.900;
    double w_overlap = 0.800;
    double count_lo = 2.0, count_hi = 4.0;
    double ari_lo = -1.0, ari_hi = 1.0;
    double overlap_lo = 0.0, overlap_hi = 3.0;
};

struct BinningConfig {
    std::vector<double> ari_edges = {-0.5, 0.0, 0.5, 1.0};
    std::vector<double> overlap_edges = {0.0, 0.75, 1.5, 2.25, 3.0};
};

enum class OverlapMode {
    kUnion,     // per topic: |words(t) ∩ union of other topics' words|
    kPairwise,  // mean over unordered topic pairs of |intersection|
};

namespace detail {

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace detail

// Hubert–Arabie adjusted Rand index from the contingency table.
inline double adjusted_rand_index(const std::vector<int>& labels_a,
                                  const std::vector<int>& labels_b) {
    if (labels_a.size() != labels_b.size())
        throw AnalysisError("adjusted_rand_index: label lists differ in length");
    if (labels_a.size() < 2)
        throw AnalysisError("adjusted_rand_index: need at least 2 items");

    std::map<std::pair<int, int>, int> contingency;
    std::map<int, int> row_sums, col_sums;
    for (std::size_t i = 0; i < labels_a.size(); ++i) {
        ++contingency[{labels_a[i], labels_b[i]}];
        ++row_sums[labels_a[i]];
        ++col_sums[labels_b[i]];
    }
    double index = 0.0;
    for (const auto& [_, nij] : contingency) index += detail::choose2(nij);
    double sum_a = 0.0, sum_b = 0.0;
    for (const auto& [_, c] : row_sums) sum_a += detail::choose2(c);
    for (const auto& [_, c] : col_sums) sum_b += detail::choose2(c);
    double total_pairs = detail::choose2(static_cast<double>(labels_a.size()));
    double expected = sum_a * sum_b / total_pairs;
    double max_index = 0.5 * (sum_a + sum_b);
    double denom = max_index - expected;
    if (denom == 0.0) {
        // Degenerate partitions (e.g. all-singletons or all-one-cluster on
        // both sides). Identical partitions score 1 by convention.
        return index == max_index ? 1.0 : 0.0;
    }
    return (index - expected) / denom;
}

// Truth-vs-kmeans ARI for a game: embed every pool word (L2-normalized so
// Euclidean k-means approximates cosine clustering), cluster with k = m.
inline double game_ari(const Game& game, const EmbeddingTable& table, std::uint64_t seed) {
    if (game.m < 2) throw AnalysisError("game_ari: need at least 2 groups");
    std::vector<Vector> points;
    std::vector<int> truth_labels;
    for (std::size_t g = 0; g < game.truth_groups.size(); ++g) {
        for (const auto& w : game.truth_groups[g].words) {
            points.push_back(l2_normalized(embed_phrase(table, w).values));
            truth_labels.push_back(static_cast<int>(g));
        }
    }
    auto cluster_labels = kmeans(points, game.m, seed);
    return adjusted_rand_index(truth_labels, cluster_labels);
}

// Mean silhouette with Euclidean distance; singleton-cluster points and
// zero-width points (a = b = 0) contribute 0.
inline double silhouette(const std::vector<Vector>& points, const std::vector<int>& labels) {
    if (points.size() != labels.size())
        throw AnalysisError("silhouette: points/labels length mismatch");
    std::set<int> clusters(labels.begin(), labels.end());
    if (clusters.size() < 2) throw AnalysisError("silhouette: need at least 2 clusters");

    std::map<int, int> sizes;
    for (int l : labels) ++sizes[l];

    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (sizes[labels[i]] == 1) continue;  // contributes 0
        std::map<int, double> dist_sum;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j == i) continue;
            dist_sum[labels[j]] += std::sqrt(detail::sq_dist(points[i], points[j]));
        }
        double a = dist_sum[labels[i]] / (sizes[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c : clusters) {
            if (c == labels[i]) continue;
            b = std::min(b, dist_sum[c] / sizes[c]);
        }
        double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / points.size();
}

// Word overlap across candidate proposals. Union mode counts, per topic, the
// words it shares with any other topic (once each); pairwise mode averages
// pairwise intersection sizes.
inline double word_overlap(const std::map<std::string, std::vector<std::string>>& proposals,
                           const std::vector<std::string>& topics,
                           OverlapMode mode = OverlapMode::kUnion) {
    if (topics.empty()) throw AnalysisError("word_overlap: no topics");
    std::vector<std::set<std::string>> sets;
    for (const auto& t : topics) {
        auto it = proposals.find(t);
        if (it == proposals.end()) throw AnalysisError("word_overlap: missing topic '" + t + "'");
        std::set<std::string> s;
        for (const auto& w : it->second) s.insert(normalize_word(w));
        sets.push_back(std::move(s));
    }
    if (mode == OverlapMode::kPairwise) {
        if (sets.size() < 2) return 0.0;
        double total = 0.0;
        int pairs = 0;
        for (std::size_t i = 0; i < sets.size(); ++i)
            for (std::size_t j = i + 1; j < sets.size(); ++j) {
                int is = 0;
                for (const auto& w : sets[i])
                    if (sets[j].count(w)) ++is;
                total += is;
                ++pairs;
            }
        return total / pairs;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        int shared = 0;
        for (const auto& w : sets[i]) {
            for (std::size_t j = 0; j < sets.size(); ++j) {
                if (j == i) continue;
                if (sets[j].count(w)) { ++shared; break; }
            }
        }
        total += shared;
    }
    return total / sets.size();
}

// Project group count, ARI, and overlap onto [0,1], combine with the fixed
// correlation-derived weights, and rescale the [-0.9, 1.8] raw range to [0,1].
inline double integrated_difficulty(int m, double ari, double overlap,
                                    const DifficultyWeights& w = {}) {
    if (m < w.count_lo || m > w.count_hi)
        throw AnalysisError("integrated_difficulty: group count out of range");
    if (ari < w.ari_lo - 1e-12 || ari > w.ari_hi + 1e-12)
        throw AnalysisError("integrated_difficulty: ari out of range");
    double p_count = (m - w.count_lo) / (w.count_hi - w.count_lo);
    double p_ari = (ari - w.ari_lo) / (w.ari_hi - w.ari_lo);
    double p_overlap = (std::clamp(overlap, w.overlap_lo, w.overlap_hi) - w.overlap_lo) /
                       (w.overlap_hi - w.overlap_lo);
    double raw = w.w_count * p_count + w.w_ari * p_ari + w.w_overlap * p_overlap;
    double lo = std::min(w.w_count, 0.0) + std::min(w.w_ari, 0.0) + std::min(w.w_overlap, 0.0);
    double hi = std::max(w.w_count, 0.0) + std::max(w.w_ari, 0.0) + std::max(w.w_overlap, 0.0);
    return (raw - lo) / (hi - lo);
}

inline std::vector<double> average_ranks(const std::vector<double>& xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        double mean_rank = (i + j) / 2.0 + 1.0;  // ties share the mean rank
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

// Spearman rank correlation; nullopt when either input is constant.
inline std::optional<double> spearman(const std::vector<double>& xs,
                                      const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw AnalysisError("spearman: length mismatch");
    if (xs.size() < 2) throw AnalysisError("spearman: need at least 2 points");
    auto rx = average_ranks(xs), ry = average_ranks(ys);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) { mx += rx[i]; my += ry[i]; }
    mx /= rx.size();
    my /= ry.size();
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// Free-marginal kappa between two raters: (P_obs - 1/q) / (1 - 1/q).
inline double randolph_kappa(const std::vector<std::pair<int, int>>& annotations, int q) {
    if (q < 2) throw AnalysisError("randolph_kappa: need at least 2 categories");
    if (annotations.empty()) throw AnalysisError("randolph_kappa: no items");
    int agree = 0;
    for (const auto& [a, b] : annotations)
        if (a == b) ++agree;
    // (P_obs - 1/q) / (1 - 1/q), rearranged to one exact integer ratio.
    auto n = static_cast<double>(annotations.size());
    return (agree * q - n) / (n * (q - 1));
}

struct BinResult {
    double lo = 0.0, hi = 0.0;
    int count = 0;
    std::optional<double> mean;
    bool has_out_of_range = false;
};

// First bin is closed on both ends, subsequent bins are left-open, matching
// the [-0.5, 0.0] (0.0, 0.5] (0.5, 1.0] convention. Out-of-range values go
// to the nearest terminal bin and flag it.
inline std::vector<BinResult> bin_scores(const std::vector<std::pair<double, double>>& values,
                                         const std::vector<double>& edges) {
    if (edges.size() < 2) throw AnalysisError("bin_scores: need at least 2 edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] <= edges[i - 1])
            throw AnalysisError("bin_scores: edges must be strictly increasing");

    std::vector<BinResult> bins(edges.size() - 1);
    std::vector<double> sums(bins.size(), 0.0);
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].lo = edges[b];
        bins[b].hi = edges[b + 1];
    }
    for (const auto& [value, score] : values) {
        std::size_t b;
        if (value < edges.front()) {
            b = 0;
            bins[b].has_out_of_range = true;
        } else if (value > edges.back()) {
            b = bins.size() - 1;
            bins[b].has_out_of_range = true;
        } else {
            b = 0;
            while (b + 1 < bins.size() && value > edges[b + 1]) ++b;
        }
        ++bins[b].count;
        sums[b] += score;
    }
    for (std::size_t b = 0; b < bins.size(); ++b)
        if (bins[b].count > 0) bins[b].mean = sums[b] / bins[b].count;
    return bins;
}

struct TaCalibrationItem {
    double sim_matched = 0.0;   // similarity between predicted and matched true topic
    double max_other_sim = 0.0; // best similarity to any other true topic
    bool human_label = false;
};

struct TaCalibrationRow {
    double threshold = 0.0;
    double kappa = 0.0;
};

struct TaCalibrationResult {
    double best_threshold = 0.0;
    double best_kappa = 0.0;
    bool tie = false;
    std::vector<TaCalibrationRow> rows;
};

// Pick the threshold whose induced TA predictions agree best (Randolph's
// kappa, q = 2) with the human labels; ties resolve to the smallest.
inline TaCalibrationResult calibrate_ta(const std::vector<TaCalibrationItem>& items,
                                        const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw AnalysisError("calibrate_ta: no thresholds");
    TaCalibrationResult result;
    bool first = true;
    for (double th : thresholds) {
        std::vector<std::pair<int, int>> pairs;
        for (const auto& it : items) {
            bool pred = it.sim_matched >= th && it.sim_matched > it.max_other_sim;
            pairs.emplace_back(pred ? 1 : 0, it.human_label ? 1 : 0);
        }
        double kappa = items.empty() ? 0.0 : randolph_kappa(pairs, 2);
        result.rows.push_back({th, kappa});
        if (first || kappa > result.best_kappa) {
            result.best_threshold = th;
            result.best_kappa = kappa;
            result.tie = false;
            first = false;
        } else if (kappa == result.best_kappa) {
            result.tie = true;
        }
    }
    return result;
}

inline json profile_to_json(const DifficultyProfile& p) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    j["group_count"] = p.group_count;
    j["group_size"] = p.group_size;
    j["ari"] = opt(p.ari);
    j["silhouette_truth"] = opt(p.silhouette_truth);
    j["silhouette_predicted"] = opt(p.silhouette_predicted);
    j["word_overlap"] = opt(p.word_overlap);
    j["integrated"] = opt(p.integrated);
    return j;
}

inline DifficultyProfile profile_from_json(const json& j) {
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    DifficultyProfile p;
    p.group_count = j.at("group_count").get<int>();
    p.group_size = j.at("group_size").get<int>();
    p.ari = opt("ari");
    p.silhouette_truth = opt("silhouette_truth");
    p.silhouette_predicted = opt("silhouette_predicted");
    p.word_overlap = opt("word_overlap");
    p.integrated = opt("integrated");
    return p;
}

}  // namespace wgg
