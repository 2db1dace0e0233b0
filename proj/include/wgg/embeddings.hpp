#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "wgg/util.hpp"

namespace wgg {

using Vector = std::vector<double>;

class EmbeddingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EmbeddingTable {
    int dimension = 0;
    std::unordered_map<std::string, Vector> vocabulary;
    std::string language;

    const Vector* lookup(const std::string& token) const {
        auto it = vocabulary.find(token);
        return it == vocabulary.end() ? nullptr : &it->second;
    }
};

struct PhraseVector {
    Vector values;
    bool oov = false;
};

// Text vector file: header "count dim", then "token v1 ... v_dim" per line.
inline EmbeddingTable load_vectors(const std::string& path,
                                   std::optional<std::size_t> limit = std::nullopt,
                                   const std::string& language = "") {
    std::ifstream in(path);
    if (!in) throw EmbeddingError("cannot open vector file: " + path);
    std::size_t count = 0;
    int dim = 0;
    if (!(in >> count >> dim) || dim <= 0)
        throw EmbeddingError("bad header in vector file: " + path);
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');

    EmbeddingTable table;
    table.dimension = dim;
    table.language = language;
    std::size_t want = limit ? std::min(count, *limit) : count;
    std::string line;
    std::size_t row = 0;
    while (table.vocabulary.size() < want && std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::istringstream ls(line);
        std::string token;
        ls >> token;
        Vector v(dim);
        for (int i = 0; i < dim; ++i)
            if (!(ls >> v[i]))
                throw EmbeddingError("row " + std::to_string(row) + " in " + path +
                                     ": expected " + std::to_string(dim) + " floats");
        double extra;
        if (ls >> extra)
            throw EmbeddingError("row " + std::to_string(row) + " in " + path +
                                 ": too many values for dimension " + std::to_string(dim));
        table.vocabulary[token] = std::move(v);
    }
    if (table.vocabulary.empty())
        throw EmbeddingError("vector file has no usable rows: " + path);
    return table;
}

// Whitespace tokenizer with a per-character fallback for unsegmented CJK
// tokens that miss the vocabulary as a whole.
inline std::vector<std::string> tokenize_for_lookup(const EmbeddingTable& t, const std::string& phrase) {
    std::vector<std::string> out;
    for (auto& tok : split_ws(trim(phrase))) {
        if (!t.lookup(tok) && all_cjk(tok)) {
            for (auto& ch : utf8_chars(tok)) out.push_back(ch);
        } else {
            out.push_back(tok);
        }
    }
    return out;
}

// Token-averaged phrase vector; zero vector with oov=true when no token hits.
inline PhraseVector embed_phrase(const EmbeddingTable& t, const std::string& phrase) {
    PhraseVector pv;
    pv.values.assign(t.dimension, 0.0);
    int found = 0;
    for (const auto& tok : tokenize_for_lookup(t, phrase)) {
        if (const Vector* v = t.lookup(tok)) {
            for (int i = 0; i < t.dimension; ++i) pv.values[i] += (*v)[i];
            ++found;
        }
    }
    if (found == 0) {
        pv.oov = true;
        return pv;
    }
    for (auto& x : pv.values) x /= found;
    return pv;
}

inline double norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double cosine(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw EmbeddingError("cosine: dimension mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (nu * nv);
}

inline Vector l2_normalized(const Vector& v) {
    double n = norm(v);
    if (n == 0.0) return v;
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

namespace detail {

inline double sq_dist(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// k-means++ seeding.
inline std::vector<Vector> kmeanspp_init(const std::vector<Vector>& pts, int k, Rng& rng) {
    std::vector<Vector> centers;
    centers.push_back(pts[rng.below(pts.size())]);
    std::vector<double> d2(pts.size());
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = sq_dist(pts[i], centers[0]);
            for (std::size_t c = 1; c < centers.size(); ++c)
                best = std::min(best, sq_dist(pts[i], centers[c]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.below(pts.size());
        } else {
            double r = rng.unit() * total;
            pick = pts.size() - 1;
            double acc = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                acc += d2[i];
                if (r <= acc) { pick = i; break; }
            }
        }
        centers.push_back(pts[pick]);
    }
    return centers;
}

struct KmeansRun {
    std::vector<int> labels;
    double wcss = 0.0;
};

inline KmeansRun kmeans_once(const std::vector<Vector>& pts, int k, std::uint64_t seed,
                             int max_iters) {
    Rng rng(seed);
    auto centers = kmeanspp_init(pts, k, rng);
    std::vector<int> labels(pts.size(), -1);
    for (int iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            double bd = sq_dist(pts[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                double d = sq_dist(pts[i], centers[c]);
                if (d < bd) { bd = d; best = c; }
            }
            if (labels[i] != best) { labels[i] = best; changed = true; }
        }
        if (!changed && iter > 0) break;
        std::vector<Vector> sums(k, Vector(pts[0].size(), 0.0));
        std::vector<int> counts(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t d = 0; d < pts[i].size(); ++d) sums[labels[i]][d] += pts[i][d];
            ++counts[labels[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed an empty cluster at a random point.
                centers[c] = pts[rng.below(pts.size())];
                continue;
            }
            for (auto& x : sums[c]) x /= counts[c];
            centers[c] = std::move(sums[c]);
        }
    }
    KmeansRun run;
    run.labels = std::move(labels);
    for (std::size_t i = 0; i < pts.size(); ++i)
        run.wcss += sq_dist(pts[i], centers[run.labels[i]]);
    return run;
}

}  // namespace detail

// Best of `restarts` seeded k-means runs by within-cluster sum of squares.
// Restart seeds are fixed by restart index, so the result is independent of
// scheduling.
inline std::vector<int> kmeans(const std::vector<Vector>& points, int k, std::uint64_t seed,
                               int restarts = 10, int max_iters = 100) {
    if (k < 1) throw EmbeddingError("kmeans: k must be >= 1");
    if (points.size() < static_cast<std::size_t>(k))
        throw EmbeddingError("kmeans: k exceeds number of points");
    if (k == 1) return std::vector<int>(points.size(), 0);

    detail::KmeansRun best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        auto run = detail::kmeans_once(points, k, mix_seed({seed, static_cast<std::uint64_t>(r)}),
                                       max_iters);
        if (run.wcss < best.wcss) best = std::move(run);
    }
    return best.labels;
}

}  // namespace wgg
