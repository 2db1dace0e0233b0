#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <unistd.h>

#include "wgg/embeddings.hpp"

using namespace wgg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("wgg_emb_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string write_vec_file(const TempDir& tmp, const std::string& content,
                           const std::string& name = "vec.txt") {
    auto p = (tmp.path / name).string();
    std::ofstream out(p);
    out << content;
    return p;
}

EmbeddingTable tiny_table() {
    EmbeddingTable t;
    t.dimension = 2;
    t.vocabulary["cat"] = {1.0, 0.0};
    t.vocabulary["dog"] = {0.0, 1.0};
    t.vocabulary["fish"] = {1.0, 1.0};
    return t;
}

}  // namespace

TEST_CASE("load_vectors reads header and rows") {
    TempDir tmp;
    auto p = write_vec_file(tmp, "3 4\na 1 2 3 4\nb 0 0 0 1\nc -1 0.5 2 3\n");
    auto t = load_vectors(p);
    CHECK(t.dimension == 4);
    CHECK(t.vocabulary.size() == 3);
    CHECK((*t.lookup("c"))[1] == doctest::Approx(0.5));
}

TEST_CASE("load_vectors honors the limit") {
    TempDir tmp;
    auto p = write_vec_file(tmp, "3 2\na 1 2\nb 3 4\nc 5 6\n");
    auto t = load_vectors(p, 1);
    CHECK(t.vocabulary.size() == 1);
}

TEST_CASE("load_vectors reports the row with wrong arity") {
    TempDir tmp;
    auto p = write_vec_file(tmp, "2 4\na 1 2 3 4\nb 1 2 3\n");
    try {
        load_vectors(p);
        FAIL("expected EmbeddingError");
    } catch (const EmbeddingError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
    auto p2 = write_vec_file(tmp, "1 2\na 1 2 3\n", "extra.txt");
    CHECK_THROWS_AS(load_vectors(p2), EmbeddingError);
}

TEST_CASE("load_vectors rejects a bad header") {
    TempDir tmp;
    auto p = write_vec_file(tmp, "hello world\n");
    CHECK_THROWS_AS(load_vectors(p), EmbeddingError);
}

TEST_CASE("embed_phrase of one in-vocab token is that vector") {
    auto t = tiny_table();
    auto pv = embed_phrase(t, "cat");
    CHECK(!pv.oov);
    CHECK(pv.values == Vector{1.0, 0.0});
}

TEST_CASE("embed_phrase averages token vectors") {
    auto t = tiny_table();
    auto pv = embed_phrase(t, "cat dog");
    CHECK(pv.values[0] == doctest::Approx(0.5));
    CHECK(pv.values[1] == doctest::Approx(0.5));
}

TEST_CASE("embed_phrase of a fully OOV phrase is the flagged zero vector") {
    auto t = tiny_table();
    auto pv = embed_phrase(t, "zebra unicorn");
    CHECK(pv.oov);
    CHECK(pv.values == Vector{0.0, 0.0});
}

TEST_CASE("embed_phrase ignores surrounding whitespace") {
    auto t = tiny_table();
    CHECK(embed_phrase(t, "  cat dog  ").values == embed_phrase(t, "cat dog").values);
}

TEST_CASE("embed_phrase falls back to per-character lookup for OOV CJK tokens") {
    EmbeddingTable t;
    t.dimension = 2;
    t.vocabulary["猫"] = {1.0, 0.0};
    t.vocabulary["狗"] = {0.0, 1.0};
    auto pv = embed_phrase(t, "猫狗");
    CHECK(!pv.oov);
    CHECK(pv.values[0] == doctest::Approx(0.5));
    CHECK(pv.values[1] == doctest::Approx(0.5));
    // A whole-token vocabulary hit takes precedence over the fallback.
    t.vocabulary["猫狗"] = {5.0, 5.0};
    CHECK(embed_phrase(t, "猫狗").values == Vector{5.0, 5.0});
}

TEST_CASE("cosine basics") {
    Vector u{1.0, 2.0, 3.0};
    CHECK(cosine(u, u) == doctest::Approx(1.0));
    CHECK(cosine({1.0, 0.0}, {0.0, 1.0}) == doctest::Approx(0.0));
    CHECK(cosine(u, {0.0, 0.0, 0.0}) == 0.0);
    CHECK_THROWS_AS(cosine({1.0}, {1.0, 2.0}), EmbeddingError);
}

TEST_CASE("cosine is symmetric and scale-invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        Vector u(3), v(3);
        for (int i = 0; i < 3; ++i) {
            u[i] = rng.unit() * 2 - 1;
            v[i] = rng.unit() * 2 - 1;
        }
        double c = cosine(u, v);
        CHECK(cosine(v, u) == doctest::Approx(c));
        double a = rng.unit() * 5 + 0.1, b = rng.unit() * 5 + 0.1;
        Vector au(3), bv(3);
        for (int i = 0; i < 3; ++i) {
            au[i] = a * u[i];
            bv[i] = b * v[i];
        }
        CHECK(cosine(au, bv) == doctest::Approx(c));
        CHECK(c >= -1.0 - 1e-12);
        CHECK(c <= 1.0 + 1e-12);
    }
}

TEST_CASE("kmeans with k=1 labels everything 0") {
    std::vector<Vector> pts = {{0, 0}, {1, 1}, {2, 2}};
    CHECK(kmeans(pts, 1, 0) == std::vector<int>{0, 0, 0});
}

TEST_CASE("kmeans separates two distant blobs") {
    Rng rng(11);
    std::vector<Vector> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({rng.unit(), rng.unit()});
    for (int i = 0; i < 10; ++i) pts.push_back({100 + rng.unit(), 100 + rng.unit()});
    auto labels = kmeans(pts, 2, 3);
    // Partition agreement up to relabeling.
    for (int i = 1; i < 10; ++i) CHECK(labels[i] == labels[0]);
    for (int i = 11; i < 20; ++i) CHECK(labels[i] == labels[10]);
    CHECK(labels[0] != labels[10]);
}

TEST_CASE("kmeans with k = |points| gives singleton clusters") {
    std::vector<Vector> pts = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
    auto labels = kmeans(pts, 4, 5);
    CHECK(std::set<int>(labels.begin(), labels.end()).size() == 4);
}

TEST_CASE("kmeans rejects k > |points| and k < 1") {
    std::vector<Vector> pts = {{0, 0}, {1, 1}};
    CHECK_THROWS_AS(kmeans(pts, 3, 0), EmbeddingError);
    CHECK_THROWS_AS(kmeans(pts, 0, 0), EmbeddingError);
}

TEST_CASE("kmeans is deterministic given the seed") {
    Rng rng(2024);
    std::vector<Vector> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({rng.unit() * 10, rng.unit() * 10});
    CHECK(kmeans(pts, 4, 77) == kmeans(pts, 4, 77));
}
