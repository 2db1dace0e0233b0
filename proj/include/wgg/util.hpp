#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wgg {

// Deterministic 64-bit generator (splitmix64). Used everywhere a seed
// appears so that outputs are reproducible across platforms and standard
// library versions, which std::shuffle/distributions do not guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound) by rejection.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
        std::uint64_t threshold = -bound % bound;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

    // Sample k distinct indices from [0, n) without replacement.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        if (k > n) throw std::invalid_argument("sample_indices: k > n");
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < k; ++i)
            std::swap(idx[i], idx[i + below(n - i)]);
        idx.resize(k);
        return idx;
    }

private:
    std::uint64_t state_;
};

// Stable mix of several 64-bit values into one seed.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x8445d61a4e774912ULL;
    for (std::uint64_t p : parts) {
        h ^= p + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        Rng r(h);
        h = r.next();
    }
    return h;
}

// FNV-1a over bytes; stable fingerprint for cache keys.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

// Decode one UTF-8 codepoint starting at i; advances i. Returns U+FFFD on
// malformed input (and advances one byte).
inline char32_t utf8_next(std::string_view s, std::size_t& i) {
    unsigned char c = s[i];
    if (c < 0x80) { ++i; return c; }
    int len = (c >= 0xf0) ? 4 : (c >= 0xe0) ? 3 : (c >= 0xc0) ? 2 : 1;
    if (len == 1 || i + len > s.size()) { ++i; return 0xFFFD; }
    char32_t cp = c & (0x7f >> len);
    for (int k = 1; k < len; ++k) {
        unsigned char cc = s[i + k];
        if ((cc & 0xc0) != 0x80) { ++i; return 0xFFFD; }
        cp = (cp << 6) | (cc & 0x3f);
    }
    i += len;
    return cp;
}

inline std::vector<std::string> utf8_chars(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t b = i;
        utf8_next(s, i);
        out.emplace_back(s.substr(b, i - b));
    }
    return out;
}

inline bool is_cjk(char32_t cp) {
    return (cp >= 0x2E80 && cp <= 0x9FFF) ||    // radicals, kangxi, CJK unified
           (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0xF900 && cp <= 0xFAFF) ||    // compatibility ideographs
           (cp >= 0x20000 && cp <= 0x2FA1F);
}

// True when every codepoint of the token is a CJK ideograph.
inline bool all_cjk(std::string_view token) {
    if (token.empty()) return false;
    std::size_t i = 0;
    while (i < token.size())
        if (!is_cjk(utf8_next(token, i))) return false;
    return true;
}

}  // namespace wgg
