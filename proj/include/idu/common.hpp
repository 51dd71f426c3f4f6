#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace idu {

// ---------------------------------------------------------------------------
// Error taxonomy. Exit codes: 0 ok, 2 data, 3 config, 4 numeric.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual int exit_code() const { return 1; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 2; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 3; }
};

class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 4; }
};

class ShapeError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class UsageError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Unknown tag during label mapping; never silently maps to Benign.
class UnknownTagError : public DataError {
public:
    explicit UnknownTagError(const std::string& tag)
        : DataError("unknown tag: \"" + tag + "\""), tag_(tag) {}
    const std::string& tag() const { return tag_; }

private:
    std::string tag_;
};

// ---------------------------------------------------------------------------
// Deterministic RNG. xoshiro256** seeded via splitmix64; all distributions
// implemented explicitly so streams are identical across platforms/compilers.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& s : s_) s = splitmix64(sm);
        has_gauss_ = false;
    }

    // Derive an independent stream, e.g. per tree or per user shard.
    static Rng derive(uint64_t seed, uint64_t stream) {
        uint64_t sm = seed;
        uint64_t a = splitmix64(sm);
        uint64_t b = stream + 0x9e3779b97f4a7c15ULL;
        return Rng(a ^ splitmix64(b));
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform integer in [0, n), unbiased by rejection.
    uint64_t uniform_u64(uint64_t n) {
        if (n == 0) throw UsageError("Rng::uniform_u64: n must be > 0");
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (pair cached).
    double gauss() {
        if (has_gauss_) {
            has_gauss_ = false;
            return cached_gauss_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793 * u2;
        cached_gauss_ = r * std::sin(theta);
        has_gauss_ = true;
        return r * std::cos(theta);
    }

    // In-place Fisher-Yates shuffle.
    template <class V>
    void shuffle(V& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_u64(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4]{};
    bool has_gauss_ = false;
    double cached_gauss_ = 0.0;
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit digest, used for config/encoder/file fingerprints.
// ---------------------------------------------------------------------------

class Fnv64 {
public:
    void update(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }
    uint64_t value() const { return h_; }
    std::string hex() const;

private:
    uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string digest_hex(std::string_view bytes);
std::string digest_file_hex(const std::string& path);

// ---------------------------------------------------------------------------
// Small string helpers shared by parsers.
// ---------------------------------------------------------------------------

std::string trim(std::string_view s);
std::string lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Parses a double; returns false on empty/garbage instead of throwing.
bool parse_number(std::string_view cell, double& out);

template <class T>
bool is_finite_value(T v) {
    return std::isfinite(static_cast<double>(v));
}

}  // namespace idu
