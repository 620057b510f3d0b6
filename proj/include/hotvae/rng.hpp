#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "hotvae/error.hpp"

namespace hotvae {

// Deterministic, serializable random number generator.
//
// Core generator is xoshiro256++ (Blackman & Vigna), seeded through
// SplitMix64. All distribution transforms are written out explicitly so
// that streams are bit-identical across platforms and standard libraries.
class Rng {
public:
    Rng() : Rng(0x9e3779b97f4a7c15ull) {}

    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = split_mix64(x);
    }

    // Independent stream derived from (seed, stream_id). Used to give each
    // consumer (init, dropout, shuffling, sampling) its own generator.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t x = seed;
        std::uint64_t a = split_mix64(x);
        std::uint64_t mixed = a ^ split_mix64(stream_id += 0x9e3779b97f4a7c15ull);
        return Rng(mixed);
    }

    // Raw 64 uniformly random bits.
    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1): top 53 bits scaled by 2^-53.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. No spare caching: each call consumes
    // exactly two uniforms, which keeps replay independent of call history.
    double normal() {
        double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n) with modulo-rejection (unbiased).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ValueError("Rng::below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // State descriptor: 4 lowercase hex words separated by ':'.
    std::string serialize() const {
        std::string out;
        for (std::size_t i = 0; i < 4; ++i) {
            if (i) out += ':';
            out += to_hex(state_[i]);
        }
        return out;
    }

    static Rng deserialize(const std::string& text) {
        Rng rng(0);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            std::size_t end = text.find(':', pos);
            std::string word = (end == std::string::npos) ? text.substr(pos) : text.substr(pos, end - pos);
            if (word.empty()) throw ParseError("Rng::deserialize: malformed state descriptor");
            rng.state_[i] = from_hex(word);
            pos = (end == std::string::npos) ? text.size() : end + 1;
        }
        if (pos != text.size()) throw ParseError("Rng::deserialize: trailing characters in state descriptor");
        return rng;
    }

    bool operator==(const Rng& other) const { return state_ == other.state_; }

private:
    std::array<std::uint64_t, 4> state_{};

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t split_mix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static std::string to_hex(std::uint64_t v) {
        static const char* digits = "0123456789abcdef";
        std::string s(16, '0');
        for (int i = 15; i >= 0; --i) {
            s[static_cast<std::size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return s;
    }

    static std::uint64_t from_hex(const std::string& s) {
        if (s.size() != 16) throw ParseError("Rng::deserialize: state word must be 16 hex digits");
        std::uint64_t v = 0;
        for (char c : s) {
            v <<= 4;
            if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
            else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
            else throw ParseError("Rng::deserialize: invalid hex digit");
        }
        return v;
    }
};

} // namespace hotvae
