#pragma once

// Keyed random streams. A stream is identified by (master seed, path index,
// purpose); the engine seed is a hash of that triple, so the draws a path sees
// never depend on which worker runs it or in what order.

#include <cmath>
#include <cstdint>
#include <random>

namespace levysync {

enum class Purpose : std::uint64_t {
    Driver = 1,        // the shared Levy driver of a coupled system
    Sampler = 2,       // plain variate draws (sampler checks)
    InitialState = 3,  // random initial conditions / probes
    Replica = 4,       // independent replica chains for invariant measures
    Probe = 5,         // hypothesis probes
};

struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    Purpose purpose = Purpose::Driver;

    friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

inline std::uint64_t stream_seed(const StreamKey& key) {
    std::uint64_t h = detail::splitmix64(key.master_seed);
    h = detail::splitmix64(h ^ key.path_index);
    return detail::splitmix64(h ^ static_cast<std::uint64_t>(key.purpose));
}

/// One independent random stream. Not shared between threads.
class RandomStream {
public:
    explicit RandomStream(const StreamKey& key) : engine_(stream_seed(key)) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform on the open interval (0, 1); both endpoints excluded.
    double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard exponential variate.
    double exponential() { return -std::log(uniform_open()); }

private:
    std::mt19937_64 engine_;
};

}  // namespace levysync
