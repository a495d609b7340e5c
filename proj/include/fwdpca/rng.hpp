#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace fwdpca {

/// Random stream used by every simulator and contamination generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform and normal variates are produced here rather than by
/// the <random> distributions, whose algorithms are implementation-defined,
/// so a seed yields the same draws with any conforming toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by the Marsaglia polar method.
    double normal();

    /// Uniform integer in [0, n), unbiased.
    std::size_t uniform_index(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Sub-stream purposes. Toggling one consumer (e.g. the noise) never shifts
/// the draws seen by another (e.g. the data generating process).
enum class StreamPurpose : std::uint64_t {
    dgp = 1,
    noise = 2,
    omission = 3,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed for stream (master, replication, purpose):
/// mix64(mix64(mix64(master) ^ replication) ^ purpose).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replication, StreamPurpose purpose);

Rng seed_stream(std::uint64_t master, std::uint64_t replication,
                StreamPurpose purpose = StreamPurpose::dgp);

}  // namespace fwdpca
