#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpfdr/io.hpp"
#include "lpfdr/partition_engine.hpp"

namespace lpfdr {

// A generated partition plus ground truth: is_signal flags each value, z holds
// the underlying z-score when the generator works on that scale.
struct SimulatedPartition {
    PValuePartition partition;
    std::vector<std::uint8_t> is_signal;
    std::vector<double> z;
};

// Heterogeneous 200-partition layout: 49 null N(0,1) z-scores everywhere,
// plus 25 extra N(2,1) signals in partitions 1-4 and 25 extra Uniform(2,4)
// signals in partitions 5-8 (10000 values total). All randomness flows from
// one seeded generator through inverse-CDF transforms, so results are
// identical across platforms.
std::vector<SimulatedPartition> simulate_example2_values(std::uint64_t seed,
                                                         PValueKind kind = PValueKind::TwoSidedFromZ);

// Writes the z-scores as partition_001..partition_200 files plus a manifest
// with the given kind; returns the manifest path.
std::string simulate_example2_files(std::uint64_t seed, const std::string& out_dir,
                                    PValueKind kind = PValueKind::TwoSidedFromZ);

// Alternative component of the two-group mixture F = eta F0 + (1-eta) H.
struct MixtureAlternative {
    enum class Kind { Beta, NormalShift };
    Kind kind = Kind::Beta;
    double a = 0.1;   // Beta shape parameters
    double b = 1.0;
    double mu = 2.0;  // NormalShift mean; p-values are two-sided

    // Accepts "beta:a,b" or "normal:mu".
    static MixtureAlternative parse(const std::string& text);
};

// n p-values with each one independently a signal with probability 1-eta,
// split into k contiguous, nearly equal partitions.
std::vector<SimulatedPartition> simulate_mixture_values(std::int64_t n, double eta,
                                                        const MixtureAlternative& alt, int k,
                                                        std::uint64_t seed);

std::string simulate_mixture_files(std::int64_t n, double eta, const MixtureAlternative& alt,
                                   int k, std::uint64_t seed, const std::string& out_dir);

// Partitions a z-score study the way the 200-machine gene example lays it
// out: order by the left-tail p-value, peel off the lowest and highest 1%
// into three blocks each, shuffle the rest into 200 bins, and attach the
// extreme blocks to partitions 1-3 and 198-200.
std::vector<PValuePartition> prostate_partitions(std::span<const double> z, std::uint64_t seed,
                                                 PValueKind kind);

std::string prostate_partition_files(const std::string& zfile, std::uint64_t seed,
                                     const std::string& out_dir, PValueKind kind);

// Reads one z-score per line (same format as partition files).
std::vector<double> read_z_file(const std::string& path);

}  // namespace lpfdr
