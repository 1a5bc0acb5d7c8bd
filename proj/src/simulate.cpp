#include "lpfdr/simulate.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "lpfdr/format.hpp"
#include "lpfdr/special_math.hpp"

namespace lpfdr {

namespace {

// All simulated randomness flows through this: raw 64-bit draws mapped to
// (0,1) by fixed bit arithmetic, then through our own quantile functions.
// std::mt19937_64 output is specified exactly, so results are portable.
class UnitRng {
  public:
    explicit UnitRng(std::uint64_t seed) : gen_(seed) {}
    double next() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53; }
    std::uint64_t next_index(std::uint64_t bound) { return gen_() % bound; }

  private:
    std::mt19937_64 gen_;
};

std::string partition_id(int index_one_based) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "partition_%03d", index_one_based);
    return buf;
}

void fill_from_z(PValuePartition& p, const std::vector<double>& z, PValueKind kind) {
    p.values.reserve(z.size());
    p.z_signs.reserve(z.size());
    for (double zi : z) {
        p.values.push_back(clamp_unit(p_value_from_z(zi, kind)));
        p.z_signs.push_back(zi < 0.0 ? -1 : (zi > 0.0 ? 1 : 0));
    }
}

void write_value_file(const std::string& path, const std::vector<double>& values) {
    std::string body;
    body.reserve(values.size() * 20);
    for (double v : values) {
        body += format_double(v);
        body += '\n';
    }
    atomic_write_file(path, body);
}

std::vector<std::size_t> block_sizes(std::size_t total, std::size_t blocks) {
    std::vector<std::size_t> sizes(blocks, total / blocks);
    for (std::size_t i = 0; i < total % blocks; ++i) ++sizes[i];
    return sizes;
}

}  // namespace

std::vector<SimulatedPartition> simulate_example2_values(std::uint64_t seed, PValueKind kind) {
    if (kind == PValueKind::Raw) {
        throw std::invalid_argument("example2 generates z-scores; pick a z-based kind");
    }
    constexpr int kPartitions = 200;
    constexpr int kNulls = 49;
    constexpr int kSignals = 25;
    UnitRng rng(seed);
    std::vector<SimulatedPartition> out(kPartitions);
    for (int p = 0; p < kPartitions; ++p) {
        SimulatedPartition& sp = out[p];
        sp.partition.id = partition_id(p + 1);
        sp.z.reserve(kNulls + kSignals);
        for (int i = 0; i < kNulls; ++i) {
            sp.z.push_back(std_normal_quantile(rng.next()));
            sp.is_signal.push_back(0);
        }
        if (p < 4) {
            for (int i = 0; i < kSignals; ++i) {
                sp.z.push_back(2.0 + std_normal_quantile(rng.next()));
                sp.is_signal.push_back(1);
            }
        } else if (p < 8) {
            for (int i = 0; i < kSignals; ++i) {
                sp.z.push_back(2.0 + 2.0 * rng.next());
                sp.is_signal.push_back(1);
            }
        }
        fill_from_z(sp.partition, sp.z, kind);
    }
    return out;
}

std::string simulate_example2_files(std::uint64_t seed, const std::string& out_dir,
                                    PValueKind kind) {
    const auto parts = simulate_example2_values(seed, kind);
    std::filesystem::create_directories(out_dir);
    std::vector<PartitionSource> sources;
    for (const auto& sp : parts) {
        PartitionSource s;
        s.path = (std::filesystem::path(out_dir) / (sp.partition.id + ".txt")).string();
        s.kind = kind;
        s.id = sp.partition.id;
        write_value_file(s.path, sp.z);
        sources.push_back(std::move(s));
    }
    const std::string manifest = (std::filesystem::path(out_dir) / "manifest.json").string();
    write_manifest(sources, manifest);
    return manifest;
}

MixtureAlternative MixtureAlternative::parse(const std::string& text) {
    MixtureAlternative alt;
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument("alternative '" + text + "': expected beta:a,b or normal:mu");
    }
    const std::string head = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    const auto parse_num = [&](const std::string& s) {
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
            throw std::invalid_argument("alternative '" + text + "': bad number '" + s + "'");
        }
        return v;
    };
    if (head == "beta") {
        const auto comma = rest.find(',');
        if (comma == std::string::npos) {
            throw std::invalid_argument("alternative '" + text + "': beta needs two parameters");
        }
        alt.kind = Kind::Beta;
        alt.a = parse_num(rest.substr(0, comma));
        alt.b = parse_num(rest.substr(comma + 1));
        if (alt.a <= 0.0 || alt.b <= 0.0) {
            throw std::invalid_argument("alternative '" + text + "': shapes must be positive");
        }
    } else if (head == "normal") {
        alt.kind = Kind::NormalShift;
        alt.mu = parse_num(rest);
    } else {
        throw std::invalid_argument("alternative '" + text + "': unknown family '" + head + "'");
    }
    return alt;
}

std::vector<SimulatedPartition> simulate_mixture_values(std::int64_t n, double eta,
                                                        const MixtureAlternative& alt, int k,
                                                        std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("mixture: n must be positive");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("mixture: eta must be in [0,1]");
    if (k < 1 || static_cast<std::int64_t>(k) > n) {
        throw std::invalid_argument("mixture: need 1 <= k <= n");
    }
    const bool z_scale = alt.kind == MixtureAlternative::Kind::NormalShift;
    UnitRng rng(seed);

    std::vector<double> values(static_cast<std::size_t>(n));
    std::vector<double> zs;
    std::vector<std::uint8_t> signal(static_cast<std::size_t>(n));
    if (z_scale) zs.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const bool is_sig = rng.next() < 1.0 - eta;
        signal[i] = is_sig ? 1 : 0;
        const double u = rng.next();
        if (z_scale) {
            const double z = (is_sig ? alt.mu : 0.0) + std_normal_quantile(u);
            zs[i] = z;
            values[i] = clamp_unit(p_value_from_z(z, PValueKind::TwoSidedFromZ));
        } else {
            values[i] = clamp_unit(is_sig ? beta_quantile(u, BetaParams{alt.a, alt.b}) : u);
        }
    }

    const auto sizes = block_sizes(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
    std::vector<SimulatedPartition> out(static_cast<std::size_t>(k));
    std::size_t pos = 0;
    for (int p = 0; p < k; ++p) {
        SimulatedPartition& sp = out[p];
        sp.partition.id = partition_id(p + 1);
        for (std::size_t j = 0; j < sizes[p]; ++j, ++pos) {
            sp.partition.values.push_back(values[pos]);
            sp.is_signal.push_back(signal[pos]);
            if (z_scale) {
                sp.z.push_back(zs[pos]);
                sp.partition.z_signs.push_back(zs[pos] < 0.0 ? -1 : (zs[pos] > 0.0 ? 1 : 0));
            }
        }
    }
    return out;
}

std::string simulate_mixture_files(std::int64_t n, double eta, const MixtureAlternative& alt,
                                   int k, std::uint64_t seed, const std::string& out_dir) {
    const auto parts = simulate_mixture_values(n, eta, alt, k, seed);
    const bool z_scale = alt.kind == MixtureAlternative::Kind::NormalShift;
    std::filesystem::create_directories(out_dir);
    std::vector<PartitionSource> sources;
    std::string truth = "partition,index,is_signal\n";
    for (const auto& sp : parts) {
        PartitionSource s;
        s.path = (std::filesystem::path(out_dir) / (sp.partition.id + ".txt")).string();
        s.kind = z_scale ? PValueKind::TwoSidedFromZ : PValueKind::Raw;
        s.id = sp.partition.id;
        write_value_file(s.path, z_scale ? sp.z : sp.partition.values);
        sources.push_back(std::move(s));
        for (std::size_t j = 0; j < sp.is_signal.size(); ++j) {
            truth += sp.partition.id;
            truth += ',';
            truth += std::to_string(j);
            truth += ',';
            truth += sp.is_signal[j] ? '1' : '0';
            truth += '\n';
        }
    }
    atomic_write_file((std::filesystem::path(out_dir) / "truth.csv").string(), truth);
    const std::string manifest = (std::filesystem::path(out_dir) / "manifest.json").string();
    write_manifest(sources, manifest);
    return manifest;
}

std::vector<double> read_z_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open z-score file '" + path + "'");
    }
    std::vector<double> z;
    std::string line;
    for (long line_no = 1; std::getline(in, line); ++line_no) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || errno == ERANGE || !std::isfinite(v)) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": cannot parse value '" + line + "'");
        }
        z.push_back(v);
    }
    if (z.empty()) {
        throw std::runtime_error("z-score file '" + path + "' contains no values");
    }
    return z;
}

namespace {

constexpr int kProstatePartitions = 200;
constexpr int kExtremeBlocks = 3;

// Per-partition z-score groups for the 200-machine layout. The lowest and
// highest 1% of the study (by z, equivalently by left-tail p) split into
// three blocks each; the bulk shuffles into 200 round-robin bins. Blocks of
// small z land on partitions 1-3, blocks of large z on partitions 198-200.
std::vector<std::vector<double>> prostate_layout(std::span<const double> z, std::uint64_t seed) {
    const std::size_t n = z.size();
    const std::size_t n_ext = static_cast<std::size_t>(0.01 * static_cast<double>(n));
    if (n_ext < kExtremeBlocks || n < 2 * n_ext + kProstatePartitions) {
        throw std::invalid_argument("extreme-block layout needs a larger study (got " +
                                    std::to_string(n) + " z-scores)");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });

    std::vector<std::vector<std::size_t>> assigned(kProstatePartitions);
    const auto ext_sizes = block_sizes(n_ext, kExtremeBlocks);
    std::size_t lo = 0;
    std::size_t hi = n;
    for (int b = 0; b < kExtremeBlocks; ++b) {
        for (std::size_t j = 0; j < ext_sizes[b]; ++j) assigned[b].push_back(order[lo++]);
        for (std::size_t j = 0; j < ext_sizes[b]; ++j) {
            assigned[kProstatePartitions - kExtremeBlocks + b].push_back(order[--hi]);
        }
    }

    std::vector<std::size_t> bulk(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                  order.begin() + static_cast<std::ptrdiff_t>(hi));
    UnitRng rng(seed);
    for (std::size_t i = bulk.size(); i > 1; --i) {
        std::swap(bulk[i - 1], bulk[rng.next_index(i)]);
    }
    for (std::size_t i = 0; i < bulk.size(); ++i) {
        assigned[i % kProstatePartitions].push_back(bulk[i]);
    }

    std::vector<std::vector<double>> groups(kProstatePartitions);
    for (int p = 0; p < kProstatePartitions; ++p) {
        groups[p].reserve(assigned[p].size());
        for (std::size_t idx : assigned[p]) groups[p].push_back(z[idx]);
    }
    return groups;
}

}  // namespace

std::vector<PValuePartition> prostate_partitions(std::span<const double> z, std::uint64_t seed,
                                                 PValueKind kind) {
    const auto groups = prostate_layout(z, seed);
    std::vector<PValuePartition> out(groups.size());
    for (std::size_t p = 0; p < groups.size(); ++p) {
        out[p].id = partition_id(static_cast<int>(p) + 1);
        fill_from_z(out[p], groups[p], kind);
    }
    return out;
}

std::string prostate_partition_files(const std::string& zfile, std::uint64_t seed,
                                     const std::string& out_dir, PValueKind kind) {
    const auto z = read_z_file(zfile);
    const auto groups = prostate_layout(z, seed);
    std::filesystem::create_directories(out_dir);
    std::vector<PartitionSource> sources;
    for (std::size_t p = 0; p < groups.size(); ++p) {
        PartitionSource s;
        s.id = partition_id(static_cast<int>(p) + 1);
        s.path = (std::filesystem::path(out_dir) / (s.id + ".txt")).string();
        s.kind = kind;
        write_value_file(s.path, groups[p]);
        sources.push_back(std::move(s));
    }
    const std::string manifest = (std::filesystem::path(out_dir) / "manifest.json").string();
    write_manifest(sources, manifest);
    return manifest;
}

}  // namespace lpfdr
