#include "lpfdr/io.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lpfdr/special_math.hpp"

namespace lpfdr {

namespace {

constexpr double kClampLo = 1e-15;

bool is_blank(const std::string& s) {
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

}  // namespace

const char* kind_name(PValueKind k) {
    switch (k) {
        case PValueKind::Raw: return "raw";
        case PValueKind::TwoSidedFromZ: return "two-sided-from-z";
        case PValueKind::LeftFromZ: return "left-from-z";
        case PValueKind::RightFromZ: return "right-from-z";
    }
    throw std::invalid_argument("kind_name: unknown kind");
}

PValueKind kind_from_name(const std::string& name) {
    if (name == "raw") return PValueKind::Raw;
    if (name == "two-sided-from-z") return PValueKind::TwoSidedFromZ;
    if (name == "left-from-z") return PValueKind::LeftFromZ;
    if (name == "right-from-z") return PValueKind::RightFromZ;
    throw std::invalid_argument("unknown p-value kind '" + name + "'");
}

double clamp_unit(double u) {
    if (u < kClampLo) return kClampLo;
    if (u > 1.0 - kClampLo) return 1.0 - kClampLo;
    return u;
}

double p_value_from_z(double z, PValueKind kind) {
    switch (kind) {
        case PValueKind::TwoSidedFromZ: return 2.0 * std_normal_cdf(-std::fabs(z));
        case PValueKind::LeftFromZ: return std_normal_cdf(z);
        case PValueKind::RightFromZ: return std_normal_cdf(-z);
        case PValueKind::Raw: break;
    }
    throw std::invalid_argument("p_value_from_z: kind has no z transform");
}

std::string file_stem(const std::string& path) {
    return std::filesystem::path(path).stem().string();
}

PValuePartition ingest_partition(const std::string& path, PValueKind kind,
                                 const std::string& id) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open partition file '" + path + "'");
    }
    PValuePartition p;
    p.id = id.empty() ? file_stem(path) : id;
    p.origin = path;
    std::string line;
    for (long line_no = 1; std::getline(in, line); ++line_no) {
        if (is_blank(line) || line[line.find_first_not_of(" \t")] == '#') continue;
        errno = 0;
        char* end = nullptr;
        const double v = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || errno == ERANGE || !std::isfinite(v)) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": cannot parse value '" + line + "'");
        }
        while (*end != '\0' && std::isspace(static_cast<unsigned char>(*end))) ++end;
        if (*end != '\0' && *end != '\r') {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": trailing characters after value in '" + line + "'");
        }
        double u;
        if (kind == PValueKind::Raw) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": raw p-value outside [0,1]: " + std::to_string(v));
            }
            u = v;
        } else {
            u = p_value_from_z(v, kind);
        }
        p.values.push_back(clamp_unit(u));
        if (kind != PValueKind::Raw) {
            p.z_signs.push_back(v < 0.0 ? -1 : (v > 0.0 ? 1 : 0));
        }
    }
    if (p.values.empty()) {
        throw std::runtime_error("partition file '" + path + "' contains no values");
    }
    return p;
}

std::vector<PartitionSource> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open manifest '" + path + "'");
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("manifest '" + path + "': " + e.what());
    }
    if (!doc.is_array()) {
        throw std::runtime_error("manifest '" + path + "': expected a JSON array");
    }
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    std::vector<PartitionSource> out;
    for (const auto& entry : doc) {
        PartitionSource s;
        std::filesystem::path file(entry.at("path").get<std::string>());
        if (file.is_relative()) file = base / file;
        s.path = file.string();
        s.kind = kind_from_name(entry.value("kind", std::string("raw")));
        s.id = entry.value("id", file_stem(s.path));
        out.push_back(std::move(s));
    }
    if (out.empty()) {
        throw std::runtime_error("manifest '" + path + "' lists no partitions");
    }
    return out;
}

void write_manifest(const std::vector<PartitionSource>& sources, const std::string& path) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    for (const auto& s : sources) {
        nlohmann::ordered_json e;
        std::filesystem::path file(s.path);
        e["path"] = file.lexically_proximate(base).string();
        e["kind"] = kind_name(s.kind);
        doc.push_back(std::move(e));
    }
    atomic_write_file(path, doc.dump(2) + "\n");
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open '" + tmp + "' for writing");
        }
        out << content;
        if (!out.flush()) {
            std::remove(tmp.c_str());
            throw std::runtime_error("write failed: " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("rename failed: " + tmp + " -> " + path + " (" +
                                 std::strerror(errno) + ")");
    }
}

}  // namespace lpfdr
