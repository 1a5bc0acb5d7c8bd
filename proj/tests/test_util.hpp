#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpfdr/lp_model.hpp"

namespace testutil {

// Double-exponential quadrature over (0,1); handles integrable endpoint
// singularities. Independent of the library's own quadrature routines.
inline double integrate_unit(const std::function<double(double)>& f) {
    const double pi = 3.14159265358979323846;
    const int half = 700;
    const double h = 9.0 / half;
    double acc = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double t = i * h;
        const double s = 0.5 * pi * std::sinh(t);
        // logistic form of 0.5*(1+tanh(s)): keeps full relative precision in u
        // near 0, which singular integrands like u^(g-1) amplify
        const double u = s <= 0.0 ? [&] {
            const double e2s = std::exp(2.0 * s);
            return e2s / (1.0 + e2s);
        }()
                                  : 1.0 / (1.0 + std::exp(-2.0 * s));
        if (u <= 0.0 || u >= 1.0) continue;
        const double w = h * 0.25 * pi * std::cosh(t) / (std::cosh(s) * std::cosh(s));
        if (w < 1e-300) continue;
        acc += w * f(u);
    }
    return acc;
}

// Same uniform-deviate construction the library's simulators use.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double unit() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53; }
    std::uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
};

inline lpfdr::SkewBetaModel make_model(double gamma, double beta,
                                       const std::vector<double>& coeffs,
                                       std::optional<double> eta_override = std::nullopt) {
    lpfdr::BetaParams carrier{gamma, beta};
    lpfdr::LPCoefficients c;
    c.basis = lpfdr::LPBasis::beta(carrier);
    c.values = coeffs;
    return lpfdr::SkewBetaModel::build(carrier, std::move(c), 1000, eta_override);
}

// Unique scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() /
                     ("lpfdr_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline std::string write_lines(const std::string& dir, const std::string& name,
                               const std::vector<std::string>& lines) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path);
    for (const auto& l : lines) out << l << "\n";
    return path;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_lines: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace testutil
