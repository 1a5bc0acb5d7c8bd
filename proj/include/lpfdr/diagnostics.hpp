#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpfdr/partition_engine.hpp"

namespace lpfdr {

// K x m matrix of uniform-basis LP coefficients, one row per partition in
// ascending-id order.
struct LMatrix {
    std::vector<std::string> row_ids;
    int cols = 0;
    std::vector<double> entries;  // row-major

    double at(size_t row, int col) const { return entries[row * cols + col]; }
};

LMatrix build_l_matrix(const std::vector<LPSummary>& summaries);

// Top-2 singular structure of L; singular_values holds the full spectrum in
// descending order (sqrt of the Gram eigenvalues). Right singular vectors are
// signed so their largest-magnitude component is positive; left vectors
// follow as L v / lambda (zero when lambda vanishes).
struct SvdTop2 {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::vector<double> u1, u2;  // length K
    std::vector<double> v1, v2;  // length m
    std::vector<double> singular_values;
};

SvdTop2 svd_top2(const LMatrix& l);

// Partition coordinates (lambda1 u_i1, lambda2 u_i2) = ((L v1)_i, (L v2)_i).
struct InfoMapPoint {
    std::string id;
    double x = 0.0;
    double y = 0.0;
};

std::vector<InfoMapPoint> information_map(const std::vector<LPSummary>& summaries);

struct HChartPoint {
    std::string id;
    double h = 0.0;
};

// Per-partition H statistics in ascending-id order.
std::vector<HChartPoint> h_chart(const std::vector<LPSummary>& summaries);

// Monte-Carlo estimate of the prob-quantile of H under the uniform null for a
// partition of size n, used as the H-chart reference line.
double h_null_quantile(std::int64_t n, int m, double prob, int num_sims, std::uint64_t seed);

// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues descend; eigvecs is column-major (eigvecs[i*n+k] = component i
// of eigenvector k).
void jacobi_eigen_symmetric(std::vector<double> a, int n, std::vector<double>& eigvals,
                            std::vector<double>& eigvecs);

void write_hchart_csv(const std::vector<HChartPoint>& points, const std::string& path);
void write_infomap_csv(const std::vector<InfoMapPoint>& points, const std::string& path);

// Self-contained SVG scatter renderings of the two charts. The H-chart draws
// a dashed reference line at `reference` when it is positive.
void write_hchart_svg(const std::vector<HChartPoint>& points, double reference,
                      const std::string& path);
void write_infomap_svg(const std::vector<InfoMapPoint>& points, const std::string& path);

}  // namespace lpfdr
