#include "lpfdr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "lpfdr/format.hpp"
#include "lpfdr/kahan.hpp"

namespace lpfdr {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    return out;
}

std::vector<double> mat_vec(const LMatrix& l, const std::vector<double>& v) {
    std::vector<double> out(l.row_ids.size(), 0.0);
    for (size_t i = 0; i < l.row_ids.size(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < l.cols; ++j) acc += l.at(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

// Largest-magnitude component positive; ties break toward the lowest index.
void fix_sign(std::vector<double>& v) {
    size_t arg = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
        for (double& x : v) x = -x;
    }
}

struct SvgFrame {
    double xmin, xmax, ymin, ymax;
    static constexpr int width = 640;
    static constexpr int height = 440;
    static constexpr int margin = 50;

    double px(double x) const {
        return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
    }
    double py(double y) const {
        return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
    }
};

std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void svg_open(std::ofstream& out, const char* title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << SvgFrame::width
        << "\" height=\"" << SvgFrame::height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << SvgFrame::width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
}

void svg_axes(std::ofstream& out, const SvgFrame& f) {
    const int m = SvgFrame::margin;
    out << "<line x1=\"" << m << "\" y1=\"" << SvgFrame::height - m << "\" x2=\""
        << SvgFrame::width - m << "\" y2=\"" << SvgFrame::height - m
        << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\""
        << SvgFrame::height - m << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << m << "\" y=\"" << SvgFrame::height - m + 16
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << format_double(f.xmin)
        << "</text>\n"
        << "<text x=\"" << SvgFrame::width - m << "\" y=\"" << SvgFrame::height - m + 16
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_double(f.xmax) << "</text>\n"
        << "<text x=\"" << m - 4 << "\" y=\"" << SvgFrame::height - m
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_double(f.ymin) << "</text>\n"
        << "<text x=\"" << m - 4 << "\" y=\"" << m
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
        << format_double(f.ymax) << "</text>\n";
}

SvgFrame frame_for(double xmin, double xmax, double ymin, double ymax) {
    auto widen = [](double lo, double hi) {
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double pad = 0.05 * (hi - lo);
        return std::pair<double, double>(lo - pad, hi + pad);
    };
    const auto [x0, x1] = widen(xmin, xmax);
    const auto [y0, y1] = widen(ymin, ymax);
    return SvgFrame{x0, x1, y0, y1};
}

}  // namespace

LMatrix build_l_matrix(const std::vector<LPSummary>& summaries) {
    if (summaries.empty()) {
        throw std::invalid_argument("build_l_matrix: no summaries");
    }
    std::vector<size_t> order(summaries.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&summaries](size_t a, size_t b) {
        return summaries[a].id < summaries[b].id;
    });
    const int m = summaries[order[0]].lp_unif.order();
    LMatrix l;
    l.cols = m;
    l.entries.reserve(summaries.size() * m);
    for (size_t k : order) {
        const LPSummary& s = summaries[k];
        if (s.lp_unif.order() != m || s.lp_unif.basis.kind != LPBasis::Kind::Uniform) {
            throw std::invalid_argument("build_l_matrix: summary '" + s.id +
                                        "' has a mismatched uniform-basis block");
        }
        if (!l.row_ids.empty() && l.row_ids.back() == s.id) {
            throw std::invalid_argument("build_l_matrix: duplicate partition id '" + s.id + "'");
        }
        l.row_ids.push_back(s.id);
        l.entries.insert(l.entries.end(), s.lp_unif.values.begin(), s.lp_unif.values.end());
    }
    return l;
}

void jacobi_eigen_symmetric(std::vector<double> a, int n, std::vector<double>& eigvals,
                            std::vector<double>& eigvecs) {
    if (n < 1 || static_cast<int>(a.size()) != n * n) {
        throw std::invalid_argument("jacobi_eigen_symmetric: bad dimensions");
    }
    eigvecs.assign(n * n, 0.0);
    for (int i = 0; i < n; ++i) eigvecs[i * n + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        }
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = eigvecs[k * n + p];
                    const double vkq = eigvecs[k * n + q];
                    eigvecs[k * n + p] = c * vkp - s * vkq;
                    eigvecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    // Sort descending, permuting the eigenvector columns alongside.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&a, n](int x, int y) { return a[x * n + x] > a[y * n + y]; });
    eigvals.resize(n);
    std::vector<double> vecs(n * n);
    for (int k = 0; k < n; ++k) {
        eigvals[k] = a[order[k] * n + order[k]];
        for (int i = 0; i < n; ++i) vecs[i * n + k] = eigvecs[i * n + order[k]];
    }
    eigvecs.swap(vecs);
}

SvdTop2 svd_top2(const LMatrix& l) {
    const int m = l.cols;
    const size_t rows = l.row_ids.size();
    if (m < 1 || rows == 0) {
        throw std::invalid_argument("svd_top2: empty matrix");
    }
    std::vector<double> gram(m * m, 0.0);
    for (size_t r = 0; r < rows; ++r) {
        for (int i = 0; i < m; ++i) {
            for (int j = i; j < m; ++j) gram[i * m + j] += l.at(r, i) * l.at(r, j);
        }
    }
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < i; ++j) gram[i * m + j] = gram[j * m + i];
    }
    std::vector<double> eigvals, eigvecs;
    jacobi_eigen_symmetric(std::move(gram), m, eigvals, eigvecs);

    SvdTop2 out;
    out.singular_values.resize(m);
    for (int k = 0; k < m; ++k) out.singular_values[k] = std::sqrt(std::max(0.0, eigvals[k]));
    out.lambda1 = out.singular_values[0];
    out.lambda2 = m > 1 ? out.singular_values[1] : 0.0;

    auto column = [&eigvecs, m](int k) {
        std::vector<double> v(m);
        for (int i = 0; i < m; ++i) v[i] = eigvecs[i * m + k];
        return v;
    };
    out.v1 = column(0);
    fix_sign(out.v1);
    out.v2 = m > 1 ? column(1) : std::vector<double>(m, 0.0);
    if (m > 1) fix_sign(out.v2);

    const double tiny = 1e-14 * std::max(out.lambda1, 1.0);
    auto left = [&](const std::vector<double>& v, double lambda) {
        std::vector<double> u = mat_vec(l, v);
        if (lambda > tiny) {
            for (double& x : u) x /= lambda;
        } else {
            std::fill(u.begin(), u.end(), 0.0);
        }
        return u;
    };
    out.u1 = left(out.v1, out.lambda1);
    out.u2 = left(out.v2, out.lambda2);
    return out;
}

std::vector<InfoMapPoint> information_map(const std::vector<LPSummary>& summaries) {
    const LMatrix l = build_l_matrix(summaries);
    const SvdTop2 svd = svd_top2(l);
    const std::vector<double> x = mat_vec(l, svd.v1);
    const std::vector<double> y =
        svd.lambda2 > 0.0 ? mat_vec(l, svd.v2) : std::vector<double>(l.row_ids.size(), 0.0);
    std::vector<InfoMapPoint> out(l.row_ids.size());
    for (size_t i = 0; i < l.row_ids.size(); ++i) {
        out[i] = InfoMapPoint{l.row_ids[i], x[i], y[i]};
    }
    return out;
}

std::vector<HChartPoint> h_chart(const std::vector<LPSummary>& summaries) {
    std::vector<HChartPoint> out;
    out.reserve(summaries.size());
    for (const auto& s : summaries) out.push_back(HChartPoint{s.id, s.h_statistic});
    std::sort(out.begin(), out.end(),
              [](const HChartPoint& a, const HChartPoint& b) { return a.id < b.id; });
    return out;
}

double h_null_quantile(std::int64_t n, int m, double prob, int num_sims, std::uint64_t seed) {
    if (n < 1 || num_sims < 1 || !(prob > 0.0 && prob < 1.0)) {
        throw std::invalid_argument("h_null_quantile: bad arguments");
    }
    std::mt19937_64 rng(seed);
    std::vector<double> sims(num_sims);
    std::vector<double> leg(m);
    std::vector<KahanAccumulator> acc(m);
    for (int s = 0; s < num_sims; ++s) {
        for (auto& a : acc) a = KahanAccumulator{};
        for (std::int64_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
            legendre_all(m, u, leg);
            for (int j = 0; j < m; ++j) acc[j].add(leg[j]);
        }
        double h = 0.0;
        for (int j = 0; j < m; ++j) {
            const double c = acc[j].total() / static_cast<double>(n);
            h += c * c;
        }
        sims[s] = h;
    }
    std::sort(sims.begin(), sims.end());
    const int idx = std::min<int>(num_sims - 1,
                                  static_cast<int>(std::ceil(prob * num_sims)) - 1);
    return sims[std::max(idx, 0)];
}

void write_hchart_csv(const std::vector<HChartPoint>& points, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "id,h\n";
    for (const auto& p : points) out << p.id << ',' << format_double(p.h) << '\n';
    if (!out.flush()) {
        throw std::runtime_error("write failed: " + path);
    }
}

void write_infomap_csv(const std::vector<InfoMapPoint>& points, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "id,x,y\n";
    for (const auto& p : points) {
        out << p.id << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
    }
    if (!out.flush()) {
        throw std::runtime_error("write failed: " + path);
    }
}

void write_hchart_svg(const std::vector<HChartPoint>& points, double reference,
                      const std::string& path) {
    if (points.empty()) {
        throw std::invalid_argument("write_hchart_svg: no points");
    }
    double hmax = reference;
    for (const auto& p : points) hmax = std::max(hmax, p.h);
    const SvgFrame f = frame_for(1.0, static_cast<double>(points.size()), 0.0, hmax);
    std::ofstream out = open_out(path);
    svg_open(out, "H-statistic by partition");
    svg_axes(out, f);
    if (reference > 0.0) {
        out << "<line x1=\"" << svg_num(f.px(f.xmin)) << "\" y1=\"" << svg_num(f.py(reference))
            << "\" x2=\"" << svg_num(f.px(f.xmax)) << "\" y2=\"" << svg_num(f.py(reference))
            << "\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n";
    }
    for (size_t i = 0; i < points.size(); ++i) {
        out << "<circle cx=\"" << svg_num(f.px(static_cast<double>(i + 1))) << "\" cy=\""
            << svg_num(f.py(points[i].h)) << "\" r=\"3\" fill=\"steelblue\">"
            << "<title>" << points[i].id << "</title></circle>\n";
    }
    out << "</svg>\n";
    if (!out.flush()) {
        throw std::runtime_error("write failed: " + path);
    }
}

void write_infomap_svg(const std::vector<InfoMapPoint>& points, const std::string& path) {
    if (points.empty()) {
        throw std::invalid_argument("write_infomap_svg: no points");
    }
    double xmin = points[0].x, xmax = points[0].x, ymin = points[0].y, ymax = points[0].y;
    for (const auto& p : points) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const SvgFrame f = frame_for(xmin, xmax, ymin, ymax);
    std::ofstream out = open_out(path);
    svg_open(out, "Information map (top-2 singular coordinates)");
    svg_axes(out, f);
    for (const auto& p : points) {
        out << "<circle cx=\"" << svg_num(f.px(p.x)) << "\" cy=\"" << svg_num(f.py(p.y))
            << "\" r=\"3\" fill=\"darkorange\"><title>" << p.id << "</title></circle>\n";
    }
    out << "</svg>\n";
    if (!out.flush()) {
        throw std::runtime_error("write failed: " + path);
    }
}

}  // namespace lpfdr
