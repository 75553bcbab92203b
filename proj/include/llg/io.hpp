#pragma once

#include "llg/core.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace llg::io {

using json = nlohmann::json; // std::map objects: keys serialize sorted

// 17 significant digits round-trips any double; non-finite values print as nan/inf.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path), cols_(header.size()) {
        if (!out_) throw std::runtime_error("cannot open " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    void row(const std::vector<double>& v) {
        require(v.size() == cols_, "CsvWriter: row width does not match the header");
        for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << fmt17(v[i]);
        out_ << '\n';
    }

    // mixed rows: numbers pre-formatted by the caller
    void raw(const std::vector<std::string>& v) {
        require(v.size() == cols_, "CsvWriter: row width does not match the header");
        for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << v[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t cols_;
};

inline json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

inline json to_json(const Mat3& m) {
    json a = json::array();
    for (int i = 0; i < 3; ++i) a.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
    return a;
}

// json has no NaN; those become null
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << j.dump(2) << '\n';
}

// ---- SVG ---------------------------------------------------------------

struct Polyline {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool dashed = false;
};

struct Panel {
    std::string title;
    std::string xlabel, ylabel;
    std::vector<Polyline> lines;
    bool equal_aspect = false;
};

namespace detail {

inline std::string f4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::string g3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

} // namespace detail

// Panels laid out in one row; NaN points break a polyline.
inline void write_svg(const std::filesystem::path& path, const std::vector<Panel>& panels, double panel_w = 360,
                      double panel_h = 300) {
    using detail::f4;
    const double pad = 46;
    std::ostringstream s;
    const double W = panel_w * panels.size(), H = panel_h;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f4(W) << "\" height=\"" << f4(H) << "\" viewBox=\"0 0 "
      << f4(W) << ' ' << f4(H) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const Panel& P = panels[p];
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (const auto& l : P.lines)
            for (std::size_t i = 0; i < l.x.size(); ++i) {
                if (!std::isfinite(l.x[i]) || !std::isfinite(l.y[i])) continue;
                x0 = std::min(x0, l.x[i]), x1 = std::max(x1, l.x[i]);
                y0 = std::min(y0, l.y[i]), y1 = std::max(y1, l.y[i]);
            }
        if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
        if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
        if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
        const double ox = p * panel_w + pad, oy = 24, w = panel_w - pad - 12, h = panel_h - oy - 36;
        double sx = w / (x1 - x0), sy = h / (y1 - y0);
        if (P.equal_aspect) sx = sy = std::min(sx, sy);
        auto X = [&](double v) { return ox + (v - x0) * sx; };
        auto Y = [&](double v) { return oy + h - (v - y0) * sy; };
        s << "<g>\n<text x=\"" << f4(ox + w / 2) << "\" y=\"14\" text-anchor=\"middle\">" << detail::escape(P.title)
          << "</text>\n";
        s << "<rect x=\"" << f4(ox) << "\" y=\"" << f4(oy) << "\" width=\"" << f4(w) << "\" height=\"" << f4(h)
          << "\" fill=\"none\" stroke=\"#888\"/>\n";
        s << "<text x=\"" << f4(ox) << "\" y=\"" << f4(oy + h + 14) << "\">" << detail::g3(x0)
          << "</text>\n";
        s << "<text x=\"" << f4(ox + w) << "\" y=\"" << f4(oy + h + 14) << "\" text-anchor=\"end\">"
          << detail::g3(x1) << "</text>\n";
        s << "<text x=\"" << f4(ox - 4) << "\" y=\"" << f4(oy + h) << "\" text-anchor=\"end\">"
          << detail::g3(y0) << "</text>\n";
        s << "<text x=\"" << f4(ox - 4) << "\" y=\"" << f4(oy + 10) << "\" text-anchor=\"end\">"
          << detail::g3(y1) << "</text>\n";
        s << "<text x=\"" << f4(ox + w / 2) << "\" y=\"" << f4(oy + h + 28) << "\" text-anchor=\"middle\">"
          << detail::escape(P.xlabel) << "</text>\n";
        s << "<text x=\"" << f4(ox - 34) << "\" y=\"" << f4(oy + h / 2) << "\" transform=\"rotate(-90 " << f4(ox - 34) << ' '
          << f4(oy + h / 2) << ")\" text-anchor=\"middle\">" << detail::escape(P.ylabel) << "</text>\n";
        for (const auto& l : P.lines) {
            std::string pts;
            auto flush = [&]() {
                if (pts.empty()) return;
                s << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"1.2\""
                  << (l.dashed ? " stroke-dasharray=\"4 3\"" : "") << " points=\"" << pts << "\"/>\n";
                pts.clear();
            };
            for (std::size_t i = 0; i < l.x.size(); ++i) {
                if (!std::isfinite(l.x[i]) || !std::isfinite(l.y[i])) {
                    flush();
                    continue;
                }
                pts += f4(X(l.x[i])) + "," + f4(Y(l.y[i])) + " ";
            }
            flush();
        }
        s << "</g>\n";
    }
    s << "</svg>\n";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << s.str();
}

// Oblique projection of a curve on S^2 with the unit sphere's outline and equator.
inline Panel sphere_panel(const std::vector<Vec3>& curve, const std::string& title, double yaw = 0.6, double pitch = 0.35) {
    const double cy = std::cos(yaw), sy = std::sin(yaw), cp = std::cos(pitch), sp = std::sin(pitch);
    auto proj = [&](const Vec3& v) {
        const double x = cy * v[0] - sy * v[1];
        const double depth = sy * v[0] + cy * v[1];
        return std::pair<double, double>{x, cp * v[2] - sp * depth};
    };
    Panel P;
    P.title = title;
    P.equal_aspect = true;
    Polyline outline, equator, c;
    outline.color = equator.color = "#bbbbbb";
    equator.dashed = true;
    for (int i = 0; i <= 180; ++i) {
        const double a = 2.0 * pi * i / 180;
        outline.x.push_back(std::cos(a)), outline.y.push_back(std::sin(a));
        auto [ex, ey] = proj(Vec3(std::cos(a), std::sin(a), 0.0));
        equator.x.push_back(ex), equator.y.push_back(ey);
    }
    for (const auto& v : curve) {
        auto [px, py] = proj(v);
        c.x.push_back(px), c.y.push_back(py);
    }
    c.color = "#d62728";
    P.lines = {outline, equator, c};
    return P;
}

} // namespace llg::io
