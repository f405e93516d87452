#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cardio/common.hpp"

namespace cardio::svg {

// Tiny deterministic SVG writer: fixed two-decimal coordinates, no timestamps.
class Svg {
public:
    Svg(double width, double height) : w_(width), h_(height) {}

    static std::string num(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", v);
        return buf;
    }

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "", double stroke_width = 0.0) {
        body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
              << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"";
        if (!stroke.empty())
            body_ << " stroke=\"" << stroke << "\" stroke-width=\"" << num(stroke_width) << "\"";
        body_ << "/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0) {
        body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
              << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
              << num(width) << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double width = 1.0) {
        body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
              << num(width) << "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) body_ << ' ';
            body_ << num(pts[i].first) << ',' << num(pts[i].second);
        }
        body_ << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 10.0,
              const std::string& anchor = "start", const std::string& fill = "#333333") {
        body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
              << "\" font-family=\"monospace\" text-anchor=\"" << anchor << "\" fill=\"" << fill
              << "\">" << escape(s) << "</text>\n";
    }

    std::string str() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w_) << "\" height=\""
           << num(h_) << "\" viewBox=\"0 0 " << num(w_) << ' ' << num(h_) << "\">\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

    void save(const std::filesystem::path& file) const {
        std::ofstream os(file, std::ios::binary);
        if (!os) throw IoError("cannot write " + file.string());
        os << str();
        if (!os) throw IoError("write failed: " + file.string());
    }

private:
    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '&')
                out += "&amp;";
            else if (c == '<')
                out += "&lt;";
            else if (c == '>')
                out += "&gt;";
            else
                out += c;
        }
        return out;
    }

    double w_, h_;
    std::ostringstream body_;
};

inline std::string rgb(int r, int g, int b) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", std::clamp(r, 0, 255), std::clamp(g, 0, 255),
                  std::clamp(b, 0, 255));
    return buf;
}

// Diverging blue-white-red map for probabilities in [0, 1].
inline std::string prob_color(double p) {
    p = std::clamp(p, 0.0, 1.0);
    const double t = 2.0 * p - 1.0;  // -1 .. 1
    if (t < 0) {
        const double a = -t;
        return rgb(static_cast<int>(255 - 155 * a), static_cast<int>(255 - 115 * a), 255);
    }
    return rgb(255, static_cast<int>(255 - 155 * t), static_cast<int>(255 - 195 * t));
}

}  // namespace cardio::svg
