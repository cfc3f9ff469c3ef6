#include "svg.hpp"

#include <cmath>
#include <cstdio>

namespace persistlens::svg {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    std::string s(buf);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string escape(std::string_view text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

Canvas::Canvas(double width, double height) : width_(width), height_(height) {
    rect(0, 0, width, height, "#ffffff");
}

void Canvas::rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke) {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
             "\" fill=\"" + std::string(fill) + "\" stroke=\"" + std::string(stroke) + "\"/>\n";
}

void Canvas::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
                  std::string_view dash) {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
             "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(width) + "\"";
    if (!dash.empty()) body_ += " stroke-dasharray=\"" + std::string(dash) + "\"";
    body_ += "/>\n";
}

void Canvas::circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke) {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" +
             std::string(fill) + "\" stroke=\"" + std::string(stroke) + "\"/>\n";
}

void Canvas::polygon(const std::vector<std::pair<double, double>>& points, std::string_view fill) {
    body_ += "<polygon points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i) body_ += ' ';
        body_ += num(points[i].first) + "," + num(points[i].second);
    }
    body_ += "\" fill=\"" + std::string(fill) + "\"/>\n";
}

void Canvas::text(double x, double y, std::string_view content, double size, std::string_view anchor,
                  double rotate) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
             "\" text-anchor=\"" + std::string(anchor) + "\"";
    if (rotate != 0.0) body_ += " transform=\"rotate(" + num(rotate) + " " + num(x) + " " + num(y) + ")\"";
    body_ += ">" + escape(content) + "</text>\n";
}

std::string Canvas::finish() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" + num(height_) +
           "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) +
           "\" font-family=\"Helvetica, Arial, sans-serif\">\n" + body_ + "</svg>\n";
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    const double step = (frac < 1.5 ? 1.0 : frac < 3.0 ? 2.0 : frac < 7.0 ? 5.0 : 10.0) * mag;
    std::vector<double> out;
    const double first = std::floor(lo / step) * step;
    for (int i = 0; first + i * step <= hi + step * 0.5 && i < 100; ++i) out.push_back(first + i * step);
    if (out.size() < 2) out.push_back(first + step);
    return out;
}

std::string tick_label(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", std::round(v * 1e6) / 1e6);
    std::string s(buf);
    if (s == "-0") s = "0";
    return s;
}

}  // namespace persistlens::svg
