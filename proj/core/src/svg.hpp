#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace persistlens::svg {

// Minimal SVG writer. Coordinates are printed with two decimals so output is
// byte-stable across runs.
class Canvas {
public:
    Canvas(double width, double height);

    void rect(double x, double y, double w, double h, std::string_view fill,
              std::string_view stroke = "none");
    void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
              std::string_view dash = {});
    void circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke = "none");
    void polygon(const std::vector<std::pair<double, double>>& points, std::string_view fill);
    // anchor: start | middle | end
    void text(double x, double y, std::string_view content, double size = 12.0,
              std::string_view anchor = "middle", double rotate = 0.0);

    std::string finish() const;

private:
    double width_;
    double height_;
    std::string body_;
};

std::string num(double v);
std::string escape(std::string_view text);

// Roughly `target` evenly spaced round tick values covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 5);
std::string tick_label(double v);

}  // namespace persistlens::svg
