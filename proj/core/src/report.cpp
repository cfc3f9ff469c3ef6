#include "persistlens/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "json.hpp"
#include "persistlens/error.hpp"
#include "persistlens/fileio.hpp"
#include "svg.hpp"

namespace persistlens {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

const char* color(std::size_t i) { return kPalette[i % (sizeof kPalette / sizeof kPalette[0])]; }

// Maps data coordinates onto a plot rectangle.
struct Frame {
    double left, top, width, height;
    double xmin, xmax, ymin, ymax;

    double sx(double v) const { return left + (v - xmin) / (xmax - xmin) * width; }
    double sy(double v) const { return top + height - (v - ymin) / (ymax - ymin) * height; }
};

std::pair<double, double> padded_range(double lo, double hi) {
    if (!(hi > lo)) return {lo - 1.0, hi + 1.0};
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

void draw_x_axis(svg::Canvas& c, const Frame& f, const std::string& label) {
    c.line(f.left, f.top + f.height, f.left + f.width, f.top + f.height, "#333333");
    for (double t : svg::nice_ticks(f.xmin, f.xmax)) {
        if (t < f.xmin - 1e-12 || t > f.xmax + 1e-12) continue;
        const double x = f.sx(t);
        c.line(x, f.top + f.height, x, f.top + f.height + 5, "#333333");
        c.text(x, f.top + f.height + 18, svg::tick_label(t), 11);
    }
    c.text(f.left + f.width / 2, f.top + f.height + 40, label, 13);
}

void draw_y_axis(svg::Canvas& c, const Frame& f, const std::string& label) {
    c.line(f.left, f.top, f.left, f.top + f.height, "#333333");
    for (double t : svg::nice_ticks(f.ymin, f.ymax)) {
        if (t < f.ymin - 1e-12 || t > f.ymax + 1e-12) continue;
        const double y = f.sy(t);
        c.line(f.left - 5, y, f.left, y, "#333333");
        c.line(f.left, y, f.left + f.width, y, "#e5e5e5");
        c.text(f.left - 8, y + 4, svg::tick_label(t), 11, "end");
    }
    c.text(f.left - 45, f.top + f.height / 2, label, 13, "middle", -90);
}

void draw_marker(svg::Canvas& c, std::size_t group, double x, double y) {
    const char* fill = color(group);
    switch (group % 3) {
        case 0: c.circle(x, y, 4, fill); break;
        case 1: c.rect(x - 3.5, y - 3.5, 7, 7, fill); break;
        default: c.polygon({{x, y - 4.5}, {x - 4.5, y + 3.5}, {x + 4.5, y + 3.5}}, fill); break;
    }
}

void draw_notes(svg::Canvas& c, const std::vector<std::string>& notes, double x, double y) {
    for (const auto& n : notes) {
        c.text(x, y, n, 11, "start");
        y += 14;
    }
}

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }
double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

std::string_view to_string(PlotKind kind) {
    switch (kind) {
        case PlotKind::bar: return "bar";
        case PlotKind::scatter_fit: return "scatter_fit";
        case PlotKind::coef_interval: return "coef_interval";
        case PlotKind::box: return "box";
    }
    return "bar";
}

const Series* PlotSpec::find(const std::string& name) const {
    for (const auto& s : series) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::optional<LineFit> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ArgumentError("fit_line: x and y differ in length");
    if (x.size() < 2) throw ArgumentError("fit_line: need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return std::nullopt;
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw ArgumentError("box_stats: empty group");
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.q1 = quantile_type7(values, 0.25);
    b.median = quantile_type7(values, 0.5);
    b.q3 = quantile_type7(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo = b.q1 - 1.5 * iqr;
    const double hi = b.q3 + 1.5 * iqr;
    b.whisker_low = b.q1;
    b.whisker_high = b.q3;
    bool low_set = false;
    for (double v : values) {
        if (v < lo || v > hi) {
            b.outliers.push_back(v);
            continue;
        }
        if (!low_set) {
            b.whisker_low = std::min(v, b.q1);
            low_set = true;
        }
        b.whisker_high = std::max(v, b.q3);
    }
    return b;
}

// --- figure 1 ------------------------------------------------------------------

Figure fig_frequency(const CorpusDistribution& dist, std::size_t top_n) {
    if (dist.totals.empty() || dist.grand_total == 0) throw ArgumentError("fig_frequency: empty distribution");
    auto ranked = ranked_totals(dist);
    if (top_n > 0 && ranked.size() > top_n) ranked.resize(top_n);

    PlotSpec spec;
    spec.kind = PlotKind::bar;
    spec.title = "Most frequently used ATT&CK persistence techniques";
    spec.x_label = "Occurrences";
    spec.y_label = "Technique";
    Series count{"count", {}}, share{"share", {}};
    for (const auto& [name, n] : ranked) {
        spec.categories.push_back(name);
        count.values.push_back(static_cast<double>(n));
        share.values.push_back(dist.percentages.at(name));
    }
    spec.series = {count, share};
    spec.annotations["grand_total"] = static_cast<double>(dist.grand_total);

    svg::Canvas c(900, 600);
    c.text(450, 28, spec.title, 16);
    const double max_count = max_of(count.values);
    const auto ticks = svg::nice_ticks(0.0, max_count);
    Frame f{300, 50, 520, 480, 0.0, std::max(ticks.back(), max_count), 0.0, 1.0};
    draw_x_axis(c, f, spec.x_label);
    c.line(f.left, f.top, f.left, f.top + f.height, "#333333");
    const double slot = f.height / static_cast<double>(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const double y = f.top + slot * static_cast<double>(i);
        const double w = f.sx(count.values[i]) - f.left;
        c.rect(f.left, y + slot * 0.15, w, slot * 0.7, color(0));
        c.text(f.left - 8, y + slot * 0.5 + 4, spec.categories[i], 11, "end");
        c.text(f.left + w + 5, y + slot * 0.5 + 4,
               std::to_string(ranked[i].second) + " (" + format_percent(share.values[i]) + ")", 10, "start");
    }
    return {{spec}, c.finish()};
}

// --- figure 2 ------------------------------------------------------------------

Figure fig_scatter_fit(const std::string& title, const std::vector<ScatterPanel>& panels,
                       const std::string& y_label) {
    if (panels.empty()) throw ArgumentError("fig_scatter_fit: no panels");
    constexpr double kPanelWidth = 600;
    svg::Canvas c(kPanelWidth * static_cast<double>(panels.size()), 500);
    c.text(kPanelWidth * static_cast<double>(panels.size()) / 2, 28, title, 16);
    Figure out;
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const auto& panel = panels[p];
        if (panel.x.size() != panel.y.size()) throw ArgumentError("fig_scatter_fit: x and y differ in length");
        if (!panel.group.empty() && panel.group.size() != panel.x.size()) {
            throw ArgumentError("fig_scatter_fit: group labels differ in length from x");
        }
        if (panel.x.size() < 2) throw ArgumentError("fig_scatter_fit: need at least two points");

        PlotSpec spec;
        spec.kind = PlotKind::scatter_fit;
        spec.title = title;
        spec.x_label = panel.x_label;
        spec.y_label = y_label;
        const std::set<std::string> names(panel.group.begin(), panel.group.end());
        spec.categories.assign(names.begin(), names.end());
        if (spec.categories.empty()) spec.categories.push_back("all");
        Series group{"group", {}};
        for (std::size_t i = 0; i < panel.x.size(); ++i) {
            const auto idx = panel.group.empty()
                                 ? 0
                                 : std::find(spec.categories.begin(), spec.categories.end(), panel.group[i]) -
                                       spec.categories.begin();
            group.values.push_back(static_cast<double>(idx));
        }
        spec.series = {{"x", panel.x}, {"y", panel.y}, group};
        const auto fit = fit_line(panel.x, panel.y);
        if (fit) {
            spec.annotations["slope"] = fit->slope;
            spec.annotations["intercept"] = fit->intercept;
        } else {
            spec.notes.push_back("x is constant; fitted line omitted");
        }

        const double offset = kPanelWidth * static_cast<double>(p);
        const auto [x0, x1] = padded_range(min_of(panel.x), max_of(panel.x));
        auto [y0, y1] = padded_range(min_of(panel.y), max_of(panel.y));
        if (fit) {
            for (double xv : {x0, x1}) {
                const double yv = fit->intercept + fit->slope * xv;
                y0 = std::min(y0, yv);
                y1 = std::max(y1, yv);
            }
        }
        Frame f{offset + 80, 60, kPanelWidth - 120, 340, x0, x1, y0, y1};
        draw_x_axis(c, f, spec.x_label);
        draw_y_axis(c, f, y_label);
        for (std::size_t i = 0; i < panel.x.size(); ++i) {
            draw_marker(c, static_cast<std::size_t>(group.values[i]), f.sx(panel.x[i]), f.sy(panel.y[i]));
        }
        if (fit) {
            c.line(f.sx(x0), f.sy(fit->intercept + fit->slope * x0), f.sx(x1),
                   f.sy(fit->intercept + fit->slope * x1), "#222222", 1.5);
            char buf[96];
            std::snprintf(buf, sizeof buf, "y = %.3f %s %.3f x", fit->intercept, fit->slope < 0 ? "-" : "+",
                          std::fabs(fit->slope));
            c.text(f.left + f.width, f.top - 8, buf, 11, "end");
        }
        for (std::size_t g = 0; g < spec.categories.size(); ++g) {
            const double ly = f.top + 12 + 16 * static_cast<double>(g);
            draw_marker(c, g, f.left + 12, ly - 4);
            c.text(f.left + 22, ly, spec.categories[g], 11, "start");
        }
        draw_notes(c, spec.notes, f.left, f.top + f.height + 60);
        out.panels.push_back(std::move(spec));
    }
    out.svg = c.finish();
    return out;
}

// --- figure 3 ------------------------------------------------------------------

Figure fig_coefficients(const RegressionResult& result, bool include_intercept) {
    PlotSpec spec;
    spec.kind = PlotKind::coef_interval;
    spec.title = "Regression coefficients with " + fixed(100.0 * (1.0 - result.alpha), 0) + "% confidence intervals";
    spec.x_label = "Estimate";
    spec.y_label = "Predictor";
    Series estimate{"estimate", {}}, lower{"lower", {}}, upper{"upper", {}};
    for (const auto& t : result.terms) {
        if (!include_intercept && t.name == kInterceptName) continue;
        spec.categories.push_back(t.name);
        estimate.values.push_back(t.estimate);
        std::optional<std::pair<double, double>> ci;
        if (t.std_error && *t.std_error > 0.0) ci = confidence_interval(t, result.df_resid, result.alpha);
        lower.values.push_back(ci ? ci->first : kNaN);
        upper.values.push_back(ci ? ci->second : kNaN);
        if (!ci) spec.notes.push_back(t.name + ": interval undefined, point estimate only");
    }
    if (spec.categories.empty()) throw ArgumentError("fig_coefficients: no terms to plot");
    spec.series = {estimate, lower, upper};
    spec.annotations["reference"] = 0.0;
    spec.annotations["df_resid"] = static_cast<double>(result.df_resid);
    if (result.df_resid > 0) spec.annotations["t_critical"] = student_t_critical(result.alpha, static_cast<double>(result.df_resid));

    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < estimate.values.size(); ++i) {
        for (double v : {estimate.values[i], lower.values[i], upper.values[i]}) {
            if (std::isnan(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const auto [x0, x1] = padded_range(lo, hi);
    svg::Canvas c(800, 450);
    c.text(400, 28, spec.title, 16);
    Frame f{220, 50, 540, 320, x0, x1, 0.0, 1.0};
    draw_x_axis(c, f, spec.x_label);
    c.line(f.left, f.top, f.left, f.top + f.height, "#333333");
    c.line(f.sx(0.0), f.top, f.sx(0.0), f.top + f.height, "#888888", 1.0, "4 3");
    const double slot = f.height / static_cast<double>(spec.categories.size());
    for (std::size_t i = 0; i < spec.categories.size(); ++i) {
        const double y = f.top + slot * (static_cast<double>(i) + 0.5);
        c.text(f.left - 8, y + 4, spec.categories[i], 11, "end");
        if (!std::isnan(lower.values[i])) {
            c.line(f.sx(lower.values[i]), y, f.sx(upper.values[i]), y, color(0), 2.0);
            c.line(f.sx(lower.values[i]), y - 5, f.sx(lower.values[i]), y + 5, color(0), 2.0);
            c.line(f.sx(upper.values[i]), y - 5, f.sx(upper.values[i]), y + 5, color(0), 2.0);
        }
        c.circle(f.sx(estimate.values[i]), y, 4.5, "#222222");
    }
    draw_notes(c, spec.notes, f.left, f.top + f.height + 60);
    return {{spec}, c.finish()};
}

// --- figure 4 ------------------------------------------------------------------

Figure fig_box(const std::vector<std::pair<std::string, std::vector<double>>>& groups, const std::string& y_label) {
    if (groups.empty()) throw ArgumentError("fig_box: no groups");
    PlotSpec spec;
    spec.kind = PlotKind::box;
    spec.title = "Persistence technique counts by division";
    spec.x_label = "Division";
    spec.y_label = y_label;
    std::vector<BoxStats> stats;
    Series n{"n", {}}, q1{"q1", {}}, median{"median", {}}, q3{"q3", {}}, wl{"whisker_low", {}},
        wh{"whisker_high", {}};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [name, values] : groups) {
        if (values.empty()) throw ArgumentError("fig_box: group '" + name + "' is empty");
        stats.push_back(box_stats(values));
        const auto& b = stats.back();
        spec.categories.push_back(name);
        n.values.push_back(static_cast<double>(values.size()));
        q1.values.push_back(b.q1);
        median.values.push_back(b.median);
        q3.values.push_back(b.q3);
        wl.values.push_back(b.whisker_low);
        wh.values.push_back(b.whisker_high);
        lo = std::min(lo, min_of(values));
        hi = std::max(hi, max_of(values));
    }
    spec.series = {n, q1, median, q3, wl, wh};
    for (std::size_t i = 0; i < stats.size(); ++i) {
        spec.series.push_back({"outliers:" + spec.categories[i], stats[i].outliers});
    }

    const auto [y0, y1] = padded_range(lo, hi);
    svg::Canvas c(600, 500);
    c.text(300, 28, spec.title, 16);
    Frame f{90, 50, 470, 360, 0.0, 1.0, y0, y1};
    draw_y_axis(c, f, y_label);
    c.line(f.left, f.top + f.height, f.left + f.width, f.top + f.height, "#333333");
    const double slot = f.width / static_cast<double>(stats.size());
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const auto& b = stats[i];
        const double cx = f.left + slot * (static_cast<double>(i) + 0.5);
        const double half = std::min(60.0, slot * 0.3);
        c.line(cx, f.sy(b.whisker_low), cx, f.sy(b.q1), "#333333");
        c.line(cx, f.sy(b.q3), cx, f.sy(b.whisker_high), "#333333");
        c.line(cx - half / 2, f.sy(b.whisker_low), cx + half / 2, f.sy(b.whisker_low), "#333333");
        c.line(cx - half / 2, f.sy(b.whisker_high), cx + half / 2, f.sy(b.whisker_high), "#333333");
        c.rect(cx - half, f.sy(b.q3), 2 * half, f.sy(b.q1) - f.sy(b.q3), color(i), "#333333");
        c.line(cx - half, f.sy(b.median), cx + half, f.sy(b.median), "#111111", 2.0);
        for (double v : b.outliers) c.circle(cx, f.sy(v), 3.5, "none", "#333333");
        c.text(cx, f.top + f.height + 18,
               spec.categories[i] + " (n=" + std::to_string(static_cast<std::size_t>(n.values[i])) + ")", 12);
    }
    c.text(f.left + f.width / 2, f.top + f.height + 40, spec.x_label, 13);
    return {{spec}, c.finish()};
}

// --- serialization ---------------------------------------------------------------

std::string plot_to_json(const Figure& figure) {
    ojson doc;
    doc["panels"] = ojson::array();
    for (const auto& p : figure.panels) {
        ojson j;
        j["kind"] = to_string(p.kind);
        j["title"] = p.title;
        j["x_label"] = p.x_label;
        j["y_label"] = p.y_label;
        j["categories"] = p.categories;
        j["series"] = ojson::object();
        for (const auto& s : p.series) {
            ojson values = ojson::array();
            for (double v : s.values) values.push_back(std::isnan(v) ? ojson(nullptr) : ojson(v));
            j["series"][s.name] = std::move(values);
        }
        j["annotations"] = ojson::object();
        for (const auto& [k, v] : p.annotations) j["annotations"][k] = v;
        j["notes"] = p.notes;
        doc["panels"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

std::string fixed(double value, int decimals) {
    if (std::isnan(value)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string s(buf);
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string table1_csv(const std::vector<NamedCorrelation>& correlations) {
    std::string out = "CORRELATION,P_VALUE,CI_LOWER,CI_UPPER\n";
    for (const auto& c : correlations) {
        out += fixed(c.result.r, 8) + ',' + fixed(c.result.p_value, 8) + ',' + fixed(c.result.ci_lower, 8) + ',' +
               fixed(c.result.ci_upper, 8) + '\n';
    }
    return out;
}

std::string table2_csv(const RegressionResult& regression) {
    std::string out = "Predictor,Estimate,Std. Error,t-value,p-value\n";
    auto cell = [](const std::optional<double>& v) { return v ? fixed(*v, 3) : std::string("NA"); };
    for (const auto& t : regression.terms) {
        out += t.name + ',' + fixed(t.estimate, 3) + ',' + cell(t.std_error) + ',' + cell(t.t_value) + ',' +
               cell(t.p_value) + '\n';
    }
    return out;
}

std::string tables_json(const AnalysisResult& analysis) {
    ojson doc;
    ojson t1 = ojson::array();
    for (const auto& c : analysis.correlations) {
        t1.push_back(ojson{{"name", c.name},
                           {"CORRELATION", c.result.r},
                           {"P_VALUE", c.result.p_value},
                           {"CI_LOWER", c.result.ci_lower},
                           {"CI_UPPER", c.result.ci_upper}});
    }
    doc["table1"] = std::move(t1);
    auto opt = [](const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); };
    const auto& reg = analysis.regression;
    ojson t2 = ojson::array();
    for (const auto& t : reg.terms) {
        t2.push_back(ojson{{"Predictor", t.name},
                           {"Estimate", t.estimate},
                           {"Std. Error", opt(t.std_error)},
                           {"t-value", opt(t.t_value)},
                           {"p-value", opt(t.p_value)}});
    }
    doc["table2"] = std::move(t2);
    if (!reg.terms.empty()) {
        doc["model"] = ojson{{"n", reg.n},
                             {"r_squared", reg.r_squared},
                             {"adj_r_squared", reg.adj_r_squared},
                             {"f_stat", opt(reg.f_stat)},
                             {"df_model", reg.df_model},
                             {"df_resid", reg.df_resid},
                             {"f_p_value", opt(reg.f_p_value)}};
    }
    return doc.dump(2) + "\n";
}

std::vector<std::string> write_report(const std::filesystem::path& dir, const AnalysisResult& analysis,
                                      const CorpusDistribution& distribution) {
    std::vector<std::string> warnings;
    write_file_atomic(dir / "table1.csv", table1_csv(analysis.correlations));
    write_file_atomic(dir / "table2.csv", table2_csv(analysis.regression));
    write_file_atomic(dir / "tables.json", tables_json(analysis));

    auto emit = [&](const std::string& stem, const Figure& fig) {
        write_file_atomic(dir / (stem + ".svg"), fig.svg);
        write_file_atomic(dir / (stem + ".json"), plot_to_json(fig));
    };

    if (distribution.grand_total > 0) {
        emit("fig1", fig_frequency(distribution));
    } else {
        warnings.push_back("fig1 skipped: no persistence occurrences");
    }

    const auto& obs = analysis.observations;
    if (obs.size() >= 2) {
        std::vector<double> counts, grips, rc1, rc2;
        std::vector<std::string> groups;
        for (const auto& o : obs) {
            counts.push_back(o.persistence_count);
            grips.push_back(o.psychometrics.grips);
            rc1.push_back(o.psychometrics.admc_rc1);
            rc2.push_back(o.psychometrics.admc_rc2);
            groups.emplace_back(to_string(o.division));
        }
        emit("fig2a", fig_scatter_fit("Persistence technique count vs GRiPS score",
                                      {{"GRiPS score", grips, counts, groups}}));
        emit("fig2b", fig_scatter_fit("Persistence technique count vs ADMC resistance to framing",
                                      {{"ADMC RC1 score", rc1, counts, groups},
                                       {"ADMC RC2 score", rc2, counts, groups}}));

        std::vector<std::pair<std::string, std::vector<double>>> by_division;
        for (Division d : {Division::Expert, Division::Open}) {
            std::vector<double> values;
            for (const auto& o : obs) {
                if (o.division == d) values.push_back(o.persistence_count);
            }
            if (values.empty()) {
                warnings.push_back("fig4: division " + std::string(to_string(d)) + " has no participants");
            } else {
                by_division.emplace_back(std::string(to_string(d)), std::move(values));
            }
        }
        emit("fig4", fig_box(by_division));
    } else {
        warnings.push_back("fig2a, fig2b, fig4 skipped: fewer than two observations");
    }

    const bool has_predictor = std::any_of(analysis.regression.terms.begin(), analysis.regression.terms.end(),
                                           [](const auto& t) { return t.name != kInterceptName; });
    if (has_predictor) {
        emit("fig3", fig_coefficients(analysis.regression));
    } else {
        warnings.push_back("fig3 skipped: no regression terms");
    }
    return warnings;
}

}  // namespace persistlens
