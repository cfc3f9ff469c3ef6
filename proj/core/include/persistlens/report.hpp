#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persistlens/analysis.hpp"
#include "persistlens/metrics.hpp"
#include "persistlens/stats.hpp"

namespace persistlens {

enum class PlotKind { bar, scatter_fit, coef_interval, box };

std::string_view to_string(PlotKind kind);

struct Series {
    std::string name;
    std::vector<double> values;  // NaN marks an undefined value (null in JSON)
};

struct PlotSpec {
    PlotKind kind = PlotKind::bar;
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> categories;  // bar/box/interval labels, or scatter group names
    std::vector<Series> series;
    std::map<std::string, double> annotations;  // fitted line, reference lines
    std::vector<std::string> notes;              // warnings shown under the plot

    const Series* find(const std::string& name) const;
};

// One rendered figure; most have one panel, fig 2b has two.
struct Figure {
    std::vector<PlotSpec> panels;
    std::string svg;
};

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Least-squares line; nullopt when x is constant. Needs at least two points.
std::optional<LineFit> fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct BoxStats {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_low = 0.0;   // most extreme values within 1.5 IQR of the box
    double whisker_high = 0.0;
    std::vector<double> outliers;  // ascending
};

// Type-7 quartiles; throws ArgumentError on an empty group.
BoxStats box_stats(std::vector<double> values);

struct ScatterPanel {
    std::string x_label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::string> group;  // one label per point
};

// Bars sorted by count descending, ties by name.
Figure fig_frequency(const CorpusDistribution& dist, std::size_t top_n = 0);
Figure fig_scatter_fit(const std::string& title, const std::vector<ScatterPanel>& panels,
                       const std::string& y_label = "Persistence technique count");
// Intercept left out unless asked for; it lives on a different scale.
Figure fig_coefficients(const RegressionResult& result, bool include_intercept = false);
Figure fig_box(const std::vector<std::pair<std::string, std::vector<double>>>& groups,
               const std::string& y_label = "Persistence technique count");

std::string plot_to_json(const Figure& figure);

// Fixed-precision decimal, never "-0.000".
std::string fixed(double value, int decimals);

std::string table1_csv(const std::vector<NamedCorrelation>& correlations);
std::string table2_csv(const RegressionResult& regression);
std::string tables_json(const AnalysisResult& analysis);

// Writes table1/table2 CSV and JSON and fig{1,2a,2b,3,4}.{svg,json} into dir.
// Figures whose inputs are missing (no regression terms, empty distribution)
// are skipped and listed in the returned warnings.
std::vector<std::string> write_report(const std::filesystem::path& dir, const AnalysisResult& analysis,
                                      const CorpusDistribution& distribution);

}  // namespace persistlens
