#include "persistlens/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "persistlens/error.hpp"
#include "persistlens/stats.hpp"

namespace persistlens {

using ojson = nlohmann::ordered_json;

const std::vector<std::string>& default_stage_labels() {
    static const std::vector<std::string> labels{"reconnaissance", "privilege escalation",
                                                 "lateral movement", "data exfiltration"};
    return labels;
}

BinSpec BinSpec::equal_width(std::size_t bins, std::optional<TimeWindow> window) {
    if (bins == 0) throw ArgumentError("equal-width binning needs at least one bin");
    if (window && window->end < window->begin) throw ArgumentError("bin window ends before it begins");
    BinSpec spec;
    spec.equal_width_bins = bins;
    spec.window = window;
    return spec;
}

BinSpec BinSpec::stages(std::vector<Timestamp> boundaries, std::vector<std::string> labels) {
    if (boundaries.empty()) throw ArgumentError("stage binning needs at least one boundary");
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
        if (!(boundaries[i - 1] < boundaries[i])) {
            throw ArgumentError("stage boundaries must be strictly increasing");
        }
    }
    if (labels.empty() && boundaries.size() + 1 == default_stage_labels().size()) {
        labels = default_stage_labels();
    }
    if (!labels.empty() && labels.size() != boundaries.size() + 1) {
        throw ArgumentError(std::to_string(boundaries.size()) + " stage boundaries need " +
                            std::to_string(boundaries.size() + 1) + " labels, got " +
                            std::to_string(labels.size()));
    }
    BinSpec spec;
    spec.boundaries = std::move(boundaries);
    spec.labels = std::move(labels);
    return spec;
}

std::size_t BinSpec::bin_count() const {
    return boundaries.empty() ? equal_width_bins : boundaries.size() + 1;
}

std::vector<std::string> BinSpec::bin_labels() const {
    if (!labels.empty()) return labels;
    std::vector<std::string> out;
    const char* prefix = boundaries.empty() ? "bin_" : "stage_";
    for (std::size_t i = 0; i < bin_count(); ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
}

namespace {

std::size_t stage_bin(const std::vector<Timestamp>& boundaries, const Timestamp& t) {
    return static_cast<std::size_t>(std::upper_bound(boundaries.begin(), boundaries.end(), t) -
                                    boundaries.begin());
}

std::size_t equal_width_bin(long long begin, long long end, std::size_t bins, long long t) {
    if (t <= begin || end <= begin) return 0;
    if (t >= end) return bins - 1;
    const auto offset = static_cast<unsigned long long>(t - begin);
    const auto span = static_cast<unsigned long long>(end - begin);
    return std::min<std::size_t>(static_cast<std::size_t>(offset * bins / span), bins - 1);
}

}  // namespace

BehavioralMetrics participant_metrics(std::span<const AnnotatedAction> actions, const BinSpec& bins,
                                      std::string_view participant_id) {
    BehavioralMetrics out;
    out.participant_id = std::string(participant_id);
    for (const auto& a : actions) {
        if (out.participant_id.empty()) out.participant_id = a.participant_id;
        if (a.participant_id != out.participant_id) {
            throw ArgumentError("participant_metrics: actions of '" + a.participant_id + "' mixed with '" +
                                out.participant_id + "'");
        }
    }
    const std::size_t nbins = bins.bin_count();
    if (nbins == 0) throw ArgumentError("bin spec has no bins");
    out.temporal_bins.assign(nbins, 0);

    std::vector<const AnnotatedAction*> hits;
    for (const auto& a : actions) {
        if (a.annotation.is_persistence) hits.push_back(&a);
    }
    long long begin = 0, end = 0;
    if (bins.boundaries.empty()) {
        if (bins.window) {
            begin = bins.window->begin.seconds();
            end = bins.window->end.seconds();
        } else if (!hits.empty()) {
            begin = end = hits.front()->segment.start.seconds();
            for (const auto* a : hits) {
                begin = std::min(begin, a->segment.start.seconds());
                end = std::max(end, a->segment.start.seconds());
            }
        }
    }

    for (const auto* a : hits) {
        ++out.persistence_count;
        if (const auto& ref = a->annotation.technique) {
            ++out.per_technique_counts[ref->technique_id];
            out.technique_names.emplace(ref->technique_id, ref->name);
        } else {
            ++out.unmapped_count;
        }
        const auto& start = a->segment.start;
        const std::size_t bin = bins.boundaries.empty()
                                    ? equal_width_bin(begin, end, nbins, start.seconds())
                                    : stage_bin(bins.boundaries, start);
        ++out.temporal_bins[bin];
    }
    out.unique_technique_count = out.per_technique_counts.size();
    return out;
}

std::vector<BehavioralMetrics> corpus_metrics(const std::vector<std::string>& participants,
                                              const std::vector<AnnotatedAction>& actions,
                                              const BinSpec& bins) {
    std::map<std::string, std::vector<AnnotatedAction>> grouped;
    for (const auto& id : participants) {
        if (!grouped.emplace(id, std::vector<AnnotatedAction>{}).second) {
            throw ArgumentError("participant '" + id + "' listed twice");
        }
    }
    for (const auto& a : actions) {
        auto it = grouped.find(a.participant_id);
        if (it != grouped.end()) it->second.push_back(a);
    }
    std::vector<BehavioralMetrics> out;
    out.reserve(participants.size());
    for (const auto& id : participants) out.push_back(participant_metrics(grouped.at(id), bins, id));
    return out;
}

namespace {

void finish_distribution(CorpusDistribution& d) {
    std::sort(d.participant_counts.begin(), d.participant_counts.end());
    d.grand_total = 0;
    for (const auto& [name, count] : d.totals) d.grand_total += count;
    d.percentages.clear();
    for (const auto& [name, count] : d.totals) {
        d.percentages[name] = d.grand_total == 0 ? 0.0
                                                 : static_cast<double>(count) / static_cast<double>(d.grand_total);
    }
    const auto& c = d.participant_counts;
    if (c.empty()) return;
    std::vector<double> sorted(c.begin(), c.end());
    const double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
    d.participant_summary.mean = sum / static_cast<double>(sorted.size());
    d.participant_summary.median = quantile_type7(sorted, 0.5);
    d.participant_summary.min = c.front();
    d.participant_summary.max = c.back();
}

}  // namespace

CorpusDistribution corpus_distribution(std::span<const BehavioralMetrics> metrics) {
    if (metrics.empty()) throw ArgumentError("corpus_distribution: no participants");
    CorpusDistribution d;
    bool same_bins = true;
    d.temporal_totals.assign(metrics.front().temporal_bins.size(), 0);
    for (const auto& m : metrics) {
        for (const auto& [id, count] : m.per_technique_counts) {
            auto name = m.technique_names.find(id);
            d.totals[name == m.technique_names.end() ? id : name->second] += count;
        }
        if (m.unmapped_count > 0) d.totals[std::string(kUnmappedBucket)] += m.unmapped_count;
        d.participant_counts.push_back(m.persistence_count);
        if (m.temporal_bins.size() != d.temporal_totals.size()) {
            same_bins = false;
        } else if (same_bins) {
            for (std::size_t i = 0; i < m.temporal_bins.size(); ++i) d.temporal_totals[i] += m.temporal_bins[i];
        }
    }
    if (!same_bins) d.temporal_totals.clear();
    finish_distribution(d);
    return d;
}

CorpusDistribution merge_distributions(const CorpusDistribution& a, const CorpusDistribution& b) {
    if (a.participant_counts.empty()) return b;
    if (b.participant_counts.empty()) return a;
    CorpusDistribution d = a;
    for (const auto& [name, count] : b.totals) d.totals[name] += count;
    d.participant_counts.insert(d.participant_counts.end(), b.participant_counts.begin(),
                                b.participant_counts.end());
    if (a.temporal_totals.size() == b.temporal_totals.size()) {
        for (std::size_t i = 0; i < b.temporal_totals.size(); ++i) d.temporal_totals[i] += b.temporal_totals[i];
    } else {
        d.temporal_totals.clear();
    }
    finish_distribution(d);
    return d;
}

std::vector<std::pair<std::string, std::size_t>> ranked_totals(const CorpusDistribution& dist) {
    std::vector<std::pair<std::string, std::size_t>> out(dist.totals.begin(), dist.totals.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
    });
    return out;
}

std::string format_percent(double share) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", share * 100.0);
    return buf;
}

// --- CSV ---------------------------------------------------------------------

std::string metrics_to_csv(const std::vector<BehavioralMetrics>& metrics) {
    std::string out(kMetricsHeader);
    out += '\n';
    for (const auto& m : metrics) {
        if (m.participant_id.find_first_of(",;\n\r\"") != std::string::npos) {
            throw ArgumentError("participant id '" + m.participant_id + "' cannot be written to CSV");
        }
        out += m.participant_id;
        out += ',' + std::to_string(m.persistence_count);
        out += ',' + std::to_string(m.unique_technique_count);
        out += ',' + std::to_string(m.unmapped_count);
        out += ',';
        for (std::size_t i = 0; i < m.temporal_bins.size(); ++i) {
            if (i) out += ';';
            out += std::to_string(m.temporal_bins[i]);
        }
        out += ',';
        bool first = true;
        for (const auto& [id, count] : m.per_technique_counts) {
            if (!first) out += ';';
            first = false;
            out += id + '=' + std::to_string(count);
        }
        out += '\n';
    }
    return out;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

std::optional<std::size_t> parse_count(std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

}  // namespace

std::vector<BehavioralMetrics> metrics_from_csv(std::string_view text, const Catalog& catalog,
                                                const std::string& origin) {
    std::vector<std::string_view> lines = split(text, '\n');
    for (auto& l : lines) {
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();

    std::vector<TableIssue> issues;
    if (lines.empty() || lines.front() != kMetricsHeader) {
        issues.push_back({0, "", "expected header '" + std::string(kMetricsHeader) + "'"});
        throw TableError(origin, std::move(issues));
    }
    std::vector<BehavioralMetrics> out;
    std::map<std::string, std::size_t, std::less<>> seen;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto fields = split(lines[row], ',');
        if (fields.size() != 6) {
            issues.push_back({row, "", "expected 6 fields, got " + std::to_string(fields.size())});
            continue;
        }
        BehavioralMetrics m;
        m.participant_id = std::string(fields[0]);
        if (m.participant_id.empty()) issues.push_back({row, "participant_id", "empty participant id"});
        if (!m.participant_id.empty() && !seen.emplace(m.participant_id, row).second) {
            issues.push_back({row, "participant_id", "duplicate participant id '" + m.participant_id + "'"});
        }
        const auto persistence = parse_count(fields[1]);
        const auto unique = parse_count(fields[2]);
        const auto unmapped = parse_count(fields[3]);
        if (!persistence) issues.push_back({row, "persistence_count", "not a non-negative integer"});
        if (!unique) issues.push_back({row, "unique_technique_count", "not a non-negative integer"});
        if (!unmapped) issues.push_back({row, "unmapped_count", "not a non-negative integer"});
        bool ok = persistence && unique && unmapped;
        if (!fields[4].empty()) {
            for (auto cell : split(fields[4], ';')) {
                auto v = parse_count(cell);
                if (!v) {
                    issues.push_back({row, "temporal_bins", "bad bin count '" + std::string(cell) + "'"});
                    ok = false;
                    break;
                }
                m.temporal_bins.push_back(*v);
            }
        }
        if (!fields[5].empty()) {
            for (auto cell : split(fields[5], ';')) {
                const auto eq = cell.find('=');
                auto v = eq == std::string_view::npos ? std::nullopt : parse_count(cell.substr(eq + 1));
                if (!v) {
                    issues.push_back({row, "technique_counts", "bad entry '" + std::string(cell) + "'"});
                    ok = false;
                    break;
                }
                const std::string id(cell.substr(0, eq));
                const TechniqueRef* ref = catalog.find_technique(id);
                if (!ref) {
                    issues.push_back({row, "technique_counts", "technique '" + id + "' is not in the catalog"});
                    ok = false;
                    break;
                }
                m.per_technique_counts[id] += *v;
                m.technique_names[id] = ref->name;
            }
        }
        if (!ok) continue;
        m.persistence_count = *persistence;
        m.unique_technique_count = *unique;
        m.unmapped_count = *unmapped;
        std::size_t technique_sum = 0;
        for (const auto& [id, c] : m.per_technique_counts) technique_sum += c;
        const std::size_t bin_sum = std::accumulate(m.temporal_bins.begin(), m.temporal_bins.end(), std::size_t{0});
        if (technique_sum + m.unmapped_count != m.persistence_count) {
            issues.push_back({row, "persistence_count", "does not equal technique counts plus unmapped_count"});
        }
        if (m.unique_technique_count != m.per_technique_counts.size()) {
            issues.push_back({row, "unique_technique_count", "does not match technique_counts"});
        }
        if (bin_sum != m.persistence_count) {
            issues.push_back({row, "temporal_bins", "bins do not sum to persistence_count"});
        }
        out.push_back(std::move(m));
    }
    if (!issues.empty()) throw TableError(origin, std::move(issues));
    return out;
}

// --- JSON --------------------------------------------------------------------

std::string distribution_to_json(const CorpusDistribution& dist, const std::vector<std::string>& bin_labels) {
    ojson doc;
    doc["grand_total"] = dist.grand_total;
    doc["techniques"] = ojson::array();
    for (const auto& [name, count] : ranked_totals(dist)) {
        const double share = dist.percentages.at(name);
        doc["techniques"].push_back(
            ojson{{"name", name}, {"count", count}, {"share", share}, {"percent", format_percent(share)}});
    }
    const auto& s = dist.participant_summary;
    doc["participants"] = ojson{{"n", dist.participant_counts.size()},
                                {"mean", s.mean},
                                {"median", s.median},
                                {"min", s.min},
                                {"max", s.max},
                                {"counts", dist.participant_counts}};
    ojson temporal;
    temporal["labels"] = dist.temporal_totals.size() == bin_labels.size() ? ojson(bin_labels) : ojson::array();
    temporal["totals"] = dist.temporal_totals;
    doc["temporal"] = std::move(temporal);
    return doc.dump(2) + "\n";
}

CorpusDistribution distribution_from_json(std::string_view text, const std::string& origin) {
    CorpusDistribution d;
    try {
        const auto doc = ojson::parse(text);
        for (const auto& t : doc.at("techniques")) {
            d.totals[t.at("name").get<std::string>()] = t.at("count").get<std::size_t>();
        }
        d.participant_counts = doc.at("participants").at("counts").get<std::vector<std::size_t>>();
        d.temporal_totals = doc.at("temporal").at("totals").get<std::vector<std::size_t>>();
    } catch (const ojson::exception& e) {
        throw ParseError(origin, 0, 0, std::string("malformed distribution file: ") + e.what());
    }
    finish_distribution(d);
    return d;
}

}  // namespace persistlens
