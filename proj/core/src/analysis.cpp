#include "persistlens/analysis.hpp"

#include <algorithm>
#include <map>

#include "json.hpp"
#include "persistlens/error.hpp"

namespace persistlens {

using ojson = nlohmann::ordered_json;

double division_indicator(Division d) { return d == Division::Open ? 1.0 : 0.0; }

std::vector<Observation> join_observations(const std::vector<BehavioralMetrics>& metrics,
                                           const std::vector<Participant>& participants,
                                           bool allow_partial) {
    std::map<std::string, const BehavioralMetrics*> by_id;
    for (const auto& m : metrics) {
        if (!by_id.emplace(m.participant_id, &m).second) {
            throw ArgumentError("duplicate metrics row for participant '" + m.participant_id + "'");
        }
    }
    std::map<std::string, const Participant*> table;
    for (const auto& p : participants) {
        if (!table.emplace(p.participant_id, &p).second) {
            throw ArgumentError("duplicate psychometrics row for participant '" + p.participant_id + "'");
        }
    }
    std::vector<std::string> metrics_only, table_only;
    for (const auto& [id, m] : by_id) {
        if (!table.count(id)) metrics_only.push_back(id);
    }
    for (const auto& [id, p] : table) {
        if (!by_id.count(id)) table_only.push_back(id);
    }
    if (!allow_partial && (!metrics_only.empty() || !table_only.empty())) {
        throw JoinError(std::move(metrics_only), std::move(table_only));
    }
    std::vector<Observation> out;
    for (const auto& [id, m] : by_id) {
        auto it = table.find(id);
        if (it == table.end()) continue;
        out.push_back({id, it->second->division, it->second->psychometrics,
                       static_cast<double>(m->persistence_count)});
    }
    return out;
}

namespace {

CorrelationResult correlate(const std::vector<double>& trait, const std::vector<double>& counts,
                            const std::string& trait_column, double alpha) {
    double r = 0.0;
    try {
        r = pearson_r(trait, counts);
    } catch (const DegenerateInputError& e) {
        const std::string column = e.column() == "x" ? trait_column : "persistence_count";
        throw DegenerateInputError(column, "column '" + column + "' is constant; correlation undefined");
    }
    try {
        return pearson_inference(r, trait.size(), alpha);
    } catch (const DegenerateInputError&) {
        throw DegenerateInputError(trait_column, "column '" + trait_column +
                                                     "' is perfectly correlated with persistence_count");
    }
}

}  // namespace

AnalysisResult analyze(std::vector<Observation> observations, double alpha) {
    std::sort(observations.begin(), observations.end(),
              [](const auto& a, const auto& b) { return a.participant_id < b.participant_id; });
    const std::size_t n = observations.size();
    constexpr std::size_t kParameters = 5;
    if (n <= kParameters) {
        throw InsufficientDataError("regression needs more than " + std::to_string(kParameters) +
                                    " participants, got " + std::to_string(n));
    }
    std::vector<double> counts, grips, rc1, rc2, division;
    for (const auto& o : observations) {
        counts.push_back(o.persistence_count);
        grips.push_back(o.psychometrics.grips);
        rc1.push_back(o.psychometrics.admc_rc1);
        rc2.push_back(o.psychometrics.admc_rc2);
        division.push_back(division_indicator(o.division));
    }

    AnalysisResult out;
    out.correlations.push_back({"LA_GriPS", correlate(grips, counts, "grips", alpha)});
    out.correlations.push_back({"LA_ADMC_RC1", correlate(rc1, counts, "admc_rc1", alpha)});
    out.correlations.push_back({"LA_ADMC_RC2", correlate(rc2, counts, "admc_rc2", alpha)});
    out.regression = ols_fit(counts,
                             {{std::string(kRc1Term), rc1},
                              {std::string(kRc2Term), rc2},
                              {std::string(kGripsTerm), grips},
                              {std::string(kDivisionTerm), division}},
                             true, alpha);
    out.observations = std::move(observations);
    return out;
}

namespace {

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> read_optional(const ojson& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

std::string analysis_to_json(const AnalysisResult& analysis) {
    ojson doc;
    doc["n"] = analysis.observations.size();
    doc["alpha"] = analysis.regression.alpha;
    doc["table1"] = ojson::array();
    for (const auto& c : analysis.correlations) {
        doc["table1"].push_back(ojson{{"name", c.name},
                                      {"CORRELATION", c.result.r},
                                      {"P_VALUE", c.result.p_value},
                                      {"CI_LOWER", c.result.ci_lower},
                                      {"CI_UPPER", c.result.ci_upper},
                                      {"n", c.result.n}});
    }
    const auto& reg = analysis.regression;
    ojson table2;
    table2["terms"] = ojson::array();
    for (const auto& t : reg.terms) {
        table2["terms"].push_back(ojson{{"Predictor", t.name},
                                        {"Estimate", t.estimate},
                                        {"Std. Error", optional_number(t.std_error)},
                                        {"t-value", optional_number(t.t_value)},
                                        {"p-value", optional_number(t.p_value)}});
    }
    table2["r_squared"] = reg.r_squared;
    table2["adj_r_squared"] = reg.adj_r_squared;
    table2["f_stat"] = optional_number(reg.f_stat);
    table2["df_model"] = reg.df_model;
    table2["df_resid"] = reg.df_resid;
    table2["f_p_value"] = optional_number(reg.f_p_value);
    table2["n"] = reg.n;
    table2["rss"] = reg.rss;
    table2["tss"] = reg.tss;
    table2["has_intercept"] = reg.has_intercept;
    doc["table2"] = std::move(table2);
    doc["observations"] = ojson::array();
    for (const auto& o : analysis.observations) {
        doc["observations"].push_back(ojson{{"participant_id", o.participant_id},
                                            {"division", to_string(o.division)},
                                            {"grips", o.psychometrics.grips},
                                            {"admc_rc1", o.psychometrics.admc_rc1},
                                            {"admc_rc2", o.psychometrics.admc_rc2},
                                            {"persistence_count", o.persistence_count}});
    }
    return doc.dump(2) + "\n";
}

AnalysisResult analysis_from_json(std::string_view text, const std::string& origin) {
    AnalysisResult out;
    try {
        const auto doc = ojson::parse(text);
        const double alpha = doc.at("alpha").get<double>();
        for (const auto& row : doc.at("table1")) {
            NamedCorrelation c;
            c.name = row.at("name").get<std::string>();
            c.result.r = row.at("CORRELATION").get<double>();
            c.result.p_value = row.at("P_VALUE").get<double>();
            c.result.ci_lower = row.at("CI_LOWER").get<double>();
            c.result.ci_upper = row.at("CI_UPPER").get<double>();
            c.result.n = row.at("n").get<std::size_t>();
            out.correlations.push_back(std::move(c));
        }
        const auto& t2 = doc.at("table2");
        auto& reg = out.regression;
        reg.alpha = alpha;
        for (const auto& row : t2.at("terms")) {
            RegressionTerm t;
            t.name = row.at("Predictor").get<std::string>();
            t.estimate = row.at("Estimate").get<double>();
            t.std_error = read_optional(row, "Std. Error");
            t.t_value = read_optional(row, "t-value");
            t.p_value = read_optional(row, "p-value");
            reg.terms.push_back(std::move(t));
        }
        reg.r_squared = t2.at("r_squared").get<double>();
        reg.adj_r_squared = t2.at("adj_r_squared").get<double>();
        reg.f_stat = read_optional(t2, "f_stat");
        reg.f_p_value = read_optional(t2, "f_p_value");
        reg.df_model = t2.at("df_model").get<std::size_t>();
        reg.df_resid = t2.at("df_resid").get<std::size_t>();
        reg.n = t2.at("n").get<std::size_t>();
        reg.rss = t2.at("rss").get<double>();
        reg.tss = t2.at("tss").get<double>();
        reg.has_intercept = t2.at("has_intercept").get<bool>();
        for (const auto& row : doc.at("observations")) {
            Observation o;
            o.participant_id = row.at("participant_id").get<std::string>();
            auto d = parse_division(row.at("division").get<std::string>());
            if (!d) throw ParseError(origin, 0, 0, "unknown division in analysis file");
            o.division = *d;
            o.psychometrics = {row.at("grips").get<double>(), row.at("admc_rc1").get<double>(),
                               row.at("admc_rc2").get<double>()};
            o.persistence_count = row.at("persistence_count").get<double>();
            out.observations.push_back(std::move(o));
        }
    } catch (const ojson::exception& e) {
        throw ParseError(origin, 0, 0, std::string("malformed analysis file: ") + e.what());
    }
    return out;
}

}  // namespace persistlens
