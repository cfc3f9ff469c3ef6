#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "paths.hpp"
#include "persistlens/error.hpp"
#include "persistlens/taxonomy.hpp"

using namespace persistlens;

namespace {

const Catalog& shipped() {
    static const Catalog c = Catalog::load(test_support::catalog_path());
    return c;
}

constexpr const char* kTiny = R"({
  "techniques": [
    {"id": "T0002", "name": "Beta Gamma", "tactic": "persistence"},
    {"id": "T0001", "name": "Beta Gamme", "tactic": "persistence",
     "subtechniques": [{"id": "T0001.001", "name": "Leaf"}]},
    {"id": "T0009", "name": "Elsewhere", "tactic": "discovery"}
  ]
})";

}  // namespace

TEST(Catalog, ShippedSnapshotLoads) {
    Catalog::LoadReport report;
    const auto c = Catalog::load(test_support::catalog_path(), &report);
    EXPECT_EQ(c.size(), 120u);
    EXPECT_EQ(report.techniques_excluded, 3u);
    EXPECT_FALSE(c.source_version().empty());
    ASSERT_NE(c.find_technique("T1053"), nullptr);
    EXPECT_EQ(c.find_technique("T1053")->name, "Scheduled Task/Job");
    EXPECT_EQ(c.find_technique("T1098.004"), nullptr);
    ASSERT_NE(c.find_by_id("T1098.004"), nullptr);
    EXPECT_EQ(c.find_by_id("T1098.004")->display_name(), "Account Manipulation: SSH Authorized Keys");
    EXPECT_EQ(c.find_by_id("T1003"), nullptr);  // credential access only
}

TEST(Catalog, EmptyPersistenceSetIsAnError) {
    EXPECT_THROW(Catalog::parse(R"({"techniques": []})"), EmptyCatalogError);
    EXPECT_THROW(Catalog::parse(R"({"techniques": [{"id": "T1", "name": "X", "tactic": "discovery"}]})"),
                 EmptyCatalogError);
}

TEST(Catalog, MalformedJsonReportsPosition) {
    try {
        Catalog::parse("{\n  \"techniques\": [\n    {\"id\": }\n", "bad.json");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.path(), "bad.json");
        EXPECT_EQ(e.line(), 3u);
        EXPECT_GT(e.column(), 0u);
    }
}

TEST(Catalog, DuplicateIdsRejected) {
    EXPECT_THROW(Catalog::parse(R"({"techniques": [
        {"id": "T1", "name": "A", "tactic": "persistence"},
        {"id": "T1", "name": "B", "tactic": "persistence"}]})"),
                 ParseError);
    EXPECT_THROW(Catalog::parse(R"({"techniques": [
        {"id": "T1", "name": "A", "tactic": "persistence",
         "subtechniques": [{"id": "T1.001", "name": "S"}, {"id": "T1.001", "name": "S2"}]}]})"),
                 ParseError);
}

TEST(Catalog, MissingFieldsRejected) {
    EXPECT_THROW(Catalog::parse(R"({"techniques": [{"id": "T1", "tactic": "persistence"}]})"), ParseError);
    EXPECT_THROW(Catalog::parse(R"({"techniques": [{"id": "T1", "name": "A"}]})"), ParseError);
    EXPECT_THROW(Catalog::parse(R"([1, 2])"), ParseError);
}

TEST(NormalizeKey, Cases) {
    EXPECT_EQ(normalize_key("  Scheduled   Task/Job "), "scheduled taskjob");
    EXPECT_EQ(normalize_key("Account Manipulation: SSH Authorized Keys"), "account manipulation ssh authorized keys");
    EXPECT_EQ(normalize_key("WEB\tShell!"), "web shell");
    EXPECT_EQ(normalize_key("..."), "");
    EXPECT_EQ(normalize_key("T1053.005"), "t1053005");
}

TEST(EditDistance, KnownPairs) {
    EXPECT_EQ(damerau_levenshtein("", ""), 0u);
    EXPECT_EQ(damerau_levenshtein("abc", ""), 3u);
    EXPECT_EQ(damerau_levenshtein("kitten", "sitting"), 3u);
    EXPECT_EQ(damerau_levenshtein("ab", "ba"), 1u);
    // restricted variant: no edits inside a transposed pair
    EXPECT_EQ(damerau_levenshtein("ca", "abc"), 3u);
    EXPECT_DOUBLE_EQ(dl_similarity("", ""), 1.0);
    EXPECT_DOUBLE_EQ(dl_similarity("abcd", "abdc"), 0.75);
}

TEST(EditDistance, MatchesRecursiveOracle) {
    std::mt19937_64 gen(2);
    std::uniform_int_distribution<int> len(0, 9), ch(0, 3);
    for (int i = 0; i < 2000; ++i) {
        std::string a, b;
        for (int k = len(gen); k > 0; --k) a += static_cast<char>('a' + ch(gen));
        for (int k = len(gen); k > 0; --k) b += static_cast<char>('a' + ch(gen));
        ASSERT_EQ(damerau_levenshtein(a, b), oracle::osa_distance(a, b)) << a << " / " << b;
        ASSERT_EQ(damerau_levenshtein(a, b), damerau_levenshtein(b, a));
    }
}

TEST(NormalizeLabel, ExactNames) {
    const auto m = shipped().normalize_label("scheduled task/job");
    EXPECT_EQ(m.kind, MatchKind::exact);
    ASSERT_TRUE(m.ref);
    EXPECT_EQ(m.ref->technique_id, "T1053");
    EXPECT_FALSE(m.ref->subtechnique_id);

    const auto sub = shipped().normalize_label("Account Manipulation: SSH Authorized Keys");
    EXPECT_EQ(sub.kind, MatchKind::exact);
    EXPECT_EQ(sub.ref->subtechnique_id, "T1098.004");

    const auto bare_sub = shipped().normalize_label("SSH Authorized Keys");
    EXPECT_EQ(bare_sub.kind, MatchKind::exact);
    EXPECT_EQ(bare_sub.ref->technique_id, "T1098");
}

TEST(NormalizeLabel, EmbeddedIdWins) {
    const auto m = shipped().normalize_label("Something odd (T1505.003)");
    EXPECT_EQ(m.kind, MatchKind::exact);
    EXPECT_EQ(m.ref->most_specific_id(), "T1505.003");
    EXPECT_EQ(shipped().normalize_label("T1136").ref->name, "Create Account");
}

TEST(NormalizeLabel, Alias) {
    const auto m = shipped().normalize_label("bitsadmin job");
    EXPECT_EQ(m.kind, MatchKind::alias);
    EXPECT_EQ(m.ref->technique_id, "T1197");
    EXPECT_EQ(m.similarity, 1.0);
}

TEST(NormalizeLabel, FuzzyTypo) {
    const auto m = shipped().normalize_label("Scheduled Tsak/Job");
    EXPECT_EQ(m.kind, MatchKind::fuzzy);
    EXPECT_EQ(m.ref->technique_id, "T1053");
    EXPECT_GE(m.similarity, kDefaultFuzzyThreshold);
    EXPECT_LT(m.similarity, 1.0);
}

TEST(NormalizeLabel, AbbreviationStaysUnmapped) {
    const auto m = shipped().normalize_label("Modify Auth Process");
    EXPECT_EQ(m.kind, MatchKind::unmapped);
    EXPECT_FALSE(m.ref);
    EXPECT_LT(m.similarity, kDefaultFuzzyThreshold);
}

TEST(NormalizeLabel, EmptyLabelRejected) {
    EXPECT_THROW(shipped().normalize_label(""), ArgumentError);
    EXPECT_THROW(shipped().normalize_label(" ?! "), ArgumentError);
}

TEST(NormalizeLabel, TiesResolveToLowestId) {
    const auto c = Catalog::parse(kTiny);
    EXPECT_EQ(c.size(), 3u);
    // one edit from both names
    const auto first = c.normalize_label("Beta Gammx");
    ASSERT_EQ(first.kind, MatchKind::fuzzy);
    EXPECT_EQ(first.ref->technique_id, "T0001");
    EXPECT_FALSE(first.ref->subtechnique_id);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(c.normalize_label("Beta Gammx").ref, first.ref);
}

TEST(NormalizeLabel, ThresholdIsAdjustable) {
    auto c = Catalog::parse(kTiny);
    c.set_fuzzy_threshold(0.95);
    EXPECT_EQ(c.normalize_label("Beta Gammx").kind, MatchKind::unmapped);
    EXPECT_THROW(c.set_fuzzy_threshold(0.0), ArgumentError);
    EXPECT_THROW(c.set_fuzzy_threshold(1.5), ArgumentError);
}

TEST(MatchKindNames, RoundTrip) {
    for (auto k : {MatchKind::exact, MatchKind::alias, MatchKind::fuzzy, MatchKind::unmapped}) {
        EXPECT_EQ(match_kind_from_string(to_string(k)), k);
    }
    EXPECT_FALSE(match_kind_from_string("close"));
}
