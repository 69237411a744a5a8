#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "rvcheck/benchkit.hpp"
#include "rvcheck/errors.hpp"

using namespace rvcheck;

namespace {

const std::filesystem::path kFixtures =
    std::filesystem::path(RVCHECK_SOURCE_DIR) / "data" / "fixtures";

EntityCandidate candidate(const std::string& name, long long hits) {
    return EntityCandidate{EntityRef::make(name), hits};
}

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("hit-count buckets split at 100K and 1M") {
    CHECK(bucket_hit_count(0) == Domain::Low);
    CHECK(bucket_hit_count(99999) == Domain::Low);
    CHECK(bucket_hit_count(100000) == Domain::Medium);
    CHECK(bucket_hit_count(500000) == Domain::Medium);
    CHECK(bucket_hit_count(1000000) == Domain::Medium);
    CHECK(bucket_hit_count(1000001) == Domain::High);
    CHECK(bucket_hit_count(52000000) == Domain::High);
    CHECK(bucket_entity(candidate("Paris", 52000000)) == Domain::High);
}

TEST_CASE("entity sampling is deterministic, uniform-without-replacement, per bucket") {
    std::vector<EntityCandidate> pool;
    for (int i = 0; i < 10; ++i) pool.push_back(candidate("low" + std::to_string(i), 1000 + i));
    for (int i = 0; i < 10; ++i) pool.push_back(candidate("med" + std::to_string(i), 200000 + i));
    for (int i = 0; i < 10; ++i) pool.push_back(candidate("high" + std::to_string(i), 2000000 + i));

    auto first = sample_entities(pool, 6, 42);
    auto second = sample_entities(pool, 6, 42);

    for (Domain domain : {Domain::Low, Domain::Medium, Domain::High}) {
        CAPTURE(to_string(domain));
        REQUIRE(first.at(domain).size() == 6);
        std::set<std::string> names;
        for (size_t i = 0; i < 6; ++i) {
            const EntityCandidate& pick = first.at(domain)[i];
            CHECK(bucket_entity(pick) == domain);
            names.insert(pick.entity.name);
            CHECK(second.at(domain)[i].entity.name == pick.entity.name);  // same seed, same order
        }
        CHECK(names.size() == 6);  // no repeats within a bucket
    }

    SUBCASE("a different seed reorders at least one bucket") {
        auto other = sample_entities(pool, 6, 43);
        bool differs = false;
        for (Domain domain : {Domain::Low, Domain::Medium, Domain::High})
            for (size_t i = 0; i < 6; ++i)
                if (other.at(domain)[i].entity.name != first.at(domain)[i].entity.name)
                    differs = true;
        CHECK(differs);
    }
}

TEST_CASE("entity sampling names the deficient bucket") {
    std::vector<EntityCandidate> pool = {candidate("a", 10), candidate("b", 20),
                                         candidate("m", 200000), candidate("n", 300000),
                                         candidate("o", 400000), candidate("x", 2000000),
                                         candidate("y", 3000000), candidate("z", 4000000)};
    try {
        sample_entities(pool, 3, 7);
        FAIL("expected InsufficientCandidates");
    } catch (const InsufficientCandidates& e) {
        CHECK(e.bucket == "low");
        CHECK(std::string(e.what()).find("low") != std::string::npos);
        CHECK(std::string(e.what()).find("2") != std::string::npos);
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
    CHECK_NOTHROW(sample_entities(pool, 2, 7));
    auto empty = sample_entities(pool, 0, 7);
    CHECK(empty.at(Domain::Low).empty());
}

TEST_CASE("generation prompt embeds the entity name") {
    CHECK(generation_prompt(EntityRef::make("Mount Everest")) ==
          "Please write a brief Wikipedia for Mount Everest.");
}

TEST_CASE("cohens kappa matches the textbook worked example") {
    // 50 items: 20 yes/yes, 5 yes/no, 10 no/yes, 15 no/no -> kappa 0.4
    std::vector<int> a;
    std::vector<int> b;
    auto add = [&](int va, int vb, int times) {
        for (int i = 0; i < times; ++i) {
            a.push_back(va);
            b.push_back(vb);
        }
    };
    add(1, 1, 20);
    add(1, 0, 5);
    add(0, 1, 10);
    add(0, 0, 15);
    CHECK(cohens_kappa(std::span<const int>(a), std::span<const int>(b)) == doctest::Approx(0.4));
}

TEST_CASE("cohens kappa degenerate and error cases") {
    std::vector<int> same = {1, 1, 1};
    CHECK(cohens_kappa(std::span<const int>(same), std::span<const int>(same)) == 1.0);
    std::vector<int> zeros = {0, 0};
    std::vector<int> ones = {1, 1};
    CHECK(cohens_kappa(std::span<const int>(zeros), std::span<const int>(ones)) ==
          doctest::Approx(0.0));
    std::vector<int> shorter = {1};
    CHECK_THROWS_AS(cohens_kappa(std::span<const int>(same), std::span<const int>(shorter)),
                    LengthMismatch);
    std::vector<int> empty;
    CHECK_THROWS_AS(cohens_kappa(std::span<const int>(empty), std::span<const int>(empty)),
                    EmptyInput);
}

TEST_CASE("cohens kappa accepts label vectors") {
    std::vector<Label> a = {Label::Factual, Label::NonFactual, Label::Factual, Label::Unverifiable};
    CHECK(cohens_kappa(a, a) == 1.0);
    std::vector<Label> b = {Label::Factual, Label::Factual, Label::Factual, Label::Unverifiable};
    CHECK(cohens_kappa(a, b) < 1.0);
}

TEST_CASE("cohens kappa agrees with a pair-counting oracle on random instances") {
    std::mt19937 rng(314);
    for (int trial = 0; trial < 50; ++trial) {
        size_t n = 1 + rng() % 30;
        int categories = 2 + static_cast<int>(rng() % 3);
        std::vector<int> a(n);
        std::vector<int> b(n);
        for (size_t i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng() % categories);
            b[i] = static_cast<int>(rng() % categories);
        }
        long long agree = 0;
        long long cross = 0;  // ordered pairs (i, j) with a_i == b_j
        for (size_t i = 0; i < n; ++i) {
            if (a[i] == b[i]) ++agree;
            for (size_t j = 0; j < n; ++j)
                if (a[i] == b[j]) ++cross;
        }
        double p_o = static_cast<double>(agree) / static_cast<double>(n);
        double p_e = static_cast<double>(cross) / static_cast<double>(n * n);
        double expected = 1.0 - p_e == 0.0 ? (p_o == 1.0 ? 1.0 : 0.0) : (p_o - p_e) / (1.0 - p_e);
        double actual = cohens_kappa(std::span<const int>(a), std::span<const int>(b));
        CHECK(actual == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("fleiss kappa matches the classic worked example") {
    std::vector<std::vector<long long>> counts = {
        {0, 0, 0, 0, 14}, {0, 2, 6, 4, 2}, {0, 0, 3, 5, 6}, {0, 3, 9, 2, 0}, {2, 2, 8, 1, 1},
        {7, 7, 0, 0, 0},  {3, 2, 6, 3, 0}, {2, 5, 3, 2, 2}, {6, 5, 2, 1, 0}, {0, 2, 2, 3, 7}};
    CHECK(fleiss_kappa(counts) == doctest::Approx(0.20993070442195522).epsilon(1e-12));
}

TEST_CASE("fleiss kappa degenerate and error cases") {
    CHECK(fleiss_kappa({{3, 0}, {0, 3}}) == doctest::Approx(1.0));
    CHECK(fleiss_kappa({{3, 0}, {3, 0}}) == 1.0);  // single category used, perfect agreement
    CHECK_THROWS_AS(fleiss_kappa({}), EmptyInput);
    CHECK_THROWS_AS(fleiss_kappa({{1, 0}, {0, 1}}), SchemaViolation);        // n == 1
    CHECK_THROWS_AS(fleiss_kappa({{2, 1}, {1, 1}}), UnequalRaterCounts);     // 3 vs 2 ratings
    CHECK_THROWS_AS(fleiss_kappa({{3, -1}, {1, 1}}), SchemaViolation);       // negative count
    SUBCASE("short rows are padded with zero counts") {
        CHECK(fleiss_kappa({{2}, {2}}) == 1.0);
        CHECK(fleiss_kappa({{2}, {2, 0}}) == 1.0);
    }
}

TEST_CASE("fleiss kappa agrees with a rater-pair oracle on random instances") {
    std::mt19937 rng(2718);
    for (int trial = 0; trial < 50; ++trial) {
        size_t items = 2 + rng() % 29;
        int categories = 2 + static_cast<int>(rng() % 3);
        int raters = 2 + static_cast<int>(rng() % 4);
        std::vector<std::vector<int>> assignments(items, std::vector<int>(raters));
        std::vector<std::vector<long long>> counts(items,
                                                   std::vector<long long>(categories, 0));
        for (size_t i = 0; i < items; ++i)
            for (int r = 0; r < raters; ++r) {
                int category = static_cast<int>(rng() % categories);
                assignments[i][r] = category;
                ++counts[i][static_cast<size_t>(category)];
            }

        double p_bar = 0.0;
        for (size_t i = 0; i < items; ++i) {
            long long agreeing = 0;
            for (int r = 0; r < raters; ++r)
                for (int s = 0; s < raters; ++s)
                    if (r != s && assignments[i][r] == assignments[i][s]) ++agreeing;
            p_bar += static_cast<double>(agreeing) /
                     static_cast<double>(raters * (raters - 1));
        }
        p_bar /= static_cast<double>(items);

        double p_e = 0.0;
        for (int c = 0; c < categories; ++c) {
            long long uses = 0;
            for (size_t i = 0; i < items; ++i)
                for (int r = 0; r < raters; ++r)
                    if (assignments[i][r] == c) ++uses;
            double p_j = static_cast<double>(uses) / static_cast<double>(items * raters);
            p_e += p_j * p_j;
        }
        double expected = 1.0 - p_e == 0.0 ? (p_bar == 1.0 ? 1.0 : 0.0) : (p_bar - p_e) / (1.0 - p_e);
        CHECK(fleiss_kappa(counts) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("annotation validation enforces the two-stage rules") {
    std::vector<AnnotationRecord> records;
    records.push_back({"p1", "a1", Label::Factual, std::nullopt, {}});
    records.push_back({"p2", "a1", Label::Unverifiable, Label::NonFactual, {{0, 5, "x"}}});
    records.push_back({"p3", "a1", Label::Unverifiable, std::nullopt, {}});       // error
    records.push_back({"p4", "a1", Label::Unverifiable, Label::Unverifiable, {}});  // error
    records.push_back({"p5", "a1", Label::Factual, Label::Factual, {}});          // error
    records.push_back({"", "a1", Label::Factual, std::nullopt, {}});              // error
    records.push_back({"p7", "", Label::Factual, std::nullopt, {}});              // error
    records.push_back({"p8", "a1", Label::NonFactual, std::nullopt, {}});         // warning
    records.push_back({"p9", "a1", Label::NonFactual, std::nullopt, {{4, 4, ""}}});   // error
    records.push_back({"p10", "a1", Label::NonFactual, std::nullopt,
                       {{0, 6, ""}, {3, 9, ""}}});  // error

    AnnotationValidation validation = validate_annotations(records);

    REQUIRE(validation.finals.size() == 3);
    CHECK(validation.finals[0].passage_id == "p1");
    CHECK(validation.finals[0].label == Label::Factual);
    CHECK(validation.finals[1].passage_id == "p2");
    CHECK(validation.finals[1].label == Label::NonFactual);  // stage 2 resolves
    CHECK(validation.finals[1].marked_spans.size() == 1);
    CHECK(validation.finals[2].passage_id == "p8");

    int errors = 0;
    int warnings = 0;
    for (const AnnotationIssue& issue : validation.issues)
        (issue.is_error ? errors : warnings)++;
    CHECK(errors == 7);
    CHECK(warnings == 1);

    for (const AnnotationIssue& issue : validation.issues) {
        if (issue.passage_id == "p8") {
            CHECK(!issue.is_error);
            CHECK(issue.message.find("no marked spans") != std::string::npos);
        }
        if (issue.passage_id == "p3")
            CHECK(issue.message.find("without a stage-2") != std::string::npos);
    }
}

TEST_CASE("hit count files load strictly") {
    std::vector<EntityCandidate> candidates = load_hit_counts(kFixtures / "hit_counts.tsv");
    REQUIRE(candidates.size() == 12);
    CHECK(candidates[0].entity.name == "Obscure Creek Bridge");
    CHECK(candidates[0].hit_count == 412);
    int low = 0, medium = 0, high = 0;
    for (const EntityCandidate& c : candidates) {
        Domain d = bucket_entity(c);
        (d == Domain::Low ? low : d == Domain::Medium ? medium : high)++;
    }
    CHECK(low == 4);
    CHECK(medium == 4);
    CHECK(high == 4);

    SUBCASE("carriage returns and blank lines are tolerated") {
        auto path = write_temp("rv_hits_crlf.tsv", "Paris\t100\r\n\nTokyo\t200\n");
        auto loaded = load_hit_counts(path);
        REQUIRE(loaded.size() == 2);
        CHECK(loaded[0].hit_count == 100);
    }
    SUBCASE("malformed lines raise with their line number") {
        CHECK_THROWS_WITH_AS(load_hit_counts(write_temp("rv_hits_notab.tsv", "Paris 100\n")),
                             doctest::Contains("line 1"), SchemaViolation);
        CHECK_THROWS_WITH_AS(load_hit_counts(write_temp("rv_hits_badnum.tsv", "Paris\t1e5\n")),
                             doctest::Contains("bad count"), SchemaViolation);
        CHECK_THROWS_WITH_AS(load_hit_counts(write_temp("rv_hits_neg.tsv", "Paris\t-4\n")),
                             doctest::Contains("negative"), SchemaViolation);
        CHECK_THROWS_WITH_AS(load_hit_counts(write_temp("rv_hits_noent.tsv", "\t44\n")),
                             doctest::Contains("empty entity"), SchemaViolation);
        CHECK_THROWS_AS(load_hit_counts(kFixtures / "missing.tsv"), SchemaViolation);
    }
}
