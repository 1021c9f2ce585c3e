#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>

#include "vulnkg/kg_store.hpp"
#include "vulnkg/util.hpp"

using namespace vulnkg;

namespace {

std::vector<Triple> random_triples(std::mt19937& rng, size_t n) {
    std::vector<Triple> out;
    for (size_t i = 0; i < n; ++i) {
        out.push_back({"e" + std::to_string(rng() % (n + 3)),
                       "r" + std::to_string(rng() % 5),
                       "e" + std::to_string(rng() % (n + 3))});
    }
    return out;
}

std::string slurp_dir(const std::string& dir) {
    std::string all;
    for (const char* f : {"entities.tsv", "relations.tsv", "train.tsv", "valid.tsv", "test.tsv"}) {
        all += read_file(dir + "/" + f);
        all += '\x01';
    }
    return all;
}

}  // namespace

TEST_CASE("build_graph: counts, dedup, lexicographic ids") {
    std::vector<Triple> triples = {
        {"b", "r1", "a"},
        {"a", "r2", "c"},
        {"b", "r1", "d"},
        {"b", "r1", "a"},  // duplicate
    };
    KnowledgeGraph kg = build_graph(triples);
    CHECK(kg.num_entities() == 4);
    CHECK(kg.triples().size() == 3);
    CHECK(kg.entity_name(0) == "a");
    CHECK(kg.entity_name(3) == "d");
    CHECK(kg.relation_name(0) == "r1");
    CHECK(kg.entity_id("c") == 2);
}

TEST_CASE("augment_reverse: definition and exact doubling") {
    KnowledgeGraph kg = build_graph({{"a", "has_product", "b"}});
    KnowledgeGraph aug = augment_reverse(kg);
    CHECK(aug.triples().size() == 2);
    CHECK(aug.num_relations() == 2);
    Triple rev = aug.to_triple(aug.triples()[1]);
    CHECK(rev == Triple{"b", "has_product_reverse", "a"});
}

TEST_CASE("augment_reverse: empty graph stays empty") {
    KnowledgeGraph kg = build_graph({});
    KnowledgeGraph aug = augment_reverse(kg);
    CHECK(aug.triples().empty());
    CHECK(aug.num_relations() == 0);
}

TEST_CASE("augment_reverse refuses to run twice") {
    KnowledgeGraph kg = build_graph({{"a", "r", "b"}});
    KnowledgeGraph aug = augment_reverse(kg);
    CHECK_THROWS_WITH_AS(augment_reverse(aug), doctest::Contains("_reverse"),
                         std::invalid_argument);
}

TEST_CASE("augment_reverse doubles any graph, self-loops included") {
    std::mt19937 rng(3);
    for (size_t n : {size_t(1), size_t(10), size_t(200)}) {
        std::vector<Triple> triples = random_triples(rng, n);
        triples.push_back({"e0", "r0", "e0"});  // self-loop
        KnowledgeGraph kg = build_graph(triples);
        KnowledgeGraph aug = augment_reverse(kg);
        CHECK(aug.triples().size() == 2 * kg.triples().size());
        CHECK(aug.num_relations() == 2 * kg.num_relations());
        CHECK(aug.num_entities() == kg.num_entities());
    }
}

TEST_CASE("split_triples: exact proportions on ten triples") {
    std::vector<Triple> triples;
    for (int i = 0; i < 10; ++i) triples.push_back({"h" + std::to_string(i), "r", "t"});
    KnowledgeGraph kg = build_graph(triples);
    SplitSet s = split_triples(kg, {0.8, 0.1, 0.1}, 5);
    CHECK(s.train.size() == 8);
    CHECK(s.valid.size() == 1);
    CHECK(s.test.size() == 1);
}

TEST_CASE("split_triples: deterministic under a fixed seed") {
    std::mt19937 rng(9);
    KnowledgeGraph kg = build_graph(random_triples(rng, 120));
    SplitSet a = split_triples(kg, {0.8, 0.1, 0.1}, 7);
    SplitSet b = split_triples(kg, {0.8, 0.1, 0.1}, 7);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK(a.test == b.test);
}

TEST_CASE("split_triples: invalid ratios") {
    KnowledgeGraph kg = build_graph({{"a", "r", "b"}});
    CHECK_THROWS_AS(split_triples(kg, {0.5, 0.1, 0.1}, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_triples(kg, {1.2, -0.1, -0.1}, 1), std::invalid_argument);
}

TEST_CASE("split_triples: partition within one of exact proportions") {
    std::mt19937 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        size_t n = 1 + rng() % 400;
        KnowledgeGraph kg = build_graph(random_triples(rng, n));
        const double total = static_cast<double>(kg.triples().size());
        SplitSet s = split_triples(kg, {0.8, 0.1, 0.1}, static_cast<std::uint32_t>(trial));
        CHECK(std::fabs(static_cast<double>(s.train.size()) - 0.8 * total) <= 1.0);
        CHECK(std::fabs(static_cast<double>(s.valid.size()) - 0.1 * total) <= 1.0);
        CHECK(std::fabs(static_cast<double>(s.test.size()) - 0.1 * total) <= 1.0);
        // disjoint and complete
        std::set<TripleId> all(s.train.begin(), s.train.end());
        all.insert(s.valid.begin(), s.valid.end());
        all.insert(s.test.begin(), s.test.end());
        CHECK(all.size() == kg.triples().size());
        CHECK(s.train.size() + s.valid.size() + s.test.size() == kg.triples().size());
    }
}

TEST_CASE("no base-triple leakage after split-then-augment") {
    std::mt19937 rng(17);
    KnowledgeGraph kg = build_graph(random_triples(rng, 300));
    SplitSet base = split_triples(kg, {0.8, 0.1, 0.1}, 3);
    auto [aug, splits] = augment_reverse(kg, base);

    std::set<TripleId> train_set(splits.train.begin(), splits.train.end());
    const int n_rel = static_cast<int>(kg.num_relations());
    for (const TripleId& t : splits.test) {
        CHECK(train_set.count(t) == 0);
        // neither the triple nor its reverse may appear in train
        TripleId rev{t.t, t.r < n_rel ? t.r + n_rel : t.r - n_rel, t.h};
        CHECK(train_set.count(rev) == 0);
    }
    CHECK(splits.train.size() == 2 * base.train.size());
    CHECK(splits.test.size() == 2 * base.test.size());
}

TEST_CASE("kg directory round-trip is byte-identical") {
    std::mt19937 rng(21);
    KnowledgeGraph kg = build_graph(random_triples(rng, 150));
    SplitSet base = split_triples(kg, {0.8, 0.1, 0.1}, 11);
    auto [aug, splits] = augment_reverse(kg, base);

    namespace fs = std::filesystem;
    std::string dir1 = (fs::temp_directory_path() / "vulnkg_kg_rt1").string();
    std::string dir2 = (fs::temp_directory_path() / "vulnkg_kg_rt2").string();
    save_kg_dir(aug, splits, dir1);
    auto [loaded, loaded_splits] = load_kg_dir(dir1);
    save_kg_dir(loaded, loaded_splits, dir2);
    CHECK(slurp_dir(dir1) == slurp_dir(dir2));
    CHECK(loaded.num_entities() == aug.num_entities());
    CHECK(loaded_splits.train == splits.train);
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("graph index hashes identify the index") {
    KnowledgeGraph a = build_graph({{"a", "r", "b"}});
    KnowledgeGraph b = build_graph({{"a", "r", "c"}});
    CHECK(a.entity_index_hash() != b.entity_index_hash());
    CHECK(a.relation_index_hash() == b.relation_index_hash());
}
