#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "vulnkg/relation_extraction.hpp"

namespace vulnkg {

struct TripleId {
    int h = 0;
    int r = 0;
    int t = 0;

    bool operator==(const TripleId&) const = default;
    bool operator<(const TripleId& o) const {
        if (h != o.h) return h < o.h;
        if (r != o.r) return r < o.r;
        return t < o.t;
    }
};

/// Dense-indexed triple store. Index assignment is lexicographic over names so
/// rebuilding from the same triples reproduces the same ids.
class KnowledgeGraph {
public:
    int entity_id(const std::string& name) const;
    int relation_id(const std::string& name) const;
    const std::string& entity_name(int id) const { return entities_.at(static_cast<size_t>(id)); }
    const std::string& relation_name(int id) const {
        return relations_.at(static_cast<size_t>(id));
    }
    bool has_entity(const std::string& name) const { return entity_ids_.count(name) > 0; }
    bool has_relation(const std::string& name) const { return relation_ids_.count(name) > 0; }

    size_t num_entities() const { return entities_.size(); }
    size_t num_relations() const { return relations_.size(); }
    const std::vector<std::string>& entities() const { return entities_; }
    const std::vector<std::string>& relations() const { return relations_; }
    const std::vector<TripleId>& triples() const { return triples_; }

    Triple to_triple(const TripleId& t) const;

    /// FNV-1a over the newline-joined index, used to pair checkpoints with graphs.
    std::uint64_t entity_index_hash() const;
    std::uint64_t relation_index_hash() const;

    friend KnowledgeGraph build_graph(const std::vector<Triple>& triples);
    friend KnowledgeGraph augment_reverse(const KnowledgeGraph& kg);
    friend KnowledgeGraph kg_from_parts(std::vector<std::string> entities,
                                        std::vector<std::string> relations,
                                        std::vector<TripleId> triples);

private:
    void rebuild_maps();

    std::vector<std::string> entities_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, int> entity_ids_;
    std::unordered_map<std::string, int> relation_ids_;
    std::vector<TripleId> triples_;
};

KnowledgeGraph build_graph(const std::vector<Triple>& triples);

/// Assembles a graph from explicit parts (loader path); validates id ranges.
KnowledgeGraph kg_from_parts(std::vector<std::string> entities,
                             std::vector<std::string> relations, std::vector<TripleId> triples);

struct SplitSet {
    std::vector<TripleId> train;
    std::vector<TripleId> valid;
    std::vector<TripleId> test;
};

struct SplitRatios {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
};

/// Adds (t, r_reverse, h) for every triple; relation and triple counts double
/// exactly. Errors if any relation already ends in "_reverse".
KnowledgeGraph augment_reverse(const KnowledgeGraph& kg);

/// Same augmentation applied per split: relation index doubles once, each split's
/// triples double. Returns the widened graph and the augmented splits.
std::pair<KnowledgeGraph, SplitSet> augment_reverse(const KnowledgeGraph& kg,
                                                    const SplitSet& splits);

/// Uniform random partition of the graph's triples. Sizes follow cumulative
/// rounding, so each is within one of its exact proportion.
SplitSet split_triples(const KnowledgeGraph& kg, const SplitRatios& ratios, std::uint32_t seed);

/// Directory layout: entities.tsv / relations.tsv ("id<TAB>name") and
/// train.tsv / valid.tsv / test.tsv (string triples).
void save_kg_dir(const KnowledgeGraph& kg, const SplitSet& splits, const std::string& dir);
std::pair<KnowledgeGraph, SplitSet> load_kg_dir(const std::string& dir);

}  // namespace vulnkg
