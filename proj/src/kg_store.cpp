#include "vulnkg/kg_store.hpp"

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <stdexcept>

#include "vulnkg/util.hpp"

namespace vulnkg {

int KnowledgeGraph::entity_id(const std::string& name) const {
    auto it = entity_ids_.find(name);
    if (it == entity_ids_.end()) throw std::runtime_error("unknown entity: " + name);
    return it->second;
}

int KnowledgeGraph::relation_id(const std::string& name) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) throw std::runtime_error("unknown relation: " + name);
    return it->second;
}

Triple KnowledgeGraph::to_triple(const TripleId& t) const {
    return {entity_name(t.h), relation_name(t.r), entity_name(t.t)};
}

std::uint64_t KnowledgeGraph::entity_index_hash() const {
    return fnv1a64(join(entities_, "\n"));
}

std::uint64_t KnowledgeGraph::relation_index_hash() const {
    return fnv1a64(join(relations_, "\n"));
}

void KnowledgeGraph::rebuild_maps() {
    entity_ids_.clear();
    relation_ids_.clear();
    for (size_t i = 0; i < entities_.size(); ++i) entity_ids_[entities_[i]] = static_cast<int>(i);
    for (size_t i = 0; i < relations_.size(); ++i) {
        relation_ids_[relations_[i]] = static_cast<int>(i);
    }
    if (entity_ids_.size() != entities_.size() || relation_ids_.size() != relations_.size()) {
        throw std::runtime_error("duplicate names in graph index");
    }
}

KnowledgeGraph build_graph(const std::vector<Triple>& triples) {
    std::set<std::string> entity_names;
    std::set<std::string> relation_names;
    for (const Triple& t : triples) {
        if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
            throw std::invalid_argument("build_graph: triple with empty component");
        }
        entity_names.insert(t.head);
        entity_names.insert(t.tail);
        relation_names.insert(t.relation);
    }
    KnowledgeGraph kg;
    kg.entities_.assign(entity_names.begin(), entity_names.end());
    kg.relations_.assign(relation_names.begin(), relation_names.end());
    kg.rebuild_maps();

    std::set<TripleId> unique;
    for (const Triple& t : triples) {
        unique.insert({kg.entity_ids_.at(t.head), kg.relation_ids_.at(t.relation),
                       kg.entity_ids_.at(t.tail)});
    }
    kg.triples_.assign(unique.begin(), unique.end());
    return kg;
}

KnowledgeGraph kg_from_parts(std::vector<std::string> entities,
                             std::vector<std::string> relations, std::vector<TripleId> triples) {
    KnowledgeGraph kg;
    kg.entities_ = std::move(entities);
    kg.relations_ = std::move(relations);
    kg.rebuild_maps();
    for (const TripleId& t : triples) {
        if (t.h < 0 || t.h >= static_cast<int>(kg.entities_.size()) || t.t < 0 ||
            t.t >= static_cast<int>(kg.entities_.size()) || t.r < 0 ||
            t.r >= static_cast<int>(kg.relations_.size())) {
            throw std::runtime_error("triple id out of range");
        }
    }
    kg.triples_ = std::move(triples);
    return kg;
}

namespace {

bool ends_with_reverse(const std::string& s) {
    static const std::string suffix = "_reverse";
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_not_augmented(const KnowledgeGraph& kg) {
    for (const std::string& r : kg.relations()) {
        if (ends_with_reverse(r)) {
            throw std::invalid_argument("graph already contains reverse relation '" + r +
                                        "'; refusing to augment twice");
        }
    }
}

std::vector<TripleId> add_reverses(const std::vector<TripleId>& triples, int n_base_relations) {
    std::vector<TripleId> out;
    out.reserve(triples.size() * 2);
    out.insert(out.end(), triples.begin(), triples.end());
    for (const TripleId& t : triples) {
        out.push_back({t.t, t.r + n_base_relations, t.h});
    }
    return out;
}

}  // namespace

KnowledgeGraph augment_reverse(const KnowledgeGraph& kg) {
    check_not_augmented(kg);
    const int n_rel = static_cast<int>(kg.num_relations());
    std::vector<std::string> relations = kg.relations();
    for (int i = 0; i < n_rel; ++i) relations.push_back(kg.relations()[static_cast<size_t>(i)] + "_reverse");
    return kg_from_parts(kg.entities(), std::move(relations), add_reverses(kg.triples(), n_rel));
}

std::pair<KnowledgeGraph, SplitSet> augment_reverse(const KnowledgeGraph& kg,
                                                    const SplitSet& splits) {
    KnowledgeGraph widened = augment_reverse(kg);
    const int n_rel = static_cast<int>(kg.num_relations());
    SplitSet out;
    out.train = add_reverses(splits.train, n_rel);
    out.valid = add_reverses(splits.valid, n_rel);
    out.test = add_reverses(splits.test, n_rel);
    return {std::move(widened), std::move(out)};
}

SplitSet split_triples(const KnowledgeGraph& kg, const SplitRatios& ratios, std::uint32_t seed) {
    const double sum = ratios.train + ratios.valid + ratios.test;
    if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 || sum < 0.999 || sum > 1.001) {
        throw std::invalid_argument("split ratios must be non-negative and sum to 1");
    }
    std::vector<TripleId> shuffled = kg.triples();
    std::mt19937 rng(seed);
    for (size_t i = shuffled.size(); i > 1; --i) {
        size_t j = rng() % i;
        std::swap(shuffled[i - 1], shuffled[j]);
    }
    const size_t n = shuffled.size();
    auto cum = [n](double r) { return static_cast<size_t>(r * static_cast<double>(n) + 0.5); };
    size_t n_train = cum(ratios.train);
    size_t n_valid = cum(ratios.train + ratios.valid) - n_train;

    SplitSet s;
    s.train.assign(shuffled.begin(), shuffled.begin() + static_cast<long>(n_train));
    s.valid.assign(shuffled.begin() + static_cast<long>(n_train),
                   shuffled.begin() + static_cast<long>(n_train + n_valid));
    s.test.assign(shuffled.begin() + static_cast<long>(n_train + n_valid), shuffled.end());
    return s;
}

namespace {

std::string triples_tsv(const KnowledgeGraph& kg, const std::vector<TripleId>& triples) {
    std::string out;
    for (const TripleId& t : triples) {
        out += kg.entity_name(t.h);
        out += '\t';
        out += kg.relation_name(t.r);
        out += '\t';
        out += kg.entity_name(t.t);
        out += '\n';
    }
    return out;
}

std::string index_tsv(const std::vector<std::string>& names) {
    std::string out;
    for (size_t i = 0; i < names.size(); ++i) {
        out += std::to_string(i);
        out += '\t';
        out += names[i];
        out += '\n';
    }
    return out;
}

std::vector<std::string> read_index_tsv(const std::string& path) {
    std::vector<std::string> names;
    for (const std::string& line : split(read_file(path), '\n')) {
        if (line.empty()) continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 2) throw std::runtime_error("bad index line in " + path);
        if (std::stoul(cols[0]) != names.size()) {
            throw std::runtime_error("non-dense ids in " + path);
        }
        names.push_back(cols[1]);
    }
    return names;
}

std::vector<TripleId> read_split_tsv(const std::string& path, const KnowledgeGraph& kg) {
    std::vector<TripleId> out;
    for (const Triple& t : triples_from_tsv(read_file(path))) {
        out.push_back({kg.entity_id(t.head), kg.relation_id(t.relation), kg.entity_id(t.tail)});
    }
    return out;
}

}  // namespace

void save_kg_dir(const KnowledgeGraph& kg, const SplitSet& splits, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir + "/entities.tsv", index_tsv(kg.entities()));
    write_file(dir + "/relations.tsv", index_tsv(kg.relations()));
    write_file(dir + "/train.tsv", triples_tsv(kg, splits.train));
    write_file(dir + "/valid.tsv", triples_tsv(kg, splits.valid));
    write_file(dir + "/test.tsv", triples_tsv(kg, splits.test));
}

std::pair<KnowledgeGraph, SplitSet> load_kg_dir(const std::string& dir) {
    std::vector<std::string> entities = read_index_tsv(dir + "/entities.tsv");
    std::vector<std::string> relations = read_index_tsv(dir + "/relations.tsv");
    KnowledgeGraph kg = kg_from_parts(std::move(entities), std::move(relations), {});
    SplitSet splits;
    splits.train = read_split_tsv(dir + "/train.tsv", kg);
    splits.valid = read_split_tsv(dir + "/valid.tsv", kg);
    splits.test = read_split_tsv(dir + "/test.tsv", kg);

    std::vector<TripleId> all;
    all.insert(all.end(), splits.train.begin(), splits.train.end());
    all.insert(all.end(), splits.valid.begin(), splits.valid.end());
    all.insert(all.end(), splits.test.begin(), splits.test.end());
    kg = kg_from_parts(kg.entities(), kg.relations(), std::move(all));
    return {std::move(kg), std::move(splits)};
}

}  // namespace vulnkg
