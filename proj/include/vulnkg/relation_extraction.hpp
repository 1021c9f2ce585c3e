#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vulnkg/distant_labeling.hpp"

namespace vulnkg {

enum class EntityType { VENDOR, PRODUCT, VERSION, RELEVANT_TERM, CVE, CWE };

const char* to_string(EntityType t);
EntityType entity_type_from_string(const std::string& s);

/// A concatenated multi-token entity. Text-derived surfaces are lowercased and
/// single-space joined; CVE/CWE ids stay verbatim. position is the index of the
/// first token (-1 for the metadata-derived CVE/CWE spans).
struct EntitySpan {
    std::string surface;
    EntityType type = EntityType::RELEVANT_TERM;
    std::string cve_id;
    int position = -1;

    bool operator==(const EntitySpan&) const = default;
};

/// Graph node name: text entities are namespaced by type ("vendor:red hat") so
/// identical surfaces merge across CVEs; CVE/CWE ids are already self-namespacing.
std::string entity_name(const EntitySpan& span);

struct OntologyEdge {
    EntityType head;
    std::string relation;
    EntityType tail;

    bool operator==(const OntologyEdge&) const = default;
};

class Ontology {
public:
    /// vendor-has_product-product, product-has_version-version, the CVE links,
    /// and term-describes-CVE.
    static Ontology default_edges();

    void add_edge(EntityType head, const std::string& relation, EntityType tail);
    std::optional<std::string> relation_between(EntityType head, EntityType tail) const;
    const std::vector<OntologyEdge>& edges() const { return edges_; }

private:
    std::vector<OntologyEdge> edges_;
};

struct Triple {
    std::string head;
    std::string relation;
    std::string tail;

    bool operator==(const Triple&) const = default;
    bool operator<(const Triple& o) const {
        if (head != o.head) return head < o.head;
        if (relation != o.relation) return relation < o.relation;
        return tail < o.tail;
    }
};

/// Each maximal B(I)* run of one domain becomes a span, plus one CVE span per
/// record and one CWE span per id. Throws on malformed IOB input.
std::vector<EntitySpan> assemble_entities(const std::vector<LabeledToken>& labeled,
                                          const std::string& cve_id,
                                          const std::vector<std::string>& cwe_ids);

/// Word-order chains (product to its nearest preceding vendor, version to its
/// nearest preceding product), CVE links for every text span, term-describes-CVE,
/// and CVE-has_weakness-CWE. Emits only relations the ontology licenses;
/// duplicates removed, output sorted.
std::vector<Triple> extract_triples(const std::vector<EntitySpan>& spans,
                                    const Ontology& ontology);

/// TSV: head<TAB>relation<TAB>tail.
std::string triples_to_tsv(const std::vector<Triple>& triples);
std::vector<Triple> triples_from_tsv(const std::string& text);

/// Uniform sample without replacement, reproducible under seed, kept in input
/// order. Throws if n exceeds the population.
std::vector<Triple> sample_for_validation(const std::vector<Triple>& triples, size_t n,
                                          std::uint32_t seed);

/// Review sheet for a sample: the triple TSV plus a blank verdict column.
std::string review_sheet(const std::vector<Triple>& sample);

struct ValidationScore {
    size_t rated = 0;
    size_t correct = 0;
    bool defined = false;
    double precision = 0.0;
};

/// Reads back a filled review sheet. Verdicts: 1/y/yes/true/correct count as
/// correct, 0/n/no/false/incorrect as wrong, blank rows are skipped.
ValidationScore score_review_sheet(const std::string& sheet_text);

}  // namespace vulnkg
