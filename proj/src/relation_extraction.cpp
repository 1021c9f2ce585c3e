#include "vulnkg/relation_extraction.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "vulnkg/util.hpp"

namespace vulnkg {

const char* to_string(EntityType t) {
    switch (t) {
        case EntityType::VENDOR: return "VENDOR";
        case EntityType::PRODUCT: return "PRODUCT";
        case EntityType::VERSION: return "VERSION";
        case EntityType::RELEVANT_TERM: return "RELEVANT_TERM";
        case EntityType::CVE: return "CVE";
        case EntityType::CWE: return "CWE";
    }
    return "RELEVANT_TERM";
}

EntityType entity_type_from_string(const std::string& s) {
    if (s == "VENDOR") return EntityType::VENDOR;
    if (s == "PRODUCT") return EntityType::PRODUCT;
    if (s == "VERSION") return EntityType::VERSION;
    if (s == "RELEVANT_TERM") return EntityType::RELEVANT_TERM;
    if (s == "CVE") return EntityType::CVE;
    if (s == "CWE") return EntityType::CWE;
    throw std::runtime_error("unknown entity type: " + s);
}

std::string entity_name(const EntitySpan& span) {
    switch (span.type) {
        case EntityType::VENDOR: return "vendor:" + span.surface;
        case EntityType::PRODUCT: return "product:" + span.surface;
        case EntityType::VERSION: return "version:" + span.surface;
        case EntityType::RELEVANT_TERM: return "term:" + span.surface;
        case EntityType::CVE:
        case EntityType::CWE: return span.surface;
    }
    return span.surface;
}

Ontology Ontology::default_edges() {
    Ontology o;
    o.add_edge(EntityType::VENDOR, "has_product", EntityType::PRODUCT);
    o.add_edge(EntityType::PRODUCT, "has_version", EntityType::VERSION);
    o.add_edge(EntityType::CVE, "has_weakness", EntityType::CWE);
    o.add_edge(EntityType::CVE, "has_vendor", EntityType::VENDOR);
    o.add_edge(EntityType::CVE, "affects_product", EntityType::PRODUCT);
    o.add_edge(EntityType::CVE, "affects_version", EntityType::VERSION);
    o.add_edge(EntityType::RELEVANT_TERM, "describes", EntityType::CVE);
    return o;
}

void Ontology::add_edge(EntityType head, const std::string& relation, EntityType tail) {
    for (const OntologyEdge& e : edges_) {
        if (e.head == head && e.tail == tail) {
            throw std::invalid_argument("ontology already has an edge for this type pair: " +
                                        std::string(to_string(head)) + " -> " + to_string(tail));
        }
        if (e.relation == relation) {
            throw std::invalid_argument("duplicate relation name: " + relation);
        }
    }
    edges_.push_back({head, relation, tail});
}

std::optional<std::string> Ontology::relation_between(EntityType head, EntityType tail) const {
    for (const OntologyEdge& e : edges_) {
        if (e.head == head && e.tail == tail) return e.relation;
    }
    return std::nullopt;
}

namespace {

EntityType to_entity_type(Domain d) {
    switch (d) {
        case Domain::VENDOR: return EntityType::VENDOR;
        case Domain::PRODUCT: return EntityType::PRODUCT;
        case Domain::VERSION: return EntityType::VERSION;
        case Domain::RELEVANT_TERM: return EntityType::RELEVANT_TERM;
        case Domain::NONE: break;
    }
    throw std::logic_error("no entity type for NONE");
}

}  // namespace

std::vector<EntitySpan> assemble_entities(const std::vector<LabeledToken>& labeled,
                                          const std::string& cve_id,
                                          const std::vector<std::string>& cwe_ids) {
    if (!is_iob_well_formed(labeled)) {
        throw std::invalid_argument("assemble_entities: labels violate IOB well-formedness");
    }
    std::vector<EntitySpan> spans;
    size_t i = 0;
    while (i < labeled.size()) {
        if (labeled[i].iob != Iob::B) {
            ++i;
            continue;
        }
        EntitySpan span;
        span.type = to_entity_type(labeled[i].domain);
        span.cve_id = cve_id;
        span.position = static_cast<int>(i);
        std::string surface = labeled[i].token.text;
        size_t j = i + 1;
        while (j < labeled.size() && labeled[j].iob == Iob::I) {
            surface += ' ';
            surface += labeled[j].token.text;
            ++j;
        }
        span.surface = to_lower(surface);
        spans.push_back(std::move(span));
        i = j;
    }
    spans.push_back({cve_id, EntityType::CVE, cve_id, -1});
    for (const std::string& cwe : cwe_ids) {
        spans.push_back({cwe, EntityType::CWE, cve_id, -1});
    }
    return spans;
}

std::vector<Triple> extract_triples(const std::vector<EntitySpan>& spans,
                                    const Ontology& ontology) {
    const EntitySpan* cve = nullptr;
    for (const EntitySpan& s : spans) {
        if (s.type == EntityType::CVE) {
            cve = &s;
            break;
        }
    }

    std::set<Triple> out;
    auto emit = [&out, &ontology](const EntitySpan& head, const EntitySpan& tail) {
        std::optional<std::string> rel = ontology.relation_between(head.type, tail.type);
        if (rel) out.insert({entity_name(head), *rel, entity_name(tail)});
    };

    // Text spans in word order for the nearest-preceding chains.
    std::vector<const EntitySpan*> ordered;
    for (const EntitySpan& s : spans) {
        if (s.position >= 0) ordered.push_back(&s);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const EntitySpan* a, const EntitySpan* b) { return a->position < b->position; });

    auto nearest_preceding = [&ordered](size_t idx, EntityType wanted) -> const EntitySpan* {
        for (size_t k = idx; k-- > 0;) {
            if (ordered[k]->type == wanted) return ordered[k];
        }
        return nullptr;
    };

    for (size_t idx = 0; idx < ordered.size(); ++idx) {
        const EntitySpan& s = *ordered[idx];
        if (s.type == EntityType::PRODUCT) {
            if (const EntitySpan* v = nearest_preceding(idx, EntityType::VENDOR)) emit(*v, s);
        } else if (s.type == EntityType::VERSION) {
            if (const EntitySpan* p = nearest_preceding(idx, EntityType::PRODUCT)) emit(*p, s);
        }
    }

    for (const EntitySpan& s : spans) {
        switch (s.type) {
            case EntityType::VENDOR:
            case EntityType::PRODUCT:
            case EntityType::VERSION:
                if (cve) emit(*cve, s);
                break;
            case EntityType::RELEVANT_TERM:
                if (cve) emit(s, *cve);
                break;
            case EntityType::CWE:
                if (cve) emit(*cve, s);
                break;
            case EntityType::CVE:
                break;
        }
    }
    return {out.begin(), out.end()};
}

std::string triples_to_tsv(const std::vector<Triple>& triples) {
    std::string out;
    for (const Triple& t : triples) {
        out += t.head;
        out += '\t';
        out += t.relation;
        out += '\t';
        out += t.tail;
        out += '\n';
    }
    return out;
}

std::vector<Triple> triples_from_tsv(const std::string& text) {
    std::vector<Triple> out;
    for (const std::string& line : split(text, '\n')) {
        if (line.empty()) continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 3) throw std::runtime_error("bad triple line: " + line);
        if (cols[0].empty() || cols[1].empty() || cols[2].empty()) {
            throw std::runtime_error("triple with empty component: " + line);
        }
        out.push_back({cols[0], cols[1], cols[2]});
    }
    return out;
}

std::vector<Triple> sample_for_validation(const std::vector<Triple>& triples, size_t n,
                                          std::uint32_t seed) {
    if (n > triples.size()) {
        throw std::invalid_argument("sample_for_validation: n exceeds triple count");
    }
    // Partial Fisher-Yates over indices, then restore input order. Draws use
    // plain modulo so the permutation is pinned by mt19937 alone.
    std::vector<size_t> idx(triples.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937 rng(seed);
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + rng() % (idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    std::vector<Triple> out;
    out.reserve(n);
    for (size_t i : idx) out.push_back(triples[i]);
    return out;
}

std::string review_sheet(const std::vector<Triple>& sample) {
    std::string out = "head\trelation\ttail\tverdict\n";
    for (const Triple& t : sample) {
        out += t.head + "\t" + t.relation + "\t" + t.tail + "\t\n";
    }
    return out;
}

ValidationScore score_review_sheet(const std::string& sheet_text) {
    ValidationScore score;
    std::vector<std::string> lines = split(sheet_text, '\n');
    for (size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty()) continue;
        if (i == 0 && starts_with(line, "head\t")) continue;
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() < 4) throw std::runtime_error("review sheet row needs 4 columns: " + line);
        std::string verdict = to_lower(cols[3]);
        if (verdict.empty()) continue;
        if (verdict == "1" || verdict == "y" || verdict == "yes" || verdict == "true" ||
            verdict == "correct") {
            ++score.rated;
            ++score.correct;
        } else if (verdict == "0" || verdict == "n" || verdict == "no" || verdict == "false" ||
                   verdict == "incorrect") {
            ++score.rated;
        } else {
            throw std::runtime_error("unrecognized verdict '" + cols[3] + "'");
        }
    }
    if (score.rated > 0) {
        score.defined = true;
        score.precision = static_cast<double>(score.correct) / score.rated;
    }
    return score;
}

}  // namespace vulnkg
