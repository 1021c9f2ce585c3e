#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vulnkg/distant_labeling.hpp"
#include "vulnkg/kg_store.hpp"
#include "vulnkg/kge_tucker.hpp"
#include "vulnkg/relation_extraction.hpp"

namespace vulnkg {

/// Whole-pipeline configuration, read from a JSON file (comments allowed) with
/// one section per module. Defaults reproduce the published settings.
struct PipelineConfig {
    // paths
    std::string feeds_dir = "feeds";
    std::string gazetteer_path = "data/gazetteer.txt";
    std::string work_dir = "work";

    // ingest
    bool require_metadata = false;  // drop records with neither CPEs nor CWEs

    // labeling
    std::vector<std::string> version_cues = default_version_cues();

    // ner
    int ner_epochs = 5;
    size_t ner_train_subset = 4000;
    size_t ner_eval_subset = 1000;
    std::uint32_t ner_seed = 13;

    // extract
    std::string extract_source = "distant";  // "distant" or "ner"

    // ontology (empty = built-in default edges)
    std::vector<OntologyEdge> ontology_edges;

    // split
    SplitRatios ratios;
    std::uint32_t split_seed = 7;
    bool augment_before_split = false;  // literal published order; leaks reverses

    // kge
    TuckerConfig kge;

    // eval
    RankingMode eval_mode = RankingMode::Filtered;
    std::vector<std::string> excluded_relations;

    static PipelineConfig from_file(const std::string& path);
    static PipelineConfig from_json_text(const std::string& text);

    /// Checks field constraints and that referenced input paths exist.
    /// Throws std::runtime_error naming the offending field.
    void validate(bool check_paths = true) const;

    Ontology ontology() const;

    /// Canonical JSON rendering (sorted keys), used for config hashing.
    std::string to_json_text() const;
    std::uint64_t hash() const;
};

}  // namespace vulnkg
