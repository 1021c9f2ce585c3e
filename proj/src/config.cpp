#include "vulnkg/config.hpp"

#include <json.hpp>

#include <stdexcept>

#include "vulnkg/util.hpp"

namespace vulnkg {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& section, const char* key, T& out) {
    if (section.contains(key)) out = section.at(key).get<T>();
}

void read_seed(const json& section, const char* key, std::uint32_t& out) {
    if (section.contains(key)) out = section.at(key).get<std::uint32_t>();
}

}  // namespace

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    PipelineConfig c;
    if (doc.contains("paths")) {
        const json& s = doc["paths"];
        read_field(s, "feeds_dir", c.feeds_dir);
        read_field(s, "gazetteer", c.gazetteer_path);
        read_field(s, "work_dir", c.work_dir);
    }
    if (doc.contains("ingest")) {
        read_field(doc["ingest"], "require_metadata", c.require_metadata);
    }
    if (doc.contains("labeling")) {
        read_field(doc["labeling"], "version_cues", c.version_cues);
    }
    if (doc.contains("ner")) {
        const json& s = doc["ner"];
        read_field(s, "epochs", c.ner_epochs);
        read_field(s, "train_subset", c.ner_train_subset);
        read_field(s, "eval_subset", c.ner_eval_subset);
        read_seed(s, "seed", c.ner_seed);
    }
    if (doc.contains("extract")) {
        read_field(doc["extract"], "source", c.extract_source);
    }
    if (doc.contains("ontology") && doc["ontology"].contains("edges")) {
        for (const json& e : doc["ontology"]["edges"]) {
            if (!e.is_array() || e.size() != 3) {
                throw std::runtime_error("ontology.edges entries must be [head, relation, tail]");
            }
            c.ontology_edges.push_back({entity_type_from_string(e[0].get<std::string>()),
                                        e[1].get<std::string>(),
                                        entity_type_from_string(e[2].get<std::string>())});
        }
    }
    if (doc.contains("split")) {
        const json& s = doc["split"];
        read_field(s, "train", c.ratios.train);
        read_field(s, "valid", c.ratios.valid);
        read_field(s, "test", c.ratios.test);
        read_seed(s, "seed", c.split_seed);
        read_field(s, "augment_before_split", c.augment_before_split);
    }
    if (doc.contains("kge")) {
        const json& s = doc["kge"];
        read_field(s, "num_iterations", c.kge.num_iterations);
        read_field(s, "edim", c.kge.edim);
        read_field(s, "rdim", c.kge.rdim);
        read_field(s, "lr", c.kge.lr);
        read_field(s, "input_dropout", c.kge.input_dropout);
        read_field(s, "hidden_dropout1", c.kge.hidden_dropout1);
        read_field(s, "hidden_dropout2", c.kge.hidden_dropout2);
        read_field(s, "batch_size", c.kge.batch_size);
        read_field(s, "label_smoothing", c.kge.label_smoothing);
        read_field(s, "decay_rate", c.kge.decay_rate);
        read_seed(s, "seed", c.kge.seed);
        read_field(s, "standardize_hidden", c.kge.standardize_hidden);
    }
    if (doc.contains("eval")) {
        const json& s = doc["eval"];
        if (s.contains("mode")) {
            std::string mode = s.at("mode").get<std::string>();
            if (mode == "raw") c.eval_mode = RankingMode::Raw;
            else if (mode == "filtered") c.eval_mode = RankingMode::Filtered;
            else throw std::runtime_error("eval.mode must be 'raw' or 'filtered'");
        }
        read_field(s, "excluded_relations", c.excluded_relations);
    }
    return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    return from_json_text(read_file(path));
}

void PipelineConfig::validate(bool check_paths) const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw std::runtime_error("config field " + field + ": " + why);
    };
    if (check_paths) {
        if (!file_exists(feeds_dir)) fail("paths.feeds_dir", "does not exist: " + feeds_dir);
        if (!file_exists(gazetteer_path)) {
            fail("paths.gazetteer", "does not exist: " + gazetteer_path);
        }
    }
    double sum = ratios.train + ratios.valid + ratios.test;
    if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 || sum < 0.999 || sum > 1.001) {
        fail("split", "ratios must be non-negative and sum to 1");
    }
    if (ner_epochs < 1) fail("ner.epochs", "must be >= 1");
    if (ner_train_subset < 1) fail("ner.train_subset", "must be >= 1");
    if (extract_source != "distant" && extract_source != "ner") {
        fail("extract.source", "must be 'distant' or 'ner'");
    }
    if (kge.num_iterations < 1) fail("kge.num_iterations", "must be >= 1");
    if (kge.edim < 1 || kge.rdim < 1) fail("kge.edim/rdim", "must be >= 1");
    if (kge.batch_size < 1) fail("kge.batch_size", "must be >= 1");
    for (double p : {kge.input_dropout, kge.hidden_dropout1, kge.hidden_dropout2}) {
        if (p < 0.0 || p >= 1.0) fail("kge dropout", "probabilities must be in [0, 1)");
    }
    if (kge.label_smoothing < 0.0 || kge.label_smoothing >= 1.0) {
        fail("kge.label_smoothing", "must be in [0, 1)");
    }
    if (kge.lr <= 0.0) fail("kge.lr", "must be positive");
    if (kge.decay_rate <= 0.0) fail("kge.decay_rate", "must be positive");
    for (const std::string& cue : version_cues) {
        if (cue.empty()) fail("labeling.version_cues", "empty cue word");
    }
    // Build once to surface duplicate-edge errors with a field name.
    try {
        ontology();
    } catch (const std::exception& e) {
        fail("ontology.edges", e.what());
    }
}

Ontology PipelineConfig::ontology() const {
    if (ontology_edges.empty()) return Ontology::default_edges();
    Ontology o;
    for (const OntologyEdge& e : ontology_edges) o.add_edge(e.head, e.relation, e.tail);
    return o;
}

std::string PipelineConfig::to_json_text() const {
    json doc;
    doc["paths"] = {{"feeds_dir", feeds_dir},
                    {"gazetteer", gazetteer_path},
                    {"work_dir", work_dir}};
    doc["ingest"] = {{"require_metadata", require_metadata}};
    doc["labeling"] = {{"version_cues", version_cues}};
    doc["ner"] = {{"epochs", ner_epochs},
                  {"train_subset", ner_train_subset},
                  {"eval_subset", ner_eval_subset},
                  {"seed", ner_seed}};
    doc["extract"] = {{"source", extract_source}};
    json edges = json::array();
    for (const OntologyEdge& e : ontology().edges()) {
        edges.push_back({to_string(e.head), e.relation, to_string(e.tail)});
    }
    doc["ontology"] = {{"edges", edges}};
    doc["split"] = {{"train", ratios.train},
                    {"valid", ratios.valid},
                    {"test", ratios.test},
                    {"seed", split_seed},
                    {"augment_before_split", augment_before_split}};
    doc["kge"] = {{"num_iterations", kge.num_iterations},
                  {"edim", kge.edim},
                  {"rdim", kge.rdim},
                  {"lr", kge.lr},
                  {"input_dropout", kge.input_dropout},
                  {"hidden_dropout1", kge.hidden_dropout1},
                  {"hidden_dropout2", kge.hidden_dropout2},
                  {"batch_size", kge.batch_size},
                  {"label_smoothing", kge.label_smoothing},
                  {"decay_rate", kge.decay_rate},
                  {"seed", kge.seed},
                  {"standardize_hidden", kge.standardize_hidden}};
    doc["eval"] = {{"mode", to_string(eval_mode)},
                   {"excluded_relations", excluded_relations}};
    return doc.dump(2);
}

std::uint64_t PipelineConfig::hash() const {
    return fnv1a64(to_json_text());
}

}  // namespace vulnkg
