#include "vulnkg/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <stdexcept>

#include "vulnkg/ner_perceptron.hpp"
#include "vulnkg/util.hpp"

namespace vulnkg {

namespace fs = std::filesystem;
using nlohmann::json;

Artifacts Artifacts::in(const std::string& work_dir) {
    Artifacts a;
    a.records = work_dir + "/records.ndjson";
    a.ingest_stats = work_dir + "/ingest_stats.json";
    a.labeled = work_dir + "/labeled.conll";
    a.iob_model = work_dir + "/ner_iob.model";
    a.domain_model = work_dir + "/ner_domain.model";
    a.ner_report = work_dir + "/ner_report.txt";
    a.triples = work_dir + "/triples.tsv";
    a.kg_dir = work_dir + "/kg";
    a.checkpoint = work_dir + "/tucker.ckpt";
    a.loss_trace = work_dir + "/kge_loss.tsv";
    a.eval_report = work_dir + "/kge_eval.txt";
    a.review_sheet = work_dir + "/review_sheet.tsv";
    a.manifest = work_dir + "/manifest.json";
    return a;
}

namespace {

void require_artifact(const std::string& path, const std::string& producer) {
    if (!file_exists(path)) {
        throw std::runtime_error("missing artifact " + path + "; run '" + producer + "' first");
    }
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Stage entries keep input-file hashes and the config hash; keys are sorted by
// the JSON writer so re-running a stage rewrites identical bytes.
void record_stage(const PipelineConfig& config, const std::string& stage,
                  const std::vector<std::string>& inputs,
                  const std::vector<std::string>& outputs) {
    Artifacts a = Artifacts::in(config.work_dir);
    json manifest;
    if (file_exists(a.manifest)) {
        manifest = json::parse(read_file(a.manifest));
    }
    json entry;
    entry["config_hash"] = hex64(config.hash());
    json in_hashes;
    for (const std::string& path : inputs) {
        in_hashes[path] = hex64(fnv1a64(read_file(path, /*allow_gzip=*/false)));
    }
    entry["inputs"] = in_hashes;
    entry["outputs"] = outputs;
    manifest["stages"][stage] = entry;
    write_file(a.manifest, manifest.dump(2) + "\n");
}

std::vector<size_t> shuffled_indices(size_t n, std::uint32_t seed) {
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937 rng(seed);
    for (size_t i = n; i > 1; --i) {
        size_t j = rng() % i;
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

struct NerSlices {
    std::vector<size_t> train;
    std::vector<size_t> eval;
};

NerSlices ner_slices(size_t corpus_size, const PipelineConfig& config) {
    std::vector<size_t> order = shuffled_indices(corpus_size, config.ner_seed);
    NerSlices s;
    size_t n_train = std::min(config.ner_train_subset, corpus_size);
    size_t n_eval = std::min(config.ner_eval_subset, corpus_size - n_train);
    s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    s.eval.assign(order.begin() + static_cast<long>(n_train),
                  order.begin() + static_cast<long>(n_train + n_eval));
    return s;
}

std::vector<Token> tokens_of(const std::vector<LabeledToken>& sentence) {
    std::vector<Token> tokens;
    tokens.reserve(sentence.size());
    for (const LabeledToken& t : sentence) tokens.push_back(t.token);
    return tokens;
}

}  // namespace

void run_ingest(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    fs::create_directories(config.work_dir);

    std::vector<std::string> feed_files;
    if (!fs::is_directory(config.feeds_dir)) {
        throw std::runtime_error("feeds dir does not exist: " + config.feeds_dir);
    }
    for (const auto& entry : fs::directory_iterator(config.feeds_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name.ends_with(".json") || name.ends_with(".json.gz")) {
            feed_files.push_back(entry.path().string());
        }
    }
    if (feed_files.empty()) {
        throw std::runtime_error("no .json feed files in " + config.feeds_dir);
    }
    std::sort(feed_files.begin(), feed_files.end());

    std::vector<CveRecord> records;
    FeedSkipReport stats;
    for (const std::string& path : feed_files) {
        FeedSkipReport file_stats;
        std::vector<CveRecord> file_records = parse_feed(read_file(path), &file_stats);
        records.insert(records.end(), file_records.begin(), file_records.end());
        stats.total_items += file_stats.total_items;
        stats.missing_id += file_stats.missing_id;
        stats.rejected += file_stats.rejected;
        stats.no_description += file_stats.no_description;
    }

    // Later feed files can re-list a CVE; keep the first occurrence.
    std::set<std::string> seen;
    std::vector<CveRecord> unique;
    unique.reserve(records.size());
    int duplicates = 0;
    int no_metadata = 0;
    for (CveRecord& r : records) {
        if (!seen.insert(r.cve_id).second) {
            ++duplicates;
            continue;
        }
        if (config.require_metadata && r.cpes.empty() && r.cwe_ids.empty()) {
            ++no_metadata;
            continue;
        }
        unique.push_back(std::move(r));
    }

    write_file(a.records, records_to_ndjson(unique));
    json jstats;
    jstats["feed_files"] = feed_files;
    jstats["items_total"] = stats.total_items;
    jstats["skipped_missing_id"] = stats.missing_id;
    jstats["skipped_rejected"] = stats.rejected;
    jstats["skipped_no_description"] = stats.no_description;
    jstats["skipped_duplicate_id"] = duplicates;
    jstats["skipped_no_metadata"] = no_metadata;
    jstats["records_written"] = unique.size();
    write_file(a.ingest_stats, jstats.dump(2) + "\n");
    record_stage(config, "ingest", feed_files, {a.records, a.ingest_stats});
}

void run_label(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.records, "ingest");
    std::vector<CveRecord> records = records_from_ndjson(read_file(a.records));
    Gazetteer gaz = Gazetteer::from_file(config.gazetteer_path);

    std::vector<std::vector<LabeledToken>> sentences;
    sentences.reserve(records.size());
    for (const CveRecord& r : records) {
        sentences.push_back(label_record(r, gaz, config.version_cues));
    }
    write_file(a.labeled, to_conll(sentences));
    record_stage(config, "label", {a.records, config.gazetteer_path}, {a.labeled});
}

void run_train_ner(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.labeled, "label");
    std::vector<std::vector<LabeledToken>> corpus = from_conll(read_file(a.labeled));
    NerSlices slices = ner_slices(corpus.size(), config);

    std::vector<std::vector<LabeledToken>> train_corpus;
    train_corpus.reserve(slices.train.size());
    for (size_t i : slices.train) train_corpus.push_back(corpus[i]);

    TwoStageModel two = train_two_stage(train_corpus, config.ner_epochs, config.ner_seed);
    two.iob.save(a.iob_model);
    two.domain.save(a.domain_model);
    record_stage(config, "train-ner", {a.labeled}, {a.iob_model, a.domain_model});
}

void run_ner_eval(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.labeled, "label");
    require_artifact(a.iob_model, "train-ner");
    require_artifact(a.domain_model, "train-ner");

    std::vector<std::vector<LabeledToken>> corpus = from_conll(read_file(a.labeled));
    NerSlices slices = ner_slices(corpus.size(), config);
    if (slices.eval.empty()) {
        throw std::runtime_error(
            "no held-out records for NER evaluation; lower ner.train_subset");
    }
    PerceptronModel iob = PerceptronModel::load(a.iob_model);
    PerceptronModel domain = PerceptronModel::load(a.domain_model);

    std::vector<std::vector<LabeledToken>> gold, pred;
    gold.reserve(slices.eval.size());
    for (size_t i : slices.eval) {
        gold.push_back(corpus[i]);
        pred.push_back(predict(iob, domain, tokens_of(corpus[i])));
    }
    NerReport report = evaluate_ner(pred, gold);
    write_file(a.ner_report, report.to_text());
    record_stage(config, "ner-eval", {a.labeled, a.iob_model, a.domain_model}, {a.ner_report});
}

void run_extract(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.records, "ingest");
    require_artifact(a.labeled, "label");
    std::vector<CveRecord> records = records_from_ndjson(read_file(a.records));
    std::vector<std::vector<LabeledToken>> sentences = from_conll(read_file(a.labeled));
    if (records.size() != sentences.size()) {
        throw std::runtime_error("labeled corpus out of sync with records; re-run 'label'");
    }

    bool use_ner = config.extract_source == "ner";
    PerceptronModel iob, domain;
    if (use_ner) {
        require_artifact(a.iob_model, "train-ner");
        require_artifact(a.domain_model, "train-ner");
        iob = PerceptronModel::load(a.iob_model);
        domain = PerceptronModel::load(a.domain_model);
    }

    Ontology ontology = config.ontology();
    std::set<Triple> all;
    for (size_t i = 0; i < records.size(); ++i) {
        std::vector<LabeledToken> labels =
            use_ner ? predict(iob, domain, tokens_of(sentences[i])) : sentences[i];
        std::vector<EntitySpan> spans =
            assemble_entities(labels, records[i].cve_id, records[i].cwe_ids);
        for (Triple& t : extract_triples(spans, ontology)) all.insert(std::move(t));
    }
    write_file(a.triples, triples_to_tsv({all.begin(), all.end()}));
    std::vector<std::string> inputs = {a.records, a.labeled};
    if (use_ner) {
        inputs.push_back(a.iob_model);
        inputs.push_back(a.domain_model);
    }
    record_stage(config, "extract", inputs, {a.triples});
}

void run_kg_build(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.triples, "extract");
    KnowledgeGraph kg = build_graph(triples_from_tsv(read_file(a.triples)));

    if (config.augment_before_split) {
        // Literal published order: reverses exist before splitting, so a test
        // triple's reverse can land in train.
        KnowledgeGraph augmented = augment_reverse(kg);
        SplitSet splits = split_triples(augmented, config.ratios, config.split_seed);
        save_kg_dir(augmented, splits, a.kg_dir);
    } else {
        SplitSet base_splits = split_triples(kg, config.ratios, config.split_seed);
        auto [augmented, splits] = augment_reverse(kg, base_splits);
        save_kg_dir(augmented, splits, a.kg_dir);
    }
    record_stage(config, "kg-build", {a.triples},
                 {a.kg_dir + "/entities.tsv", a.kg_dir + "/relations.tsv",
                  a.kg_dir + "/train.tsv", a.kg_dir + "/valid.tsv", a.kg_dir + "/test.tsv"});
}

void run_kge_train(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.kg_dir + "/train.tsv", "kg-build");
    auto [kg, splits] = load_kg_dir(a.kg_dir);
    TrainResult result = train(kg, splits, config.kge);
    save_checkpoint(result.params, kg, a.checkpoint);
    std::string trace = "epoch\tloss\n";
    for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
        trace += std::to_string(e) + "\t" + format_fixed(result.epoch_losses[e], 9) + "\n";
    }
    write_file(a.loss_trace, trace);
    record_stage(config, "kge-train", {a.kg_dir + "/train.tsv"}, {a.checkpoint, a.loss_trace});
}

namespace {

std::vector<TripleId> all_split_triples(const SplitSet& splits) {
    std::vector<TripleId> all;
    all.reserve(splits.train.size() + splits.valid.size() + splits.test.size());
    all.insert(all.end(), splits.train.begin(), splits.train.end());
    all.insert(all.end(), splits.valid.begin(), splits.valid.end());
    all.insert(all.end(), splits.test.begin(), splits.test.end());
    return all;
}

std::vector<int> resolve_relations(const KnowledgeGraph& kg,
                                   const std::vector<std::string>& names) {
    std::vector<int> ids;
    for (const std::string& name : names) ids.push_back(kg.relation_id(name));
    return ids;
}

}  // namespace

void run_kge_eval(const PipelineConfig& config) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.kg_dir + "/test.tsv", "kg-build");
    require_artifact(a.checkpoint, "kge-train");
    auto [kg, splits] = load_kg_dir(a.kg_dir);
    TuckerParams params = load_checkpoint(a.checkpoint, kg);
    std::vector<TripleId> known = all_split_triples(splits);
    std::vector<int> excluded = resolve_relations(kg, config.excluded_relations);

    auto report_for = [&](RankingMode mode) {
        RankingReport r =
            evaluate_ranking(params, splits.test, known, mode, excluded, config.kge);
        r.excluded_relations = config.excluded_relations;
        return r;
    };
    RankingReport primary = report_for(config.eval_mode);
    RankingMode other_mode =
        config.eval_mode == RankingMode::Filtered ? RankingMode::Raw : RankingMode::Filtered;
    RankingReport secondary = report_for(other_mode);

    std::string text = primary.to_text() + "\n" + secondary.to_text();
    write_file(a.eval_report, text);
    record_stage(config, "kge-eval", {a.kg_dir + "/test.tsv", a.checkpoint}, {a.eval_report});
}

void run_pipeline(const PipelineConfig& config) {
    run_ingest(config);
    run_label(config);
    run_train_ner(config);
    run_ner_eval(config);
    run_extract(config);
    run_kg_build(config);
    run_kge_train(config);
    run_kge_eval(config);
}

PredictResult run_predict(const PipelineConfig& config, const std::string& head,
                          const std::string& relation, size_t k) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.kg_dir + "/train.tsv", "kg-build");
    require_artifact(a.checkpoint, "kge-train");
    auto [kg, splits] = load_kg_dir(a.kg_dir);
    TuckerParams params = load_checkpoint(a.checkpoint, kg);
    return predict_tail(params, kg, head, relation, k, config.eval_mode,
                        all_split_triples(splits), config.kge);
}

void run_sample_triples(const PipelineConfig& config, size_t n, std::uint32_t seed) {
    Artifacts a = Artifacts::in(config.work_dir);
    require_artifact(a.triples, "extract");
    std::vector<Triple> triples = triples_from_tsv(read_file(a.triples));
    std::vector<Triple> sample = sample_for_validation(triples, n, seed);
    write_file(a.review_sheet, review_sheet(sample));
    record_stage(config, "sample-triples", {a.triples}, {a.review_sheet});
}

ValidationScore run_score_sheet(const std::string& sheet_path) {
    return score_review_sheet(read_file(sheet_path));
}

}  // namespace vulnkg
