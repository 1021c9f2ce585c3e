#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "vulnkg/pipeline.hpp"
#include "vulnkg/util.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::string work_dir;
    long seed = -1;
    long ner_epochs = -1;
    long ner_train_subset = -1;
    long kge_iterations = -1;
    long edim = -1;
    long rdim = -1;
    long batch_size = -1;
    double kge_lr = -1.0;
    std::string extract_source;
};

vulnkg::PipelineConfig make_config(const CliOverrides& o) {
    vulnkg::PipelineConfig config;
    if (!o.config_path.empty()) config = vulnkg::PipelineConfig::from_file(o.config_path);
    if (!o.work_dir.empty()) {
        config.work_dir = o.work_dir;
    } else if (const char* env = std::getenv("VULNKG_WORK_DIR"); env && *env) {
        config.work_dir = env;
    }
    if (o.seed >= 0) {
        config.ner_seed = static_cast<std::uint32_t>(o.seed);
        config.split_seed = static_cast<std::uint32_t>(o.seed);
        config.kge.seed = static_cast<std::uint32_t>(o.seed);
    }
    if (o.ner_epochs > 0) config.ner_epochs = static_cast<int>(o.ner_epochs);
    if (o.ner_train_subset > 0) config.ner_train_subset = static_cast<size_t>(o.ner_train_subset);
    if (o.kge_iterations > 0) config.kge.num_iterations = static_cast<int>(o.kge_iterations);
    if (o.edim > 0) config.kge.edim = static_cast<int>(o.edim);
    if (o.rdim > 0) config.kge.rdim = static_cast<int>(o.rdim);
    if (o.batch_size > 0) config.kge.batch_size = static_cast<int>(o.batch_size);
    if (o.kge_lr > 0) config.kge.lr = o.kge_lr;
    if (!o.extract_source.empty()) config.extract_source = o.extract_source;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vulnkg: NVD CVE descriptions -> typed knowledge graph -> TuckER entity prediction"};
    app.require_subcommand(1);

    CliOverrides o;
    app.add_option("--config", o.config_path, "pipeline config file (JSON, comments allowed)");
    app.add_option("--work-dir", o.work_dir,
                   "artifact directory (overrides config and VULNKG_WORK_DIR)");
    app.add_option("--seed", o.seed, "override the NER, split and KGE seeds at once");
    app.add_option("--ner-epochs", o.ner_epochs, "perceptron training epochs");
    app.add_option("--ner-train-subset", o.ner_train_subset, "CVEs used for NER training");
    app.add_option("--kge-iterations", o.kge_iterations, "TuckER training epochs");
    app.add_option("--kge-lr", o.kge_lr, "TuckER learning rate");
    app.add_option("--edim", o.edim, "entity embedding dimension");
    app.add_option("--rdim", o.rdim, "relation embedding dimension");
    app.add_option("--batch-size", o.batch_size, "TuckER batch size");
    app.add_option("--extract-source", o.extract_source,
                   "labels used for extraction: distant or ner");

    auto* ingest = app.add_subcommand("ingest", "parse NVD JSON feeds into records.ndjson");
    auto* label = app.add_subcommand("label", "distant-supervision labeling to labeled.conll");
    auto* train_ner = app.add_subcommand("train-ner", "train the two-stage averaged perceptron");
    auto* ner_eval = app.add_subcommand("ner-eval", "score the NER models on held-out records");
    auto* extract = app.add_subcommand("extract", "assemble entities and extract triples");
    auto* kg_build = app.add_subcommand("kg-build", "index, split and reverse-augment the graph");
    auto* kge_train = app.add_subcommand("kge-train", "train TuckER embeddings");
    auto* kge_eval = app.add_subcommand("kge-eval", "Hits@n / MRR ranking evaluation");
    auto* pipeline = app.add_subcommand("pipeline", "run all stages in order");

    auto* predict = app.add_subcommand("predict", "rank tail entities for a (head, relation) query");
    std::string head, relation;
    size_t topk = 10;
    predict->add_option("--head", head, "head entity, e.g. CVE-2022-0001")->required();
    predict->add_option("--relation", relation, "relation, e.g. has_weakness")->required();
    predict->add_option("--k", topk, "number of candidates to list");

    auto* sample = app.add_subcommand("sample-triples", "draw a validation sample of triples");
    size_t sample_n = 100;
    long sample_seed = 7;
    std::string score_path;
    sample->add_option("--n", sample_n, "sample size");
    sample->add_option("--seed", sample_seed, "sampling seed");
    sample->add_option("--score", score_path,
                       "score a filled review sheet instead of drawing a sample");

    CLI11_PARSE(app, argc, argv);

    std::string stage = app.get_subcommands().front()->get_name();
    try {
        vulnkg::PipelineConfig config = make_config(o);
        bool needs_inputs = ingest->parsed() || label->parsed() || pipeline->parsed();
        config.validate(/*check_paths=*/needs_inputs);

        if (ingest->parsed()) {
            vulnkg::run_ingest(config);
        } else if (label->parsed()) {
            vulnkg::run_label(config);
        } else if (train_ner->parsed()) {
            vulnkg::run_train_ner(config);
        } else if (ner_eval->parsed()) {
            vulnkg::run_ner_eval(config);
        } else if (extract->parsed()) {
            vulnkg::run_extract(config);
        } else if (kg_build->parsed()) {
            vulnkg::run_kg_build(config);
        } else if (kge_train->parsed()) {
            vulnkg::run_kge_train(config);
        } else if (kge_eval->parsed()) {
            vulnkg::run_kge_eval(config);
        } else if (pipeline->parsed()) {
            vulnkg::run_pipeline(config);
        } else if (predict->parsed()) {
            vulnkg::PredictResult result = vulnkg::run_predict(config, head, relation, topk);
            if (result.cve_target_warning) {
                std::cerr << "warning: this reverse relation mostly targets CVE ids; "
                             "predictions are of limited use\n";
            }
            std::cout << "rank\tentity\tscore\n";
            for (size_t i = 0; i < result.top.size(); ++i) {
                std::cout << (i + 1) << "\t" << result.top[i].entity << "\t"
                          << vulnkg::format_fixed(result.top[i].score, 6) << "\n";
            }
        } else if (sample->parsed()) {
            if (!score_path.empty()) {
                vulnkg::ValidationScore score = vulnkg::run_score_sheet(score_path);
                if (score.defined) {
                    std::cout << "precision " << vulnkg::format_fixed(score.precision, 4) << " ("
                              << score.correct << "/" << score.rated << " rated correct)\n";
                } else {
                    std::cout << "precision undefined (no rated rows)\n";
                }
            } else {
                vulnkg::run_sample_triples(config, sample_n,
                                           static_cast<std::uint32_t>(sample_seed));
                std::cout << vulnkg::Artifacts::in(config.work_dir).review_sheet << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << stage << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
