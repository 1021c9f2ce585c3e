#pragma once

#include <cstdint>
#include <string>

#include "vulnkg/config.hpp"

namespace vulnkg {

/// Artifact locations inside one work directory. Every stage reads the previous
/// stage's artifact and writes its own; the manifest records input hashes.
struct Artifacts {
    std::string records;
    std::string ingest_stats;
    std::string labeled;
    std::string iob_model;
    std::string domain_model;
    std::string ner_report;
    std::string triples;
    std::string kg_dir;
    std::string checkpoint;
    std::string loss_trace;
    std::string eval_report;
    std::string review_sheet;
    std::string manifest;

    static Artifacts in(const std::string& work_dir);
};

void run_ingest(const PipelineConfig& config);
void run_label(const PipelineConfig& config);
void run_train_ner(const PipelineConfig& config);
void run_ner_eval(const PipelineConfig& config);
void run_extract(const PipelineConfig& config);
void run_kg_build(const PipelineConfig& config);
void run_kge_train(const PipelineConfig& config);
void run_kge_eval(const PipelineConfig& config);

/// Runs ingest through kge-eval in order.
void run_pipeline(const PipelineConfig& config);

PredictResult run_predict(const PipelineConfig& config, const std::string& head,
                          const std::string& relation, size_t k);
void run_sample_triples(const PipelineConfig& config, size_t n, std::uint32_t seed);
ValidationScore run_score_sheet(const std::string& sheet_path);

}  // namespace vulnkg
