#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vulnkg/kg_store.hpp"

namespace vulnkg {

/// Learnable state: entity embeddings E (n_e x d_e), relation embeddings R
/// (n_r x d_r) and the core tensor W (d_e x d_r x d_e), all row-major.
struct TuckerParams {
    int n_entities = 0;
    int n_relations = 0;
    int d_e = 0;
    int d_r = 0;
    std::vector<double> E;
    std::vector<double> R;
    std::vector<double> W;

    size_t parameter_count() const { return E.size() + R.size() + W.size(); }
};

struct TuckerConfig {
    int num_iterations = 300;
    int edim = 200;
    int rdim = 30;
    double lr = 0.001;
    double input_dropout = 0.2;
    double hidden_dropout1 = 0.1;
    double hidden_dropout2 = 0.0;
    int batch_size = 128;
    double label_smoothing = 0.1;
    double decay_rate = 1.0;   // lr multiplier applied after each epoch
    std::uint32_t seed = 1;
    // Stand-in for the reference model's batch norm; off by default.
    bool standardize_hidden = false;
};

/// E and R are zero-mean normal (scale 0.05), W uniform in [-1, 1]. All draws
/// come from one seeded generator, so the result is reproducible.
TuckerParams init_params(int n_entities, int n_relations, const TuckerConfig& config,
                         std::uint32_t seed);

/// Logits for every tail entity of the query (h, r):
///   logit_o = sum_{i,j,k} W[i,j,k] * e_h[i] * w_r[j] * E[o,k]
/// train_mode applies inverted dropout (input_dropout on e_h, hidden_dropout1 on
/// the relation-contracted core, hidden_dropout2 on the pre-logit vector); eval
/// mode is deterministic.
std::vector<double> score_all_tails(const TuckerParams& params, int head, int relation,
                                    bool train_mode, std::mt19937& dropout_rng,
                                    const TuckerConfig& config);

struct TuckerGrads {
    std::vector<double> E;
    std::vector<double> R;
    std::vector<double> W;
};

/// Training-loss plumbing, exposed so the analytic gradients can be checked
/// against finite differences of the very same loss. Returns the batch loss;
/// fills grads when non-null. Dropout masks are drawn from rng in query order.
double tucker_batch_loss_and_grads(const TuckerParams& params,
                                   const std::vector<std::pair<int, int>>& queries,
                                   const std::vector<std::vector<int>>& tails,
                                   const TuckerConfig& config, std::mt19937& rng,
                                   TuckerGrads* grads);

struct TrainResult {
    TuckerParams params;
    std::vector<double> epoch_losses;
};

/// 1-N training: per (head, relation) pair, sigmoid logits against a label-smoothed
/// multi-hot target over all train tails of that pair, binary cross-entropy averaged
/// over entities, Adam updates. Expects splits that already carry reverse triples.
/// Throws on a non-finite loss, naming the epoch and batch.
TrainResult train(const KnowledgeGraph& kg, const SplitSet& splits, const TuckerConfig& config);

enum class RankingMode { Raw, Filtered };

const char* to_string(RankingMode mode);

struct RankingReport {
    std::map<int, double> hits_at;  // n in {1, 3, 10}
    double mrr = 0.0;
    RankingMode mode = RankingMode::Filtered;
    std::vector<std::string> excluded_relations;
    size_t evaluated = 0;
    size_t skipped = 0;

    std::string to_text() const;
};

/// rank(t) = 1 + #{o != t : logit_o > logit_t} + 0.5 * ties. Filtered mode first
/// drops competitors known true from all_known. Excluded relations are skipped
/// and counted. Throws if nothing remains to evaluate.
RankingReport evaluate_ranking(const TuckerParams& params, const std::vector<TripleId>& eval_triples,
                               const std::vector<TripleId>& all_known, RankingMode mode,
                               const std::vector<int>& excluded_relation_ids,
                               const TuckerConfig& config);

struct Prediction {
    std::string entity;
    double score = 0.0;  // sigmoid of the logit
};

struct PredictResult {
    std::vector<Prediction> top;
    /// Set when the query targets CVE ids through a reverse relation; predicting
    /// those is mostly noise since the id is already attached to the record.
    bool cve_target_warning = false;
};

PredictResult predict_tail(const TuckerParams& params, const KnowledgeGraph& kg,
                           const std::string& head, const std::string& relation, size_t k,
                           RankingMode mode, const std::vector<TripleId>& known,
                           const TuckerConfig& config);

struct GridSpec {
    std::vector<double> hidden_dropouts = {0.0, 0.1, 0.2};
    std::vector<double> learning_rates = {0.001, 0.01, 0.1};
    std::vector<int> relation_dims = {10, 30, 200};  // d_e stays at the base config value
    int epochs = 20;
    double subset_fraction = 0.5;
    int runs_per_config = 2;
    size_t max_valid_queries = 2000;
};

struct GridResult {
    TuckerConfig config;
    double mean_valid_mrr = 0.0;
    std::vector<double> run_mrrs;
};

/// Trains runs_per_config models per combination on different train subsets and
/// ranks combinations by mean validation MRR (descending).
std::vector<GridResult> grid_search(const KnowledgeGraph& kg, const SplitSet& splits,
                                    const TuckerConfig& base, const GridSpec& spec);

/// Binary checkpoint with dims and graph index hashes; loading verifies the hashes
/// against the given graph and refuses a mismatch.
void save_checkpoint(const TuckerParams& params, const KnowledgeGraph& kg,
                     const std::string& path);
TuckerParams load_checkpoint(const std::string& path, const KnowledgeGraph& kg);

}  // namespace vulnkg
