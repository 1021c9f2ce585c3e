#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "vulnkg/distant_labeling.hpp"

namespace vulnkg {

/// Sparse binary feature set; keys are namespaced ("w0=", "suf3=", ...) and unique.
using FeatureVector = std::vector<std::string>;

enum class NerStage { IOB, DOMAIN };

const char* to_string(NerStage stage);
NerStage ner_stage_from_string(const std::string& s);

/// Feature templates, identical for both stages except for the IOB-context block:
///   w0=<lower>          current token, lowercased
///   suf3=<s> pre1=<c>   3-char suffix / 1-char prefix of the lowercased token
///   shape=cap|digit|version
///   w-1= w-2= w+1= w+2= neighbors, lowercased, <pad> outside the sentence
///   prev1= prev2=       the two previous predicted labels, <pad> at the start
///   BOS EOS             boundary flags
///   iob0= iob-1= iob+1= (DOMAIN stage only) IOB labels around the current token
FeatureVector extract_features(const std::vector<Token>& tokens, size_t index,
                               const std::string& prev1, const std::string& prev2, NerStage stage,
                               const std::vector<std::string>* iob_context = nullptr);

/// Averaged perceptron: every weight keeps a running sum over all training steps,
/// updated lazily through timestamps; finalize() divides by the step count.
class PerceptronModel {
public:
    PerceptronModel() = default;
    PerceptronModel(std::vector<std::string> labels, NerStage stage);

    const std::vector<std::string>& labels() const { return labels_; }
    NerStage stage() const { return stage_; }
    bool finalized() const { return finalized_; }
    std::int64_t steps() const { return steps_; }
    size_t feature_count() const { return slots_.size(); }

    void score(const FeatureVector& feats, std::vector<double>& out) const;
    /// Argmax over labels; exact ties go to the lowest label index.
    size_t predict_index(const FeatureVector& feats) const;

    void begin_step();
    void update(const FeatureVector& feats, size_t gold_index, size_t predicted_index);
    void finalize();

    double weight(const std::string& feature, const std::string& label) const;
    std::vector<std::string> feature_keys_sorted() const;

    /// Text checkpoint: label list then sorted feature/label/weight triples at
    /// fixed decimal precision.
    std::string serialize() const;
    void save(const std::string& path) const;
    static PerceptronModel deserialize(const std::string& text);
    static PerceptronModel load(const std::string& path);

private:
    struct Slot {
        std::vector<double> w;
        std::vector<double> acc;
        std::vector<std::int64_t> stamp;
    };

    Slot& slot(const std::string& feature);

    std::vector<std::string> labels_;
    NerStage stage_ = NerStage::IOB;
    std::unordered_map<std::string, Slot> slots_;
    std::int64_t steps_ = 0;
    bool finalized_ = false;
};

/// One training sentence; iob_context carries the IOB model's *predictions* when
/// training the DOMAIN stage.
struct TrainSentence {
    std::vector<Token> tokens;
    std::vector<std::string> gold;
    std::vector<std::string> iob_context;
};

/// Trains with greedy left-to-right decoding, shuffling sentence order each epoch.
/// Labels are collected from the corpus (sorted) unless given explicitly, in which
/// case a gold label outside the set is an error.
PerceptronModel train_ap(const std::vector<TrainSentence>& corpus, NerStage stage, int epochs,
                         std::uint32_t seed, std::vector<std::string> labels = {});

/// Greedy decode of one sentence with a finalized (or in-training) model.
std::vector<std::string> decode(const PerceptronModel& model, const std::vector<Token>& tokens,
                                const std::vector<std::string>* iob_context = nullptr);

/// Two-stage prediction. Stage-2 sees stage-1 output; the result is post-fixed so
/// the IOB invariants hold (I after O becomes B, O forces domain NONE).
std::vector<LabeledToken> predict(const PerceptronModel& iob_model,
                                  const PerceptronModel& domain_model,
                                  const std::vector<Token>& tokens);

struct TwoStageModel {
    PerceptronModel iob;
    PerceptronModel domain;
};

/// Trains the IOB stage, re-decodes the training sentences with it, and feeds
/// those predictions (not gold IOB) into the DOMAIN stage.
TwoStageModel train_two_stage(const std::vector<std::vector<LabeledToken>>& corpus, int epochs,
                              std::uint32_t seed);

struct ClassScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    size_t support = 0;
    bool degenerate_precision = false;  // no predicted positives; precision reported as 0
};

/// Token-level scores on the combined IOB+domain tag, micro-averaged over non-O tokens.
struct NerReport {
    std::map<std::string, ClassScore> per_class;
    ClassScore micro;

    std::string to_text() const;
};

NerReport evaluate_ner(const std::vector<std::vector<LabeledToken>>& pred,
                       const std::vector<std::vector<LabeledToken>>& gold);

/// Combined tag for scoring: "O" or e.g. "B-PRODUCT".
std::string combined_tag(const LabeledToken& t);

}  // namespace vulnkg
