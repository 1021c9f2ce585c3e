#include "vulnkg/ner_perceptron.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vulnkg/util.hpp"

namespace vulnkg {

const char* to_string(NerStage stage) {
    return stage == NerStage::IOB ? "IOB" : "DOMAIN";
}

NerStage ner_stage_from_string(const std::string& s) {
    if (s == "IOB") return NerStage::IOB;
    if (s == "DOMAIN") return NerStage::DOMAIN;
    throw std::runtime_error("unknown NER stage: " + s);
}

FeatureVector extract_features(const std::vector<Token>& tokens, size_t index,
                               const std::string& prev1, const std::string& prev2, NerStage stage,
                               const std::vector<std::string>* iob_context) {
    if (index >= tokens.size()) throw std::out_of_range("extract_features: index out of range");
    if ((stage == NerStage::DOMAIN) != (iob_context != nullptr)) {
        throw std::invalid_argument("iob_context must be present exactly for the DOMAIN stage");
    }
    if (iob_context && iob_context->size() != tokens.size()) {
        throw std::invalid_argument("iob_context length mismatch");
    }

    const std::string lower = to_lower(tokens[index].text);
    FeatureVector f;
    f.reserve(16);
    f.push_back("w0=" + lower);
    f.push_back("suf3=" + (lower.size() > 3 ? lower.substr(lower.size() - 3) : lower));
    f.push_back("pre1=" + lower.substr(0, 1));

    const std::string& raw = tokens[index].text;
    if (!raw.empty() && raw[0] >= 'A' && raw[0] <= 'Z') f.push_back("shape=cap");
    bool all_digit = !raw.empty() && raw.find_first_not_of("0123456789") == std::string::npos;
    if (all_digit) f.push_back("shape=digit");
    if (is_version_shaped(raw) && count_dots(raw) >= 1) f.push_back("shape=version");

    auto neighbor = [&tokens](size_t i, long delta) -> std::string {
        long j = static_cast<long>(i) + delta;
        if (j < 0 || j >= static_cast<long>(tokens.size())) return "<pad>";
        return to_lower(tokens[static_cast<size_t>(j)].text);
    };
    f.push_back("w-1=" + neighbor(index, -1));
    f.push_back("w-2=" + neighbor(index, -2));
    f.push_back("w+1=" + neighbor(index, +1));
    f.push_back("w+2=" + neighbor(index, +2));

    f.push_back("prev1=" + prev1);
    f.push_back("prev2=" + prev2);
    if (index == 0) f.push_back("BOS");
    if (index + 1 == tokens.size()) f.push_back("EOS");

    if (stage == NerStage::DOMAIN) {
        auto iob_at = [iob_context](size_t i, long delta) -> std::string {
            long j = static_cast<long>(i) + delta;
            if (j < 0 || j >= static_cast<long>(iob_context->size())) return "<pad>";
            return (*iob_context)[static_cast<size_t>(j)];
        };
        f.push_back("iob0=" + iob_at(index, 0));
        f.push_back("iob-1=" + iob_at(index, -1));
        f.push_back("iob+1=" + iob_at(index, +1));
    }
    return f;
}

PerceptronModel::PerceptronModel(std::vector<std::string> labels, NerStage stage)
    : labels_(std::move(labels)), stage_(stage) {
    if (labels_.empty()) throw std::invalid_argument("perceptron needs at least one label");
}

PerceptronModel::Slot& PerceptronModel::slot(const std::string& feature) {
    auto it = slots_.find(feature);
    if (it == slots_.end()) {
        Slot s;
        s.w.assign(labels_.size(), 0.0);
        s.acc.assign(labels_.size(), 0.0);
        s.stamp.assign(labels_.size(), 0);
        it = slots_.emplace(feature, std::move(s)).first;
    }
    return it->second;
}

void PerceptronModel::score(const FeatureVector& feats, std::vector<double>& out) const {
    out.assign(labels_.size(), 0.0);
    for (const std::string& f : feats) {
        auto it = slots_.find(f);
        if (it == slots_.end()) continue;
        const std::vector<double>& w = it->second.w;
        for (size_t l = 0; l < w.size(); ++l) out[l] += w[l];
    }
}

size_t PerceptronModel::predict_index(const FeatureVector& feats) const {
    std::vector<double> scores;
    score(feats, scores);
    size_t best = 0;
    for (size_t l = 1; l < scores.size(); ++l) {
        if (scores[l] > scores[best]) best = l;
    }
    return best;
}

void PerceptronModel::begin_step() {
    if (finalized_) throw std::logic_error("cannot train a finalized model");
    ++steps_;
}

void PerceptronModel::update(const FeatureVector& feats, size_t gold_index,
                             size_t predicted_index) {
    if (gold_index == predicted_index) return;
    const std::int64_t t = steps_;
    auto adjust = [this, t](const std::string& feature, size_t label, double delta) {
        Slot& s = slot(feature);
        // Current value has been live for snapshots stamp .. t-1.
        s.acc[label] += s.w[label] * static_cast<double>(t - s.stamp[label]);
        s.w[label] += delta;
        s.stamp[label] = t;
    };
    for (const std::string& f : feats) {
        adjust(f, gold_index, +1.0);
        adjust(f, predicted_index, -1.0);
    }
}

void PerceptronModel::finalize() {
    if (finalized_) return;
    if (steps_ == 0) throw std::logic_error("finalize before any training step");
    const double t = static_cast<double>(steps_);
    for (auto& [key, s] : slots_) {
        for (size_t l = 0; l < labels_.size(); ++l) {
            s.acc[l] += s.w[l] * static_cast<double>(steps_ - s.stamp[l] + 1);
            s.w[l] = s.acc[l] / t;
        }
    }
    finalized_ = true;
}

double PerceptronModel::weight(const std::string& feature, const std::string& label) const {
    auto it = slots_.find(feature);
    if (it == slots_.end()) return 0.0;
    auto lit = std::find(labels_.begin(), labels_.end(), label);
    if (lit == labels_.end()) return 0.0;
    return it->second.w[static_cast<size_t>(lit - labels_.begin())];
}

std::vector<std::string> PerceptronModel::feature_keys_sorted() const {
    std::vector<std::string> keys;
    keys.reserve(slots_.size());
    for (const auto& [key, s] : slots_) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    return keys;
}

std::string PerceptronModel::serialize() const {
    std::string out = "ap-model v1\n";
    out += "stage\t";
    out += to_string(stage_);
    out += "\nsteps\t" + std::to_string(steps_) + "\n";
    out += "labels\t" + std::to_string(labels_.size()) + "\n";
    for (const std::string& l : labels_) out += l + "\n";
    std::string body;
    size_t rows = 0;
    for (const std::string& key : feature_keys_sorted()) {
        const Slot& s = slots_.at(key);
        for (size_t l = 0; l < labels_.size(); ++l) {
            if (s.w[l] == 0.0) continue;
            body += key;
            body += '\t';
            body += labels_[l];
            body += '\t';
            body += format_fixed(s.w[l], 10);
            body += '\n';
            ++rows;
        }
    }
    out += "weights\t" + std::to_string(rows) + "\n";
    out += body;
    return out;
}

void PerceptronModel::save(const std::string& path) const {
    write_file(path, serialize());
}

PerceptronModel PerceptronModel::deserialize(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "ap-model v1") {
        throw std::runtime_error("not an ap-model checkpoint");
    }
    auto expect_kv = [&in](const std::string& key) {
        std::string l;
        if (!std::getline(in, l)) throw std::runtime_error("truncated ap-model checkpoint");
        std::vector<std::string> kv = split(l, '\t');
        if (kv.size() != 2 || kv[0] != key) {
            throw std::runtime_error("ap-model checkpoint: expected " + key);
        }
        return kv[1];
    };
    NerStage stage = ner_stage_from_string(expect_kv("stage"));
    std::int64_t steps = std::stoll(expect_kv("steps"));
    size_t n_labels = std::stoul(expect_kv("labels"));
    std::vector<std::string> labels;
    for (size_t i = 0; i < n_labels; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("truncated label list");
        labels.push_back(line);
    }
    PerceptronModel model(labels, stage);
    model.steps_ = steps;
    size_t rows = std::stoul(expect_kv("weights"));
    for (size_t i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("truncated weight rows");
        std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 3) throw std::runtime_error("bad weight row: " + line);
        auto lit = std::find(labels.begin(), labels.end(), cols[1]);
        if (lit == labels.end()) throw std::runtime_error("weight row names unknown label: " + line);
        Slot& s = model.slot(cols[0]);
        s.w[static_cast<size_t>(lit - labels.begin())] = std::stod(cols[2]);
    }
    model.finalized_ = true;
    return model;
}

PerceptronModel PerceptronModel::load(const std::string& path) {
    return deserialize(read_file(path));
}

std::vector<std::string> decode(const PerceptronModel& model, const std::vector<Token>& tokens,
                                const std::vector<std::string>* iob_context) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        const std::string& prev1 = i >= 1 ? out[i - 1] : std::string("<pad>");
        const std::string& prev2 = i >= 2 ? out[i - 2] : std::string("<pad>");
        FeatureVector feats =
            extract_features(tokens, i, prev1, prev2, model.stage(), iob_context);
        out.push_back(model.labels()[model.predict_index(feats)]);
    }
    return out;
}

PerceptronModel train_ap(const std::vector<TrainSentence>& corpus, NerStage stage, int epochs,
                         std::uint32_t seed, std::vector<std::string> labels) {
    if (corpus.empty()) throw std::invalid_argument("train_ap: empty corpus");
    if (epochs < 1) throw std::invalid_argument("train_ap: epochs must be >= 1");

    std::set<std::string> seen;
    for (const TrainSentence& s : corpus) {
        if (s.tokens.size() != s.gold.size()) {
            throw std::invalid_argument("train_ap: token/label length mismatch");
        }
        if (stage == NerStage::DOMAIN && s.iob_context.size() != s.tokens.size()) {
            throw std::invalid_argument("train_ap: DOMAIN stage needs iob_context per sentence");
        }
        for (const std::string& g : s.gold) seen.insert(g);
    }
    if (labels.empty()) {
        labels.assign(seen.begin(), seen.end());
    } else {
        for (const std::string& g : seen) {
            if (std::find(labels.begin(), labels.end(), g) == labels.end()) {
                throw std::invalid_argument("train_ap: corpus contains unknown label '" + g + "'");
            }
        }
    }

    PerceptronModel model(labels, stage);
    std::unordered_map<std::string, size_t> label_index;
    for (size_t l = 0; l < model.labels().size(); ++l) label_index[model.labels()[l]] = l;

    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937 rng(seed);

    std::vector<std::string> predicted;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with modulo draws; the shuffle sequence is part of the
        // training protocol (the averaging oracle replays it).
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = rng() % i;
            std::swap(order[i - 1], order[j]);
        }
        for (size_t si : order) {
            const TrainSentence& sentence = corpus[si];
            const std::vector<std::string>* ctx =
                stage == NerStage::DOMAIN ? &sentence.iob_context : nullptr;
            predicted.clear();
            for (size_t i = 0; i < sentence.tokens.size(); ++i) {
                const std::string& prev1 = i >= 1 ? predicted[i - 1] : std::string("<pad>");
                const std::string& prev2 = i >= 2 ? predicted[i - 2] : std::string("<pad>");
                FeatureVector feats =
                    extract_features(sentence.tokens, i, prev1, prev2, stage, ctx);
                model.begin_step();
                size_t pred = model.predict_index(feats);
                size_t gold = label_index.at(sentence.gold[i]);
                model.update(feats, gold, pred);
                predicted.push_back(model.labels()[pred]);
            }
        }
    }
    if (model.steps() == 0) throw std::invalid_argument("train_ap: corpus has no tokens");
    model.finalize();
    return model;
}

std::vector<LabeledToken> predict(const PerceptronModel& iob_model,
                                  const PerceptronModel& domain_model,
                                  const std::vector<Token>& tokens) {
    std::vector<std::string> iob_pred = decode(iob_model, tokens);
    std::vector<std::string> domain_pred = decode(domain_model, tokens, &iob_pred);

    std::vector<LabeledToken> out(tokens.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
        out[i].token = tokens[i];
        out[i].iob = iob_from_string(iob_pred[i]);
        out[i].domain = domain_from_string(domain_pred[i]);
        if (out[i].domain == Domain::NONE) out[i].iob = Iob::O;
        if (out[i].iob == Iob::O) out[i].domain = Domain::NONE;
        if (out[i].iob == Iob::I) {
            bool continues = i > 0 && out[i - 1].iob != Iob::O &&
                             out[i - 1].domain == out[i].domain;
            if (!continues) out[i].iob = Iob::B;
        }
    }
    return out;
}

TwoStageModel train_two_stage(const std::vector<std::vector<LabeledToken>>& corpus, int epochs,
                              std::uint32_t seed) {
    std::vector<TrainSentence> iob_corpus;
    iob_corpus.reserve(corpus.size());
    for (const auto& sentence : corpus) {
        TrainSentence t;
        for (const LabeledToken& lt : sentence) {
            t.tokens.push_back(lt.token);
            t.gold.push_back(to_string(lt.iob));
        }
        iob_corpus.push_back(std::move(t));
    }
    TwoStageModel two;
    two.iob = train_ap(iob_corpus, NerStage::IOB, epochs, seed);

    // Domain features come from the IOB model's own predictions, not gold tags.
    std::vector<TrainSentence> domain_corpus;
    domain_corpus.reserve(corpus.size());
    for (const auto& sentence : corpus) {
        TrainSentence t;
        for (const LabeledToken& lt : sentence) {
            t.tokens.push_back(lt.token);
            t.gold.push_back(to_string(lt.domain));
        }
        t.iob_context = decode(two.iob, t.tokens);
        domain_corpus.push_back(std::move(t));
    }
    two.domain = train_ap(domain_corpus, NerStage::DOMAIN, epochs, seed);
    return two;
}

std::string combined_tag(const LabeledToken& t) {
    if (t.iob == Iob::O) return "O";
    return std::string(to_string(t.iob)) + "-" + to_string(t.domain);
}

namespace {

double f1_of(double p, double r) {
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

}  // namespace

NerReport evaluate_ner(const std::vector<std::vector<LabeledToken>>& pred,
                       const std::vector<std::vector<LabeledToken>>& gold) {
    if (pred.size() != gold.size()) {
        throw std::invalid_argument("evaluate_ner: corpus size mismatch");
    }
    struct Counts {
        size_t tp = 0, pred_n = 0, gold_n = 0;
    };
    std::map<std::string, Counts> per_class;
    size_t tp = 0, pred_n = 0, gold_n = 0;

    for (size_t s = 0; s < pred.size(); ++s) {
        if (pred[s].size() != gold[s].size()) {
            throw std::invalid_argument("evaluate_ner: sentence length mismatch at index " +
                                        std::to_string(s));
        }
        for (size_t i = 0; i < pred[s].size(); ++i) {
            std::string p = combined_tag(pred[s][i]);
            std::string g = combined_tag(gold[s][i]);
            if (p != "O") {
                ++pred_n;
                ++per_class[p].pred_n;
            }
            if (g != "O") {
                ++gold_n;
                ++per_class[g].gold_n;
            }
            if (p == g && g != "O") {
                ++tp;
                ++per_class[g].tp;
            }
        }
    }

    NerReport report;
    auto to_score = [](const Counts& c) {
        ClassScore s;
        s.support = c.gold_n;
        s.degenerate_precision = c.pred_n == 0;
        s.precision = c.pred_n ? static_cast<double>(c.tp) / c.pred_n : 0.0;
        s.recall = c.gold_n ? static_cast<double>(c.tp) / c.gold_n : 0.0;
        s.f1 = f1_of(s.precision, s.recall);
        return s;
    };
    for (const auto& [tag, counts] : per_class) report.per_class[tag] = to_score(counts);
    report.micro = to_score({tp, pred_n, gold_n});
    return report;
}

std::string NerReport::to_text() const {
    std::string out = "tag\tprecision\trecall\tf1\tsupport\n";
    for (const auto& [tag, s] : per_class) {
        out += tag + "\t" + format_fixed(s.precision, 4) + "\t" + format_fixed(s.recall, 4) +
               "\t" + format_fixed(s.f1, 4) + "\t" + std::to_string(s.support) + "\n";
    }
    out += "micro\t" + format_fixed(micro.precision, 4) + "\t" + format_fixed(micro.recall, 4) +
           "\t" + format_fixed(micro.f1, 4) + "\t" + std::to_string(micro.support);
    if (micro.degenerate_precision) out += "\t(no predicted entities)";
    out += "\n";
    return out;
}

}  // namespace vulnkg
