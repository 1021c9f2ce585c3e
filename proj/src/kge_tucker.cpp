#include "vulnkg/kge_tucker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "vulnkg/nvd_ingest.hpp"
#include "vulnkg/util.hpp"

namespace vulnkg {

namespace {

double uniform01(std::mt19937& rng) {
    return (static_cast<double>(rng()) + 0.5) / 4294967296.0;
}

// Box-Muller, so initialization is pinned to the engine and nothing else.
double normal(std::mt19937& rng, double stddev) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    return stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0);
}

// Inverted dropout multipliers: 0 with probability p, else 1/(1-p).
// An empty mask means identity.
std::vector<double> draw_mask(std::mt19937& rng, size_t n, double p) {
    if (p <= 0.0) return {};
    std::vector<double> mask(n);
    const double keep = 1.0 / (1.0 - p);
    for (size_t i = 0; i < n; ++i) mask[i] = uniform01(rng) < p ? 0.0 : keep;
    return mask;
}

// M0[i*d_e + k] = sum_j W[(i*d_r + j)*d_e + k] * R[r*d_r + j]
void contract_core(const TuckerParams& params, int relation, std::vector<double>& m0) {
    const int d_e = params.d_e;
    const int d_r = params.d_r;
    m0.assign(static_cast<size_t>(d_e) * d_e, 0.0);
    const double* rrow = params.R.data() + static_cast<size_t>(relation) * d_r;
    for (int i = 0; i < d_e; ++i) {
        double* out = m0.data() + static_cast<size_t>(i) * d_e;
        for (int j = 0; j < d_r; ++j) {
            const double rj = rrow[j];
            if (rj == 0.0) continue;
            const double* wrow =
                params.W.data() + (static_cast<size_t>(i) * d_r + static_cast<size_t>(j)) * d_e;
            for (int k = 0; k < d_e; ++k) out[k] += rj * wrow[k];
        }
    }
}

struct QueryState {
    int head = 0;
    int relation = 0;
    std::vector<double> in_mask;  // d_e or empty
    std::vector<double> m_mask;   // d_e*d_e or empty
    std::vector<double> v_mask;   // d_e or empty
    std::vector<double> x;        // d_e
    std::vector<double> v0;       // d_e, before standardization/dropout2
    std::vector<double> y;        // d_e, after standardization (== v0 when off)
    std::vector<double> v;        // d_e, pre-logit
    std::vector<double> logits;   // n_e
};

void forward_query(const TuckerParams& params, const std::vector<double>& m0, QueryState& q) {
    const int d_e = params.d_e;
    const int n_e = params.n_entities;

    q.x.assign(static_cast<size_t>(d_e), 0.0);
    const double* erow = params.E.data() + static_cast<size_t>(q.head) * d_e;
    for (int i = 0; i < d_e; ++i) {
        q.x[static_cast<size_t>(i)] = q.in_mask.empty() ? erow[i] : erow[i] * q.in_mask[static_cast<size_t>(i)];
    }

    q.v0.assign(static_cast<size_t>(d_e), 0.0);
    for (int i = 0; i < d_e; ++i) {
        const double xi = q.x[static_cast<size_t>(i)];
        if (xi == 0.0) continue;
        const double* m0row = m0.data() + static_cast<size_t>(i) * d_e;
        if (q.m_mask.empty()) {
            for (int k = 0; k < d_e; ++k) q.v0[static_cast<size_t>(k)] += xi * m0row[k];
        } else {
            const double* mk = q.m_mask.data() + static_cast<size_t>(i) * d_e;
            for (int k = 0; k < d_e; ++k) q.v0[static_cast<size_t>(k)] += xi * mk[k] * m0row[k];
        }
    }
    // y is filled by the caller (identity or batch standardization), then:
    //   v = v_mask ⊙ y;  logits = v · E^T
    (void)n_e;
}

void finish_query(const TuckerParams& params, QueryState& q) {
    const int d_e = params.d_e;
    const int n_e = params.n_entities;
    q.v.assign(static_cast<size_t>(d_e), 0.0);
    for (int k = 0; k < d_e; ++k) {
        q.v[static_cast<size_t>(k)] =
            q.v_mask.empty() ? q.y[static_cast<size_t>(k)]
                             : q.y[static_cast<size_t>(k)] * q.v_mask[static_cast<size_t>(k)];
    }
    q.logits.assign(static_cast<size_t>(n_e), 0.0);
    const double* vp = q.v.data();
#pragma omp parallel for schedule(static)
    for (int o = 0; o < n_e; ++o) {
        const double* eo = params.E.data() + static_cast<size_t>(o) * d_e;
        double acc = 0.0;
        for (int k = 0; k < d_e; ++k) acc += vp[k] * eo[k];
        q.logits[static_cast<size_t>(o)] = acc;
    }
}

constexpr double kStandardizeEps = 1e-5;

}  // namespace

TuckerParams init_params(int n_entities, int n_relations, const TuckerConfig& config,
                         std::uint32_t seed) {
    if (n_entities < 1 || n_relations < 1) {
        throw std::invalid_argument("init_params: need at least one entity and one relation");
    }
    if (config.edim < 1 || config.rdim < 1) {
        throw std::invalid_argument("init_params: embedding dims must be >= 1");
    }
    TuckerParams p;
    p.n_entities = n_entities;
    p.n_relations = n_relations;
    p.d_e = config.edim;
    p.d_r = config.rdim;
    p.E.resize(static_cast<size_t>(n_entities) * p.d_e);
    p.R.resize(static_cast<size_t>(n_relations) * p.d_r);
    p.W.resize(static_cast<size_t>(p.d_e) * p.d_r * p.d_e);

    std::mt19937 rng(seed);
    for (double& w : p.E) w = normal(rng, 0.05);
    for (double& w : p.R) w = normal(rng, 0.05);
    for (double& w : p.W) w = 2.0 * uniform01(rng) - 1.0;
    return p;
}

std::vector<double> score_all_tails(const TuckerParams& params, int head, int relation,
                                    bool train_mode, std::mt19937& dropout_rng,
                                    const TuckerConfig& config) {
    if (head < 0 || head >= params.n_entities) throw std::out_of_range("head id out of range");
    if (relation < 0 || relation >= params.n_relations) {
        throw std::out_of_range("relation id out of range");
    }
    std::vector<double> m0;
    contract_core(params, relation, m0);

    QueryState q;
    q.head = head;
    q.relation = relation;
    if (train_mode) {
        q.in_mask = draw_mask(dropout_rng, static_cast<size_t>(params.d_e), config.input_dropout);
        q.m_mask = draw_mask(dropout_rng, static_cast<size_t>(params.d_e) * params.d_e,
                             config.hidden_dropout1);
        q.v_mask = draw_mask(dropout_rng, static_cast<size_t>(params.d_e), config.hidden_dropout2);
    }
    forward_query(params, m0, q);
    q.y = q.v0;  // single query: standardization is a batch construct, not applied here
    finish_query(params, q);
    return std::move(q.logits);
}

double tucker_batch_loss_and_grads(const TuckerParams& params,
                                   const std::vector<std::pair<int, int>>& queries,
                                   const std::vector<std::vector<int>>& tails,
                                   const TuckerConfig& config, std::mt19937& rng,
                                   TuckerGrads* grads) {
    if (queries.empty()) throw std::invalid_argument("empty batch");
    if (queries.size() != tails.size()) throw std::invalid_argument("queries/tails mismatch");

    const int d_e = params.d_e;
    const int d_r = params.d_r;
    const int n_e = params.n_entities;
    const size_t bsz = queries.size();
    const double ls = config.label_smoothing;
    const double neg_target = ls / n_e;            // smoothed 0
    const double pos_target = 1.0 - ls + ls / n_e; // smoothed 1

    // Masks are drawn serially, in query order, before any parallel work.
    std::vector<QueryState> states(bsz);
    for (size_t qi = 0; qi < bsz; ++qi) {
        states[qi].head = queries[qi].first;
        states[qi].relation = queries[qi].second;
        states[qi].in_mask = draw_mask(rng, static_cast<size_t>(d_e), config.input_dropout);
        states[qi].m_mask =
            draw_mask(rng, static_cast<size_t>(d_e) * d_e, config.hidden_dropout1);
        states[qi].v_mask = draw_mask(rng, static_cast<size_t>(d_e), config.hidden_dropout2);
    }

    std::unordered_map<int, std::vector<double>> m0_cache;
    for (size_t qi = 0; qi < bsz; ++qi) {
        auto [it, inserted] = m0_cache.try_emplace(states[qi].relation);
        if (inserted) contract_core(params, states[qi].relation, it->second);
    }

    for (size_t qi = 0; qi < bsz; ++qi) {
        forward_query(params, m0_cache.at(states[qi].relation), states[qi]);
    }

    // Optional per-batch standardization of the hidden vector.
    std::vector<double> mean, inv_std;
    if (config.standardize_hidden) {
        mean.assign(static_cast<size_t>(d_e), 0.0);
        inv_std.assign(static_cast<size_t>(d_e), 0.0);
        for (int k = 0; k < d_e; ++k) {
            double mu = 0.0;
            for (size_t qi = 0; qi < bsz; ++qi) mu += states[qi].v0[static_cast<size_t>(k)];
            mu /= static_cast<double>(bsz);
            double var = 0.0;
            for (size_t qi = 0; qi < bsz; ++qi) {
                double d = states[qi].v0[static_cast<size_t>(k)] - mu;
                var += d * d;
            }
            var /= static_cast<double>(bsz);
            mean[static_cast<size_t>(k)] = mu;
            inv_std[static_cast<size_t>(k)] = 1.0 / std::sqrt(var + kStandardizeEps);
        }
        for (size_t qi = 0; qi < bsz; ++qi) {
            QueryState& q = states[qi];
            q.y.assign(static_cast<size_t>(d_e), 0.0);
            for (int k = 0; k < d_e; ++k) {
                q.y[static_cast<size_t>(k)] =
                    (q.v0[static_cast<size_t>(k)] - mean[static_cast<size_t>(k)]) *
                    inv_std[static_cast<size_t>(k)];
            }
        }
    } else {
        for (size_t qi = 0; qi < bsz; ++qi) states[qi].y = states[qi].v0;
    }

    double loss = 0.0;
    std::vector<std::vector<double>> target_of(bsz);
    for (size_t qi = 0; qi < bsz; ++qi) {
        QueryState& q = states[qi];
        finish_query(params, q);
        std::vector<double>& target = target_of[qi];
        target.assign(static_cast<size_t>(n_e), neg_target);
        for (int t : tails[qi]) target[static_cast<size_t>(t)] = pos_target;
        double q_loss = 0.0;
        for (int o = 0; o < n_e; ++o) {
            q_loss += softplus(q.logits[static_cast<size_t>(o)]) -
                      target[static_cast<size_t>(o)] * q.logits[static_cast<size_t>(o)];
        }
        loss += q_loss / n_e;
    }
    loss /= static_cast<double>(bsz);
    if (!grads) return loss;

    grads->E.assign(params.E.size(), 0.0);
    grads->R.assign(params.R.size(), 0.0);
    grads->W.assign(params.W.size(), 0.0);

    // Phase 1: logit-side gradients; collect dy per query.
    std::vector<std::vector<double>> dy_of(bsz);
    for (size_t qi = 0; qi < bsz; ++qi) {
        QueryState& q = states[qi];
        const std::vector<double>& target = target_of[qi];
        std::vector<double> g(static_cast<size_t>(n_e));
        const double scale = 1.0 / (static_cast<double>(n_e) * static_cast<double>(bsz));
        for (int o = 0; o < n_e; ++o) {
            g[static_cast<size_t>(o)] =
                (sigmoid(q.logits[static_cast<size_t>(o)]) - target[static_cast<size_t>(o)]) *
                scale;
        }
        // dE[o] += g_o * v  (rows are disjoint per o)
        double* gE = grads->E.data();
#pragma omp parallel for schedule(static)
        for (int o = 0; o < n_e; ++o) {
            const double go = g[static_cast<size_t>(o)];
            if (go == 0.0) continue;
            double* row = gE + static_cast<size_t>(o) * d_e;
            for (int k = 0; k < d_e; ++k) row[k] += go * q.v[static_cast<size_t>(k)];
        }
        // dv[k] = sum_o g_o E[o,k]
        std::vector<double> dv(static_cast<size_t>(d_e), 0.0);
        for (int o = 0; o < n_e; ++o) {
            const double go = g[static_cast<size_t>(o)];
            if (go == 0.0) continue;
            const double* eo = params.E.data() + static_cast<size_t>(o) * d_e;
            for (int k = 0; k < d_e; ++k) dv[static_cast<size_t>(k)] += go * eo[k];
        }
        std::vector<double>& dy = dy_of[qi];
        dy.assign(static_cast<size_t>(d_e), 0.0);
        for (int k = 0; k < d_e; ++k) {
            dy[static_cast<size_t>(k)] =
                q.v_mask.empty() ? dv[static_cast<size_t>(k)]
                                 : dv[static_cast<size_t>(k)] * q.v_mask[static_cast<size_t>(k)];
        }
    }

    // Standardization backward couples the batch per dimension.
    std::vector<std::vector<double>> dv0_of(bsz);
    if (config.standardize_hidden) {
        for (size_t qi = 0; qi < bsz; ++qi) dv0_of[qi].assign(static_cast<size_t>(d_e), 0.0);
        for (int k = 0; k < d_e; ++k) {
            double mean_dy = 0.0, mean_dyy = 0.0;
            for (size_t qi = 0; qi < bsz; ++qi) {
                mean_dy += dy_of[qi][static_cast<size_t>(k)];
                mean_dyy +=
                    dy_of[qi][static_cast<size_t>(k)] * states[qi].y[static_cast<size_t>(k)];
            }
            mean_dy /= static_cast<double>(bsz);
            mean_dyy /= static_cast<double>(bsz);
            for (size_t qi = 0; qi < bsz; ++qi) {
                dv0_of[qi][static_cast<size_t>(k)] =
                    inv_std[static_cast<size_t>(k)] *
                    (dy_of[qi][static_cast<size_t>(k)] - mean_dy -
                     states[qi].y[static_cast<size_t>(k)] * mean_dyy);
            }
        }
    } else {
        for (size_t qi = 0; qi < bsz; ++qi) dv0_of[qi] = std::move(dy_of[qi]);
    }

    // Phase 2: through the bilinear core into W, R and the head embedding.
    for (size_t qi = 0; qi < bsz; ++qi) {
        QueryState& q = states[qi];
        const std::vector<double>& dv0 = dv0_of[qi];
        const std::vector<double>& m0 = m0_cache.at(q.relation);
        const double* rrow = params.R.data() + static_cast<size_t>(q.relation) * d_r;
        double* gR = grads->R.data() + static_cast<size_t>(q.relation) * d_r;

        // dM0[i,k] = x[i] * dv0[k] * m_mask[i,k]
        std::vector<double> dm0(static_cast<size_t>(d_e) * d_e, 0.0);
        for (int i = 0; i < d_e; ++i) {
            const double xi = q.x[static_cast<size_t>(i)];
            if (xi == 0.0) continue;
            double* row = dm0.data() + static_cast<size_t>(i) * d_e;
            if (q.m_mask.empty()) {
                for (int k = 0; k < d_e; ++k) row[k] = xi * dv0[static_cast<size_t>(k)];
            } else {
                const double* mk = q.m_mask.data() + static_cast<size_t>(i) * d_e;
                for (int k = 0; k < d_e; ++k) row[k] = xi * dv0[static_cast<size_t>(k)] * mk[k];
            }
        }
        // dW[i,j,k] += dM0[i,k] * R[r,j];  dR[r,j] += sum_{i,k} W[i,j,k] dM0[i,k]
        for (int i = 0; i < d_e; ++i) {
            const double* dm0row = dm0.data() + static_cast<size_t>(i) * d_e;
            for (int j = 0; j < d_r; ++j) {
                const double rj = rrow[j];
                const size_t w_off = (static_cast<size_t>(i) * d_r + static_cast<size_t>(j)) * d_e;
                double* gw = grads->W.data() + w_off;
                const double* w = params.W.data() + w_off;
                double acc = 0.0;
                for (int k = 0; k < d_e; ++k) {
                    gw[k] += dm0row[k] * rj;
                    acc += w[k] * dm0row[k];
                }
                gR[j] += acc;
            }
        }
        // dx[i] = sum_k m_mask[i,k] * M0[i,k] * dv0[k];  dE[h,i] += in_mask[i] * dx[i]
        double* gE_h = grads->E.data() + static_cast<size_t>(q.head) * d_e;
        for (int i = 0; i < d_e; ++i) {
            const double* m0row = m0.data() + static_cast<size_t>(i) * d_e;
            double dx = 0.0;
            if (q.m_mask.empty()) {
                for (int k = 0; k < d_e; ++k) dx += m0row[k] * dv0[static_cast<size_t>(k)];
            } else {
                const double* mk = q.m_mask.data() + static_cast<size_t>(i) * d_e;
                for (int k = 0; k < d_e; ++k) dx += mk[k] * m0row[k] * dv0[static_cast<size_t>(k)];
            }
            gE_h[i] += q.in_mask.empty() ? dx : dx * q.in_mask[static_cast<size_t>(i)];
        }
    }
    return loss;
}

namespace {

class Adam {
public:
    Adam(size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<double>& params, const std::vector<double>& grads, double lr,
              std::int64_t t) {
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
        const long n = static_cast<long>(params.size());
#pragma omp parallel for schedule(static)
        for (long i = 0; i < n; ++i) {
            const double g = grads[static_cast<size_t>(i)];
            double& m = m_[static_cast<size_t>(i)];
            double& v = v_[static_cast<size_t>(i)];
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g * g;
            params[static_cast<size_t>(i)] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps_);
        }
    }

private:
    std::vector<double> m_, v_;
    double beta1_, beta2_, eps_;
};

}  // namespace

TrainResult train(const KnowledgeGraph& kg, const SplitSet& splits, const TuckerConfig& config) {
    if (splits.train.empty()) throw std::invalid_argument("train: empty training split");
    const int n_r = static_cast<int>(kg.num_relations());

    TrainResult result;
    result.params = init_params(static_cast<int>(kg.num_entities()), n_r, config, config.seed);
    TuckerParams& params = result.params;

    // Distinct (head, relation) pairs with their true-tail sets, in first-seen order.
    auto key_of = [n_r](const TripleId& t) {
        return static_cast<std::int64_t>(t.h) * n_r + t.r;
    };
    std::unordered_map<std::int64_t, size_t> pair_slot;
    std::vector<std::pair<int, int>> pairs;
    std::vector<std::vector<int>> tails;
    for (const TripleId& t : splits.train) {
        auto [it, inserted] = pair_slot.try_emplace(key_of(t), pairs.size());
        if (inserted) {
            pairs.push_back({t.h, t.r});
            tails.emplace_back();
        }
        tails[it->second].push_back(t.t);
    }

    std::mt19937 rng(config.seed + 1);
    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    Adam adam_e(params.E.size());
    Adam adam_r(params.R.size());
    Adam adam_w(params.W.size());
    std::int64_t adam_t = 0;
    double lr = config.lr;
    TuckerGrads grads;

    const size_t batch_size = std::max<size_t>(1, static_cast<size_t>(config.batch_size));
    for (int epoch = 0; epoch < config.num_iterations; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = rng() % i;
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        size_t n_batches = 0;
        for (size_t start = 0; start < order.size(); start += batch_size) {
            const size_t end = std::min(order.size(), start + batch_size);
            std::vector<std::pair<int, int>> batch_queries;
            std::vector<std::vector<int>> batch_tails;
            batch_queries.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                batch_queries.push_back(pairs[order[i]]);
                batch_tails.push_back(tails[order[i]]);
            }
            double loss = tucker_batch_loss_and_grads(params, batch_queries, batch_tails, config,
                                                      rng, &grads);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(n_batches));
            }
            ++adam_t;
            adam_e.step(params.E, grads.E, lr, adam_t);
            adam_r.step(params.R, grads.R, lr, adam_t);
            adam_w.step(params.W, grads.W, lr, adam_t);
            epoch_loss += loss;
            ++n_batches;
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(n_batches));
        lr *= config.decay_rate;
    }
    return result;
}

const char* to_string(RankingMode mode) {
    return mode == RankingMode::Raw ? "raw" : "filtered";
}

RankingReport evaluate_ranking(const TuckerParams& params,
                               const std::vector<TripleId>& eval_triples,
                               const std::vector<TripleId>& all_known, RankingMode mode,
                               const std::vector<int>& excluded_relation_ids,
                               const TuckerConfig& config) {
    if (eval_triples.empty()) throw std::invalid_argument("evaluate_ranking: empty eval set");

    const int n_e = params.n_entities;
    const int n_r = params.n_relations;
    auto key_of = [n_e, n_r](int h, int r, int t) {
        return (static_cast<std::int64_t>(h) * n_r + r) * n_e + t;
    };
    std::unordered_set<std::int64_t> known;
    if (mode == RankingMode::Filtered) {
        known.reserve(all_known.size() * 2);
        for (const TripleId& t : all_known) known.insert(key_of(t.h, t.r, t.t));
    }
    std::unordered_set<int> excluded(excluded_relation_ids.begin(), excluded_relation_ids.end());

    std::vector<const TripleId*> todo;
    size_t skipped = 0;
    for (const TripleId& t : eval_triples) {
        if (excluded.count(t.r)) {
            ++skipped;
        } else {
            todo.push_back(&t);
        }
    }
    if (todo.empty()) throw std::invalid_argument("evaluate_ranking: all triples excluded");

    std::vector<double> ranks(todo.size(), 0.0);
    const long n_q = static_cast<long>(todo.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long qi = 0; qi < n_q; ++qi) {
        const TripleId& t = *todo[static_cast<size_t>(qi)];
        std::mt19937 unused(0);
        std::vector<double> logits = score_all_tails(params, t.h, t.r, false, unused, config);
        const double target = logits[static_cast<size_t>(t.t)];
        size_t greater = 0, ties = 0;
        for (int o = 0; o < n_e; ++o) {
            if (o == t.t) continue;
            if (mode == RankingMode::Filtered && known.count(key_of(t.h, t.r, o))) continue;
            if (logits[static_cast<size_t>(o)] > target) {
                ++greater;
            } else if (logits[static_cast<size_t>(o)] == target) {
                ++ties;
            }
        }
        ranks[static_cast<size_t>(qi)] = 1.0 + static_cast<double>(greater) + 0.5 * static_cast<double>(ties);
    }

    RankingReport report;
    report.mode = mode;
    report.evaluated = todo.size();
    report.skipped = skipped;
    double mrr = 0.0;
    std::map<int, double> hits = {{1, 0.0}, {3, 0.0}, {10, 0.0}};
    for (double rank : ranks) {
        mrr += 1.0 / rank;
        for (auto& [n, count] : hits) {
            if (rank <= static_cast<double>(n)) count += 1.0;
        }
    }
    report.mrr = mrr / static_cast<double>(ranks.size());
    for (auto& [n, count] : hits) report.hits_at[n] = count / static_cast<double>(ranks.size());

    if (!(report.hits_at[1] <= report.hits_at[3] + 1e-12 &&
          report.hits_at[3] <= report.hits_at[10] + 1e-12 &&
          report.hits_at[1] <= report.mrr + 1e-12 && report.mrr <= 1.0 + 1e-12)) {
        throw std::logic_error("ranking metrics violate ordering invariants");
    }
    return report;
}

std::string RankingReport::to_text() const {
    std::string out;
    out += "mode\t";
    out += to_string(mode);
    out += "\nevaluated\t" + std::to_string(evaluated) + "\nskipped\t" + std::to_string(skipped) +
           "\n";
    if (!excluded_relations.empty()) {
        out += "excluded\t" + join(excluded_relations, ",") + "\n";
    }
    for (const auto& [n, rate] : hits_at) {
        out += "hits@" + std::to_string(n) + "\t" + format_fixed(rate, 6) + "\n";
    }
    out += "mrr\t" + format_fixed(mrr, 6) + "\n";
    return out;
}

PredictResult predict_tail(const TuckerParams& params, const KnowledgeGraph& kg,
                           const std::string& head, const std::string& relation, size_t k,
                           RankingMode mode, const std::vector<TripleId>& known,
                           const TuckerConfig& config) {
    if (!kg.has_entity(head)) throw std::runtime_error("unknown head entity: " + head);
    if (!kg.has_relation(relation)) throw std::runtime_error("unknown relation: " + relation);
    const int h = kg.entity_id(head);
    const int r = kg.relation_id(relation);

    PredictResult result;
    // Querying a reverse relation whose answers are CVE ids mostly reproduces the
    // record's own id; flag it.
    if (relation.size() > 8 && relation.compare(relation.size() - 8, 8, "_reverse") == 0) {
        size_t cve_tails = 0, rel_tails = 0;
        for (const TripleId& t : known) {
            if (t.r != r) continue;
            ++rel_tails;
            if (is_valid_cve_id(kg.entity_name(t.t))) ++cve_tails;
        }
        result.cve_target_warning = rel_tails > 0 && cve_tails * 2 > rel_tails;
    }

    std::mt19937 unused(0);
    std::vector<double> logits = score_all_tails(params, h, r, false, unused, config);

    std::unordered_set<int> drop;
    if (mode == RankingMode::Filtered) {
        for (const TripleId& t : known) {
            if (t.h == h && t.r == r) drop.insert(t.t);
        }
    }
    std::vector<int> candidates;
    candidates.reserve(static_cast<size_t>(params.n_entities));
    for (int o = 0; o < params.n_entities; ++o) {
        if (!drop.count(o)) candidates.push_back(o);
    }
    k = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                      candidates.end(), [&logits](int a, int b) {
                          if (logits[static_cast<size_t>(a)] != logits[static_cast<size_t>(b)]) {
                              return logits[static_cast<size_t>(a)] > logits[static_cast<size_t>(b)];
                          }
                          return a < b;
                      });
    for (size_t i = 0; i < k; ++i) {
        result.top.push_back({kg.entity_name(candidates[i]),
                              sigmoid(logits[static_cast<size_t>(candidates[i])])});
    }
    return result;
}

std::vector<GridResult> grid_search(const KnowledgeGraph& kg, const SplitSet& splits,
                                    const TuckerConfig& base, const GridSpec& spec) {
    if (spec.hidden_dropouts.empty() || spec.learning_rates.empty() ||
        spec.relation_dims.empty()) {
        throw std::invalid_argument("grid_search: empty grid axis");
    }
    std::vector<GridResult> results;
    std::vector<TripleId> valid_eval = splits.valid;
    if (valid_eval.size() > spec.max_valid_queries) valid_eval.resize(spec.max_valid_queries);

    std::vector<TripleId> all_known;
    all_known.insert(all_known.end(), splits.train.begin(), splits.train.end());
    all_known.insert(all_known.end(), splits.valid.begin(), splits.valid.end());
    all_known.insert(all_known.end(), splits.test.begin(), splits.test.end());

    for (double hd : spec.hidden_dropouts) {
        for (double lr : spec.learning_rates) {
            for (int dim : spec.relation_dims) {
                GridResult gr;
                gr.config = base;
                gr.config.hidden_dropout1 = hd;
                gr.config.hidden_dropout2 = hd;
                gr.config.lr = lr;
                gr.config.rdim = dim;
                gr.config.num_iterations = spec.epochs;
                for (int run = 0; run < spec.runs_per_config; ++run) {
                    // Each run sees a different train subset.
                    SplitSet subset = splits;
                    std::mt19937 rng(base.seed + 101 * static_cast<std::uint32_t>(run) + 7);
                    std::vector<TripleId>& tr = subset.train;
                    for (size_t i = tr.size(); i > 1; --i) {
                        size_t j = rng() % i;
                        std::swap(tr[i - 1], tr[j]);
                    }
                    tr.resize(std::max<size_t>(
                        1, static_cast<size_t>(spec.subset_fraction *
                                               static_cast<double>(tr.size()))));
                    TuckerConfig run_cfg = gr.config;
                    run_cfg.seed = base.seed + static_cast<std::uint32_t>(run);
                    TrainResult trained = train(kg, subset, run_cfg);
                    RankingReport report = evaluate_ranking(trained.params, valid_eval, all_known,
                                                            RankingMode::Filtered, {}, run_cfg);
                    gr.run_mrrs.push_back(report.mrr);
                }
                double sum = 0.0;
                for (double v : gr.run_mrrs) sum += v;
                gr.mean_valid_mrr = sum / static_cast<double>(gr.run_mrrs.size());
                results.push_back(std::move(gr));
            }
        }
    }
    std::stable_sort(results.begin(), results.end(),
                     [](const GridResult& a, const GridResult& b) {
                         return a.mean_valid_mrr > b.mean_valid_mrr;
                     });
    return results;
}

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'U', 'C', 'K', 'E', 'R', 'v', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const TuckerParams& params, const KnowledgeGraph& kg,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u64(out, static_cast<std::uint64_t>(params.n_entities));
    write_u64(out, static_cast<std::uint64_t>(params.n_relations));
    write_u64(out, static_cast<std::uint64_t>(params.d_e));
    write_u64(out, static_cast<std::uint64_t>(params.d_r));
    write_u64(out, kg.entity_index_hash());
    write_u64(out, kg.relation_index_hash());
    for (const auto* block : {&params.E, &params.R, &params.W}) {
        out.write(reinterpret_cast<const char*>(block->data()),
                  static_cast<std::streamsize>(block->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("short write: " + path);
}

TuckerParams load_checkpoint(const std::string& path, const KnowledgeGraph& kg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("not a tucker checkpoint: " + path);
    }
    TuckerParams p;
    p.n_entities = static_cast<int>(read_u64(in));
    p.n_relations = static_cast<int>(read_u64(in));
    p.d_e = static_cast<int>(read_u64(in));
    p.d_r = static_cast<int>(read_u64(in));
    std::uint64_t e_hash = read_u64(in);
    std::uint64_t r_hash = read_u64(in);
    if (static_cast<size_t>(p.n_entities) != kg.num_entities() ||
        static_cast<size_t>(p.n_relations) != kg.num_relations() ||
        e_hash != kg.entity_index_hash() || r_hash != kg.relation_index_hash()) {
        throw std::runtime_error("checkpoint does not match this graph's index: " + path);
    }
    p.E.resize(static_cast<size_t>(p.n_entities) * p.d_e);
    p.R.resize(static_cast<size_t>(p.n_relations) * p.d_r);
    p.W.resize(static_cast<size_t>(p.d_e) * p.d_r * p.d_e);
    for (auto* block : {&p.E, &p.R, &p.W}) {
        in.read(reinterpret_cast<char*>(block->data()),
                static_cast<std::streamsize>(block->size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return p;
}

}  // namespace vulnkg
