#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "vulnkg/kge_tucker.hpp"

using namespace vulnkg;

namespace {

TuckerConfig small_config(int edim, int rdim) {
    TuckerConfig c;
    c.edim = edim;
    c.rdim = rdim;
    c.input_dropout = 0.0;
    c.hidden_dropout1 = 0.0;
    c.hidden_dropout2 = 0.0;
    return c;
}

// Independent scorer: the raw trilinear sum, three nested loops, no reuse of the
// production contraction path.
double oracle_logit(const TuckerParams& p, int h, int r, int o) {
    double s = 0.0;
    for (int i = 0; i < p.d_e; ++i) {
        for (int j = 0; j < p.d_r; ++j) {
            for (int k = 0; k < p.d_e; ++k) {
                s += p.W[(static_cast<size_t>(i) * p.d_r + j) * p.d_e + k] *
                     p.E[static_cast<size_t>(h) * p.d_e + i] *
                     p.R[static_cast<size_t>(r) * p.d_r + j] *
                     p.E[static_cast<size_t>(o) * p.d_e + k];
            }
        }
    }
    return s;
}

// Sort-based ranking oracle: materializes every candidate logit, sorts them, and
// averages the positions of the tie block containing the target.
double oracle_rank(const TuckerParams& params, const TripleId& t,
                   const std::set<std::array<int, 3>>& known, bool filtered,
                   const TuckerConfig& config) {
    std::mt19937 unused(0);
    std::vector<double> logits = score_all_tails(params, t.h, t.r, false, unused, config);
    std::vector<double> candidates;
    for (int o = 0; o < params.n_entities; ++o) {
        if (o == t.t) continue;
        if (filtered && known.count({t.h, t.r, o})) continue;
        candidates.push_back(logits[static_cast<size_t>(o)]);
    }
    candidates.push_back(logits[static_cast<size_t>(t.t)]);
    std::sort(candidates.rbegin(), candidates.rend());
    double target = logits[static_cast<size_t>(t.t)];
    size_t first = 0;
    while (candidates[first] != target) ++first;
    size_t last = first;
    while (last + 1 < candidates.size() && candidates[last + 1] == target) ++last;
    return (static_cast<double>(first + 1) + static_cast<double>(last + 1)) / 2.0;
}

KnowledgeGraph tiny_graph() {
    std::vector<Triple> triples;
    std::mt19937 rng(5);
    for (int i = 0; i < 60; ++i) {
        triples.push_back({"e" + std::to_string(rng() % 12), "r" + std::to_string(rng() % 3),
                           "e" + std::to_string(rng() % 12)});
    }
    return build_graph(triples);
}

}  // namespace

TEST_CASE("init_params: shapes, determinism, parameter count") {
    TuckerConfig c = small_config(3, 2);
    TuckerParams p = init_params(4, 2, c, 7);
    CHECK(p.E.size() == 4 * 3);
    CHECK(p.R.size() == 2 * 2);
    CHECK(p.W.size() == 3 * 2 * 3);
    CHECK(p.parameter_count() == 12 + 4 + 18);

    TuckerParams q = init_params(4, 2, c, 7);
    CHECK(p.E == q.E);
    CHECK(p.R == q.R);
    CHECK(p.W == q.W);
    TuckerParams r = init_params(4, 2, c, 8);
    CHECK(p.E != r.E);

    // default dims arithmetic: n_e*200 + n_r*30 + 200*30*200
    TuckerConfig defaults;
    TuckerParams big = init_params(10, 4, defaults, 1);
    CHECK(big.parameter_count() == 10 * 200 + 4 * 30 + 200 * 30 * 200);
}

TEST_CASE("score_all_tails: scalar trilinear product") {
    TuckerParams p;
    p.n_entities = 3;
    p.n_relations = 1;
    p.d_e = 1;
    p.d_r = 1;
    p.E = {2.0, 1.0, -1.0};
    p.R = {3.0};
    p.W = {1.0};
    std::mt19937 rng(0);
    std::vector<double> logits = score_all_tails(p, 0, 0, false, rng, small_config(1, 1));
    CHECK(logits[1] == doctest::Approx(6.0));
    CHECK(logits[2] == doctest::Approx(-6.0));
    CHECK(logits[0] == doctest::Approx(12.0));
}

TEST_CASE("score_all_tails: zero core tensor scores everything 0") {
    TuckerConfig c = small_config(2, 2);
    TuckerParams p = init_params(4, 2, c, 3);
    std::fill(p.W.begin(), p.W.end(), 0.0);
    std::mt19937 rng(0);
    for (double logit : score_all_tails(p, 1, 0, false, rng, c)) CHECK(logit == 0.0);
}

TEST_CASE("score_all_tails matches the triple-loop oracle") {
    TuckerConfig c = small_config(4, 3);
    TuckerParams p = init_params(6, 2, c, 11);
    std::mt19937 rng(0);
    for (int h = 0; h < 6; ++h) {
        for (int r = 0; r < 2; ++r) {
            std::vector<double> logits = score_all_tails(p, h, r, false, rng, c);
            for (int o = 0; o < 6; ++o) {
                double expected = oracle_logit(p, h, r, o);
                CHECK(std::fabs(logits[static_cast<size_t>(o)] - expected) <=
                      1e-10 * std::max(1.0, std::fabs(expected)));
            }
        }
    }
}

TEST_CASE("score_all_tails: id range errors") {
    TuckerConfig c = small_config(2, 2);
    TuckerParams p = init_params(3, 1, c, 1);
    std::mt19937 rng(0);
    CHECK_THROWS_AS(score_all_tails(p, 3, 0, false, rng, c), std::out_of_range);
    CHECK_THROWS_AS(score_all_tails(p, 0, 1, false, rng, c), std::out_of_range);
}

TEST_CASE("train_mode with zero dropout equals eval mode exactly") {
    TuckerConfig c = small_config(4, 3);
    TuckerParams p = init_params(8, 2, c, 17);
    std::mt19937 rng_a(1), rng_b(2);
    std::vector<double> train_logits = score_all_tails(p, 2, 1, true, rng_a, c);
    std::vector<double> eval_logits = score_all_tails(p, 2, 1, false, rng_b, c);
    CHECK(train_logits == eval_logits);
}

TEST_CASE("batch loss matches an independently computed value") {
    // Hand-computed: loss = mean over entities of softplus(l) - y' * l with
    // label-smoothed targets.
    TuckerParams p;
    p.n_entities = 2;
    p.n_relations = 1;
    p.d_e = 1;
    p.d_r = 1;
    p.E = {1.0, -2.0};
    p.R = {1.0};
    p.W = {1.0};
    TuckerConfig c = small_config(1, 1);
    c.label_smoothing = 0.1;

    // logits for head 0: [1*1*1, 1*1*(-2)] = [1, -2]; true tail = 0
    const double ls = 0.1;
    const double y_pos = 1.0 - ls + ls / 2.0;  // = 0.95
    const double y_neg = ls / 2.0;             // = 0.05
    CHECK(y_pos <= 1.0 - ls + ls / 2.0);
    CHECK(y_neg >= ls / 2.0);
    auto softplus = [](double x) { return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0); };
    double expected = ((softplus(1.0) - y_pos * 1.0) + (softplus(-2.0) - y_neg * -2.0)) / 2.0;

    std::mt19937 rng(0);
    double loss = tucker_batch_loss_and_grads(p, {{0, 0}}, {{0}}, c, rng, nullptr);
    CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    TuckerConfig c = small_config(4, 3);
    c.label_smoothing = 0.1;
    TuckerParams p = init_params(6, 2, c, 23);

    std::vector<std::pair<int, int>> queries = {{0, 0}, {3, 1}, {5, 0}};
    std::vector<std::vector<int>> tails = {{1, 2}, {0}, {4, 5}};

    std::mt19937 rng(0);
    TuckerGrads grads;
    tucker_batch_loss_and_grads(p, queries, tails, c, rng, &grads);

    auto fd_check = [&](std::vector<double>& block, const std::vector<double>& gblock) {
        std::mt19937 pick(7);
        for (int s = 0; s < 25; ++s) {
            size_t idx = pick() % block.size();
            const double h = 1e-5;
            const double saved = block[idx];
            std::mt19937 r1(0), r2(0);
            block[idx] = saved + h;
            double lp = tucker_batch_loss_and_grads(p, queries, tails, c, r1, nullptr);
            block[idx] = saved - h;
            double lm = tucker_batch_loss_and_grads(p, queries, tails, c, r2, nullptr);
            block[idx] = saved;
            double fd = (lp - lm) / (2 * h);
            double an = gblock[idx];
            double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-8});
            CHECK(rel <= 1e-4);
        }
    };
    fd_check(p.E, grads.E);
    fd_check(p.R, grads.R);
    fd_check(p.W, grads.W);
}

TEST_CASE("gradients also match with batch standardization enabled") {
    TuckerConfig c = small_config(3, 2);
    c.standardize_hidden = true;
    TuckerParams p = init_params(5, 2, c, 29);
    std::vector<std::pair<int, int>> queries = {{0, 0}, {1, 1}, {4, 0}, {2, 1}};
    std::vector<std::vector<int>> tails = {{1}, {2, 3}, {0}, {4}};
    std::mt19937 rng(0);
    TuckerGrads grads;
    tucker_batch_loss_and_grads(p, queries, tails, c, rng, &grads);
    std::mt19937 pick(3);
    for (int s = 0; s < 20; ++s) {
        size_t idx = pick() % p.W.size();
        const double h = 1e-5;
        const double saved = p.W[idx];
        std::mt19937 r1(0), r2(0);
        p.W[idx] = saved + h;
        double lp = tucker_batch_loss_and_grads(p, queries, tails, c, r1, nullptr);
        p.W[idx] = saved - h;
        double lm = tucker_batch_loss_and_grads(p, queries, tails, c, r2, nullptr);
        p.W[idx] = saved;
        double fd = (lp - lm) / (2 * h);
        double rel = std::fabs(grads.W[idx] - fd) /
                     std::max({std::fabs(grads.W[idx]), std::fabs(fd), 1e-8});
        CHECK(rel <= 1e-4);
    }
}

TEST_CASE("training loss stays finite and trends down") {
    KnowledgeGraph kg = tiny_graph();
    SplitSet splits;
    splits.train = kg.triples();
    TuckerConfig c = small_config(8, 4);
    c.num_iterations = 5;
    c.lr = 0.01;
    c.batch_size = 16;
    c.seed = 3;
    TrainResult result = train(kg, splits, c);
    REQUIRE(result.epoch_losses.size() == 5);
    int upticks = 0;
    for (size_t e = 0; e < result.epoch_losses.size(); ++e) {
        CHECK(std::isfinite(result.epoch_losses[e]));
        if (e > 0 && result.epoch_losses[e] > result.epoch_losses[e - 1]) ++upticks;
    }
    CHECK(upticks <= 1);
}

TEST_CASE("training is deterministic under a fixed seed") {
    KnowledgeGraph kg = tiny_graph();
    SplitSet splits;
    splits.train = kg.triples();
    TuckerConfig c = small_config(4, 2);
    c.num_iterations = 2;
    c.batch_size = 8;
    c.input_dropout = 0.2;  // exercise the mask-drawing path too
    c.seed = 9;
    TrainResult a = train(kg, splits, c);
    TrainResult b = train(kg, splits, c);
    CHECK(a.params.E == b.params.E);
    CHECK(a.params.R == b.params.R);
    CHECK(a.params.W == b.params.W);
    CHECK(a.epoch_losses == b.epoch_losses);
}

TEST_CASE("evaluate_ranking: direct formula on constructed ranks") {
    // d_e = 1 with positive head embedding makes logit ordering follow E.
    TuckerParams p;
    p.n_entities = 5;
    p.n_relations = 1;
    p.d_e = 1;
    p.d_r = 1;
    p.E = {5.0, 4.0, 3.0, 2.0, 1.0};
    p.R = {1.0};
    p.W = {1.0};
    TuckerConfig c = small_config(1, 1);
    std::vector<TripleId> eval = {{0, 0, 0}, {0, 0, 1}, {0, 0, 3}};  // ranks 1, 2, 4
    RankingReport report = evaluate_ranking(p, eval, {}, RankingMode::Raw, {}, c);
    CHECK(report.mrr == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0));
    CHECK(report.hits_at[1] == doctest::Approx(1.0 / 3.0));
    CHECK(report.hits_at[3] == doctest::Approx(2.0 / 3.0));
    CHECK(report.hits_at[10] == doctest::Approx(1.0));
}

TEST_CASE("evaluate_ranking matches the sort-based oracle, raw and filtered") {
    KnowledgeGraph kg = tiny_graph();
    TuckerConfig c = small_config(5, 3);
    TuckerParams p = init_params(static_cast<int>(kg.num_entities()),
                                 static_cast<int>(kg.num_relations()), c, 31);
    std::vector<TripleId> eval(kg.triples().begin(), kg.triples().begin() + 20);
    std::set<std::array<int, 3>> known_set;
    for (const TripleId& t : kg.triples()) known_set.insert({t.h, t.r, t.t});

    for (RankingMode mode : {RankingMode::Raw, RankingMode::Filtered}) {
        bool filtered = mode == RankingMode::Filtered;
        double mrr = 0.0;
        std::map<int, double> hits = {{1, 0}, {3, 0}, {10, 0}};
        for (const TripleId& t : eval) {
            double rank = oracle_rank(p, t, known_set, filtered, c);
            mrr += 1.0 / rank;
            for (auto& [n, count] : hits) {
                if (rank <= n) count += 1;
            }
        }
        mrr /= static_cast<double>(eval.size());
        RankingReport report = evaluate_ranking(p, eval, kg.triples(), mode, {}, c);
        CHECK(report.mrr == doctest::Approx(mrr).epsilon(1e-12));
        for (auto& [n, count] : hits) {
            CHECK(report.hits_at[n] ==
                  doctest::Approx(count / static_cast<double>(eval.size())).epsilon(1e-12));
        }
    }

    // filtered rank <= raw rank, triple by triple
    for (const TripleId& t : eval) {
        CHECK(oracle_rank(p, t, known_set, true, c) <= oracle_rank(p, t, known_set, false, c));
    }
}

TEST_CASE("evaluate_ranking: determinism, exclusions, errors") {
    KnowledgeGraph kg = tiny_graph();
    TuckerConfig c = small_config(4, 2);
    TuckerParams p = init_params(static_cast<int>(kg.num_entities()),
                                 static_cast<int>(kg.num_relations()), c, 37);
    std::vector<TripleId> eval(kg.triples().begin(), kg.triples().begin() + 10);

    RankingReport a = evaluate_ranking(p, eval, kg.triples(), RankingMode::Filtered, {}, c);
    RankingReport b = evaluate_ranking(p, eval, kg.triples(), RankingMode::Filtered, {}, c);
    CHECK(a.mrr == b.mrr);
    CHECK(a.hits_at == b.hits_at);
    CHECK(a.hits_at.at(1) <= a.hits_at.at(3));
    CHECK(a.hits_at.at(3) <= a.hits_at.at(10));
    CHECK(a.hits_at.at(1) <= a.mrr);
    CHECK(a.mrr <= 1.0);

    RankingReport skip = evaluate_ranking(p, eval, kg.triples(), RankingMode::Raw, {eval[0].r}, c);
    CHECK(skip.skipped > 0);
    CHECK(skip.evaluated + skip.skipped == eval.size());

    CHECK_THROWS_AS(evaluate_ranking(p, {}, {}, RankingMode::Raw, {}, c),
                    std::invalid_argument);
    std::vector<int> all_rels;
    for (int r = 0; r < static_cast<int>(kg.num_relations()); ++r) all_rels.push_back(r);
    CHECK_THROWS_AS(evaluate_ranking(p, eval, {}, RankingMode::Raw, all_rels, c),
                    std::invalid_argument);
}

TEST_CASE("predict_tail: full k is a permutation, unknown names are errors") {
    KnowledgeGraph kg = tiny_graph();
    TuckerConfig c = small_config(4, 2);
    TuckerParams p = init_params(static_cast<int>(kg.num_entities()),
                                 static_cast<int>(kg.num_relations()), c, 41);
    PredictResult result = predict_tail(p, kg, kg.entity_name(0), kg.relation_name(0),
                                        kg.num_entities(), RankingMode::Raw, kg.triples(), c);
    CHECK(result.top.size() == kg.num_entities());
    std::set<std::string> names;
    for (const Prediction& pr : result.top) names.insert(pr.entity);
    CHECK(names.size() == kg.num_entities());
    for (size_t i = 1; i < result.top.size(); ++i) {
        CHECK(result.top[i - 1].score >= result.top[i].score);
    }

    CHECK_THROWS_WITH_AS(predict_tail(p, kg, "nope", kg.relation_name(0), 3, RankingMode::Raw,
                                      kg.triples(), c),
                         doctest::Contains("nope"), std::runtime_error);
    CHECK_THROWS_WITH_AS(predict_tail(p, kg, kg.entity_name(0), "norel", 3, RankingMode::Raw,
                                      kg.triples(), c),
                         doctest::Contains("norel"), std::runtime_error);
}

TEST_CASE("predict_tail warns when a reverse relation targets CVE ids") {
    std::vector<Triple> triples = {
        {"term:xss", "describes", "CVE-2020-0001"},
        {"term:sqli", "describes", "CVE-2020-0002"},
    };
    KnowledgeGraph kg = build_graph(triples);
    SplitSet base;
    base.train = kg.triples();
    auto [aug, splits] = augment_reverse(kg, base);
    TuckerConfig c = small_config(2, 2);
    TuckerParams p = init_params(static_cast<int>(aug.num_entities()),
                                 static_cast<int>(aug.num_relations()), c, 43);
    // forward relation targets CVE ids -> its tails ARE the CVEs; the reverse
    // relation's tails are terms, so only 'describes' itself would warn if it were
    // reversed. Construct the reverse query: (CVE, describes_reverse, ?) -> terms.
    PredictResult no_warn = predict_tail(p, aug, "CVE-2020-0001", "describes_reverse", 2,
                                         RankingMode::Raw, splits.train, c);
    CHECK(!no_warn.cve_target_warning);

    // A reverse relation whose tails are CVEs: has_weakness_reverse in a graph
    // with weakness triples.
    KnowledgeGraph kg2 = build_graph({{"CVE-2020-0003", "has_weakness", "CWE-79"}});
    SplitSet base2;
    base2.train = kg2.triples();
    auto [aug2, splits2] = augment_reverse(kg2, base2);
    TuckerParams p2 = init_params(static_cast<int>(aug2.num_entities()),
                                  static_cast<int>(aug2.num_relations()), c, 44);
    PredictResult warn = predict_tail(p2, aug2, "CWE-79", "has_weakness_reverse", 1,
                                      RankingMode::Raw, splits2.train, c);
    CHECK(warn.cve_target_warning);
}

TEST_CASE("checkpoint round-trip and graph mismatch") {
    KnowledgeGraph kg = tiny_graph();
    TuckerConfig c = small_config(3, 2);
    TuckerParams p = init_params(static_cast<int>(kg.num_entities()),
                                 static_cast<int>(kg.num_relations()), c, 47);
    namespace fs = std::filesystem;
    std::string path = (fs::temp_directory_path() / "vulnkg_tucker_test.ckpt").string();
    save_checkpoint(p, kg, path);
    TuckerParams back = load_checkpoint(path, kg);
    CHECK(back.E == p.E);
    CHECK(back.R == p.R);
    CHECK(back.W == p.W);

    KnowledgeGraph other = build_graph({{"x", "r", "y"}});
    CHECK_THROWS_WITH_AS(load_checkpoint(path, other), doctest::Contains("does not match"),
                         std::runtime_error);
    fs::remove(path);
}

TEST_CASE("grid_search: one-config grid produces one ranked row") {
    KnowledgeGraph kg = tiny_graph();
    SplitSet base = split_triples(kg, {0.8, 0.1, 0.1}, 1);
    auto [aug, splits] = augment_reverse(kg, base);
    TuckerConfig c = small_config(4, 2);
    c.batch_size = 16;
    GridSpec spec;
    spec.hidden_dropouts = {0.0};
    spec.learning_rates = {0.01};
    spec.relation_dims = {2};
    spec.epochs = 2;
    spec.runs_per_config = 2;
    std::vector<GridResult> results = grid_search(aug, splits, c, spec);
    REQUIRE(results.size() == 1);
    CHECK(results[0].run_mrrs.size() == 2);
    CHECK(results[0].mean_valid_mrr >= 0.0);

    GridSpec bad;
    bad.hidden_dropouts = {};
    CHECK_THROWS_AS(grid_search(aug, splits, c, bad), std::invalid_argument);
}

TEST_CASE("default grid enumerates 27 combinations") {
    GridSpec spec;
    CHECK(spec.hidden_dropouts.size() * spec.learning_rates.size() *
              spec.relation_dims.size() ==
          27);
}
