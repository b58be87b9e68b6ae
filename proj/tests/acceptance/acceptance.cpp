// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1 for ctest).

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "../support/planted.hpp"
#include "dialcoord/clustering.hpp"
#include "dialcoord/config.hpp"
#include "dialcoord/hash.hpp"
#include "dialcoord/interactive.hpp"
#include "dialcoord/metrics.hpp"
#include "dialcoord/pipeline.hpp"
#include "dialcoord/progression.hpp"
#include "dialcoord/pseudo_label.hpp"
#include "dialcoord/ranking_loss.hpp"
#include "dialcoord/trainer.hpp"

using namespace dialcoord;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

bool g_update_golden = false;

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(r, c);
    for (auto& x : m.data) x = n(rng);
    return m;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// ------------------------------------------------------------ clustering

Outcome clustering_oracle() {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> npts(3, 8), kdist(1, 3);
    int inertia_ok = 0, sil_ok = 0, sil_cases = 0;
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int n = npts(rng);
        const int k = std::min(kdist(rng), n);
        Matrix p = random_matrix(static_cast<std::size_t>(n), 2, rng);
        const auto res = kmeans(p, k, static_cast<std::uint64_t>(inst));
        const double best = oracle::exhaustive_min_inertia(p, k);
        worst = std::max(worst, std::abs(res.inertia - best));
        if (close(res.inertia, best, 1e-9)) ++inertia_ok;

        // silhouette of the k-means labels and of an arbitrary labelling
        std::vector<std::vector<int>> labelings{res.labels};
        std::vector<int> arbitrary(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) arbitrary[static_cast<std::size_t>(i)] = i % 3;
        labelings.push_back(arbitrary);
        for (const auto& lab : labelings) {
            std::set<int> distinct(lab.begin(), lab.end());
            if (distinct.size() < 2) continue;
            ++sil_cases;
            if (std::abs(silhouette(p, lab) - oracle::silhouette(p, lab)) <= 1e-9) ++sil_ok;
        }
    }
    std::ostringstream d;
    d << "inertia optimal " << inertia_ok << "/100 (max gap " << worst << "), silhouette " << sil_ok << "/"
      << sil_cases;
    return {inertia_ok == 100 && sil_ok == sil_cases, d.str()};
}

Outcome model_selection() {
    int recovered = 0;
    std::string ks;
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(seed));
        std::normal_distribution<double> noise(0.0, 1.0);
        // three centres pairwise 10 sigma apart
        const double offset = 10.0 / std::sqrt(2.0);
        Matrix p(60, 8);
        for (std::size_t i = 0; i < 60; ++i) {
            for (std::size_t d = 0; d < 8; ++d) p(i, d) = noise(rng);
            p(i, i / 20) += offset;
        }
        const auto c = select_k(p, 2, 10, static_cast<std::uint64_t>(seed));
        if (c.k == 3) ++recovered;
        ks += std::to_string(c.k) + (seed < 19 ? "," : "");
    }
    return {recovered >= 19, "recovered k=3 in " + std::to_string(recovered) + "/20 seeds (k: " + ks + ")"};
}

// ------------------------------------------------------------ attention

Outcome attention_math() {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dimd(1, 16), kd(1, 10);
    std::uniform_real_distribution<double> scale(0.01, 3.0);
    int sum_ok = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto dim = static_cast<std::size_t>(dimd(rng));
        const auto k = static_cast<std::size_t>(kd(rng));
        Matrix c = random_matrix(k, dim, rng, scale(rng));
        Matrix w = random_matrix(dim, dim, rng, scale(rng));
        Matrix s = random_matrix(1, dim, rng, scale(rng));
        const auto t = attend_centroids(s.data, c, w);
        if (std::abs(oracle::softmax_sum(t.weights) - 1.0) <= 1e-9) ++sum_ok;
    }
    // one centroid: the output is ReLU(e) bit for bit
    int single_ok = 0;
    for (int i = 0; i < 100; ++i) {
        Matrix c = random_matrix(1, 8, rng);
        Matrix w = random_matrix(8, 8, rng);
        Matrix s = random_matrix(1, 8, rng);
        const Vec v = estimate_target(s.data, c, w);
        bool same = true;
        for (std::size_t d = 0; d < 8; ++d) same &= v[d] == std::max(0.0, c(0, d));
        if (same) ++single_ok;
    }
    // every centroid non-positive: the clamp yields exact zeros
    int clamp_ok = 0;
    for (int i = 0; i < 100; ++i) {
        Matrix c = random_matrix(4, 8, rng);
        for (auto& x : c.data) x = -std::abs(x);
        Matrix w = random_matrix(8, 8, rng);
        Matrix s = random_matrix(1, 8, rng);
        const Vec v = estimate_target(s.data, c, w);
        if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) ++clamp_ok;
    }
    std::ostringstream d;
    d << "softmax sums " << sum_ok << "/1000, single-centroid exact " << single_ok << "/100, clamp exact " << clamp_ok
      << "/100";
    return {sum_ok == 1000 && single_ok == 100 && clamp_ok == 100, d.str()};
}

// ------------------------------------------------------------ gradient check

Outcome gradient_check() {
    RankerConfig cfg;
    cfg.aspect_count = 2;
    cfg.state_dim = 4;
    cfg.projection_dim = 4;
    cfg.scorer_hidden = 6;
    cfg.seed = 3;
    RankerModel model = RankerModel::initialize(cfg);
    std::mt19937_64 rng(17);
    // perturb away from the near-identity init so every block is exercised
    for (auto& w : model.attention) {
        Matrix noise = random_matrix(4, 4, rng, 0.3);
        for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] += noise.data[i];
    }
    // Gradient reaches p~ only when candidates differ in their scorer ReLU
    // pattern (the loss sees score differences), so spread the biases.
    for (auto& b : model.mlp_hidden_bias) b = 0.5;
    for (auto& b : model.scorer_hidden_bias) b = std::normal_distribution<double>(0.0, 1.0)(rng);
    ProgressionContext prog;
    for (int a = 0; a < 2; ++a) {
        Matrix c = random_matrix(3, 4, rng);
        for (auto& x : c.data) x = std::abs(x) + 0.1;  // keep the target ReLU active
        prog.centroids.push_back(c);
    }
    TrainingTurn turn;
    for (int a = 0; a < 2; ++a) turn.features.states.push_back(random_matrix(1, 4, rng).data);
    for (int c = 0; c < 3; ++c) turn.features.contexts.push_back(random_matrix(1, 4, rng, 2.0).data);
    turn.labels = {2, 1, 3};
    turn.relevant = {false, true, false};
    const LossConfig loss;

    RankerModel grad = RankerModel::zeros(cfg);
    turn_loss_and_grad(model, prog, turn, loss, &grad);

    const double eps = 1e-6;
    auto params = model.parameters();
    const auto grads = grad.parameters();
    double worst = 0.0;
    std::string worst_name;
    std::map<std::string, std::pair<double, double>> group;  // group -> (|a - fd|^2, max(|a|,|fd|)^2)
    for (std::size_t p = 0; p < params.size(); ++p) {
        const std::string name = params[p].name;
        const std::string grp = name.substr(0, name.find('.'));
        double diff2 = 0.0, norm_a = 0.0, norm_f = 0.0;
        for (std::size_t i = 0; i < params[p].values.size(); ++i) {
            double& theta = params[p].values[i];
            const double saved = theta;
            theta = saved + eps;
            const double up = turn_loss_and_grad(model, prog, turn, loss, nullptr);
            theta = saved - eps;
            const double down = turn_loss_and_grad(model, prog, turn, loss, nullptr);
            theta = saved;
            const double fd = (up - down) / (2 * eps);
            const double a = grads[p].values[i];
            diff2 += (a - fd) * (a - fd);
            norm_a += a * a;
            norm_f += fd * fd;
        }
        group[grp].first += diff2;
        group[grp].second += std::max(norm_a, norm_f);
    }
    bool ok = true;
    std::ostringstream d;
    for (const auto& [name, v] : group) {
        const double rel = v.second > 0 ? std::sqrt(v.first / v.second) : 0.0;
        if (v.second < 1e-12) ok = false;  // a dead block would make the check vacuous
        if (rel > worst) {
            worst = rel;
            worst_name = name;
        }
        ok &= rel < 1e-4;
        d << name << "=" << rel << " (|g|=" << std::sqrt(v.second) << ") ";
    }
    d << "(max " << worst << " in " << worst_name << ")";
    return {ok, d.str()};
}

// ------------------------------------------------------------ losses

Outcome loss_endpoints() {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> nd(0.0, 1.0);
    int ok_t = 0, ok_p = 0;
    for (int i = 0; i < 200; ++i) {
        const int n = 2 + i % 10;
        Vec scores(static_cast<std::size_t>(n));
        for (auto& s : scores) s = nd(rng);
        std::vector<int> labels(static_cast<std::size_t>(n));
        std::iota(labels.begin(), labels.end(), 1);
        std::shuffle(labels.begin(), labels.end(), rng);
        LossConfig c;
        c.mix = 1.0;
        if (std::abs(combined_loss(scores, labels, c) - triplet_loss(scores, labels, c.margin)) <= 1e-12) ++ok_t;
        c.mix = 0.0;
        if (std::abs(combined_loss(scores, labels, c) - pointwise_loss(scores, labels, c.temperature)) <= 1e-12) ++ok_p;
    }
    const Vec pair{0.5, 0.4};
    const std::vector<int> pair_labels{1, 2};
    const double worked = triplet_loss(pair, pair_labels, 0.2);

    int hard_ok = 0;
    for (int i = 0; i < 100; ++i) {
        const int n = 2 + i % 12;
        Vec scores(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) scores[static_cast<std::size_t>(k)] = 0.01 * k + 0.001 * (i % 7);
        std::shuffle(scores.begin(), scores.end(), rng);
        const Vec r = soft_rank(scores, 1e-6);
        bool good = true;
        for (std::size_t k = 0; k < scores.size(); ++k) {
            const auto expected = 1 + std::count_if(scores.begin(), scores.end(), [&](double s) { return s < scores[k]; });
            good &= r[k] == static_cast<double>(expected);
        }
        if (good) ++hard_ok;
    }
    std::ostringstream d;
    d.precision(17);
    d << "alpha=1 " << ok_t << "/200, alpha=0 " << ok_p << "/200, worked triplet " << worked
      << ", hard-limit ranks " << hard_ok << "/100";
    return {ok_t == 200 && ok_p == 200 && worked == 0.3 && hard_ok == 100, d.str()};
}

// ------------------------------------------------------------ trainer

Outcome trainer() {
    const auto data = planted::make_dataset(planted::Options{});
    TrainConfig cfg;
    cfg.learning_rate = 3e-2;
    cfg.weight_decay = 0.1;
    cfg.epochs = 50;
    cfg.seed = 7;
    const auto full = train_ranker(data.train, data.validation, data.progression, data.initial, cfg);
    cfg.use_progression = false;
    const auto ablated = train_ranker(data.train, data.validation, data.progression, data.initial, cfg);
    const double random_p3 = oracle::random_precision_at(3, 3, 9);
    std::ostringstream d;
    d << "P@3 full " << full.best_validation_precision << " (epoch " << full.best_epoch << "), without progression "
      << ablated.best_validation_precision << ", random " << random_p3;
    const bool ok = full.best_validation_precision >= 0.9 && full.best_validation_precision > random_p3 &&
                    full.best_validation_precision > ablated.best_validation_precision;
    return {ok, d.str()};
}

// ------------------------------------------------------------ pseudo labels

Outcome pseudo_labeling() {
    struct PairCase {
        int a1;
        double s1;
        int a2;
        double s2;
        AspectSet gt;
        bool expected;
    };
    const std::vector<PairCase> pairs = {
        {1, 0.1, 2, 0.9, {1}, true},      // aspect match beats similarity
        {1, 0.1, 2, 0.9, {2}, false},     // ... in either direction
        {1, 0.8, 1, 0.3, {1}, true},      // both match: more similar wins
        {2, 0.2, 3, 0.5, {1}, false},     // neither matches: more similar wins
        {1, 0.4, 2, 0.4, {1, 2}, false},  // tie: not strictly better
        {3, 0.1, 2, 0.9, {1, 3}, true},   // union of gold aspects
        {2, 0.7, 3, 0.6, {}, true},       // no gold aspects: similarity only
    };
    int passed = 0;
    for (const auto& c : pairs) passed += pseudo_label_compare(c.a1, c.s1, c.a2, c.s2, c.gt) == c.expected;

    auto cand = [](int a, int idx) { return TopicCandidate{a, idx, "t", std::nullopt, std::nullopt}; };
    struct ListCase {
        std::vector<TopicCandidate> cands;
        std::vector<double> sims;
        AspectSet gt;
        std::vector<int> positions;
    };
    const std::vector<ListCase> lists = {
        // aspect branch then similarity branch
        {{cand(1, 1), cand(1, 2), cand(2, 1), cand(3, 1)}, {0.2, 0.5, 0.9, 0.1}, {1}, {2, 1, 3, 4}},
        // equal similarity across aspects: aspect id then index
        {{cand(3, 1), cand(2, 2), cand(2, 1)}, {0.5, 0.5, 0.5}, {1}, {3, 2, 1}},
        // equal similarity within the gold aspect
        {{cand(1, 3), cand(1, 1), cand(2, 1), cand(1, 2)}, {0.3, 0.3, 0.9, 0.3}, {1}, {3, 1, 4, 2}},
    };
    for (const auto& l : lists) {
        const auto labels = build_rank_labels(l.cands, l.sims, l.gt);
        bool same = true;
        for (std::size_t i = 0; i < labels.size(); ++i) same &= labels[i].position == l.positions[i];
        passed += same;
    }
    const int hand_total = static_cast<int>(pairs.size() + lists.size());

    std::mt19937_64 rng(31);
    int consistent = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        const int n = 2 + inst % 11;
        std::vector<TopicCandidate> cands;
        std::vector<double> sims;
        for (int i = 0; i < n; ++i) {
            cands.push_back(cand(1 + static_cast<int>(rng() % 3), i + 1));
            sims.push_back(static_cast<double>(rng() % 5) / 4.0);  // coarse grid forces ties
        }
        AspectSet gt;
        for (int a = 1; a <= 3; ++a) {
            if (rng() % 2) gt.insert(a);
        }
        const auto labels = build_rank_labels(cands, sims, gt);
        bool ok = true;
        std::set<int> seen;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            seen.insert(labels[i].position);
            for (std::size_t j = 0; j < labels.size(); ++j) {
                if (pseudo_label_compare(cands[i].aspect_id, sims[i], cands[j].aspect_id, sims[j], gt)) {
                    ok &= labels[i].position < labels[j].position;
                }
            }
        }
        ok &= seen.size() == labels.size() && *seen.begin() == 1 && *seen.rbegin() == n;
        consistent += ok;
    }
    std::ostringstream d;
    d << "hand oracles " << passed << "/" << hand_total << ", pairwise-consistent " << consistent << "/1000";
    return {passed == hand_total && hand_total == 10 && consistent == 1000, d.str()};
}

// ------------------------------------------------------------ metrics

std::string random_sentence(std::mt19937_64& rng) {
    static const std::vector<std::string> vocab = {
        "run", "running", "runs", "walk", "walked", "walking", "happy", "happiness", "the", "a", "feel", "feeling",
        "feels", "friend", "friends", "talk", "talking", "I", "you", "help", ",", ".", "?", "!", "don't", "sleep"};
    const int len = 1 + static_cast<int>(rng() % 9);
    std::string s;
    for (int i = 0; i < len; ++i) s += (i ? " " : "") + vocab[rng() % vocab.size()];
    return s;
}

Outcome metrics() {
    int bad = 0;
    std::mt19937_64 rng(41);
    for (int inst = 0; inst < 100; ++inst) {
        const int m = 1 + inst % 5;
        std::vector<std::string> c, r;
        for (int i = 0; i < m; ++i) {
            c.push_back(random_sentence(rng));
            r.push_back(rng() % 4 == 0 ? c.back() : random_sentence(rng));
        }
        for (int n : {1, 2, 4}) bad += std::abs(bleu_n(c, r, n) - oracle::bleu(c, r, n)) > 1e-9;
        bad += std::abs(rouge_l(c, r) - oracle::rouge_l(c, r)) > 1e-9;
        double met = 0;
        for (int i = 0; i < m; ++i) {
            met += oracle::meteor(c[static_cast<std::size_t>(i)], r[static_cast<std::size_t>(i)],
                                  [](const std::string& w) { return porter_stem(w); });
        }
        bad += std::abs(meteor_simplified(c, r) - met / m) > 1e-9;
        for (int n : {1, 2}) {
            std::size_t grams = 0;
            for (const auto& t : c) grams += oracle::grams(oracle::words(t), n).size();
            if (grams == 0) continue;  // undefined; the library raises too_short
            bad += std::abs(distinct_n(c, n) - oracle::distinct(c, n)) > 1e-9;
        }
    }
    int worked = 0;
    worked += bleu_n({"a b c d"}, {"a b x d"}, 1) == 0.75;
    worked += bleu_n({"a b c d e"}, {"a b c d e"}, 4) == 1.0;
    worked += bleu_n({"a b"}, {"c d"}, 1) == 0.0;
    worked += std::abs(rouge_l({"a b c"}, {"a x c"}) - 2.0 / 3.0) < 1e-15;
    worked += rouge_l({"a b"}, {"a b"}) == 1.0;
    worked += meteor_simplified({"hello"}, {"hello"}) == 0.5;
    worked += meteor_simplified({"x"}, {"y"}) == 0.0;
    worked += porter_stem("running") == porter_stem("runs");
    worked += distinct_n({"a a b"}, 1) == 2.0 / 3.0;
    worked += distinct_n({"a a a a"}, 1) == 0.25;
    std::ostringstream d;
    d << "naive-reference mismatches " << bad << " over 100 instances, worked examples " << worked << "/10";
    return {bad == 0 && worked == 10, d.str()};
}

// ------------------------------------------------------------ determinism

std::string snapshot_turn(Task task) {
    const auto profile = load_task_profile(task, default_templates_dir());
    auto gateway = make_mock_gateway();
    auto model = std::make_shared<EngineModel>(EngineModel::synthetic(3, kDefaultEmbeddingDim, 42));
    EngineOptions opts;
    opts.clock = fake_clock();
    Engine engine(profile, gateway, model, opts);
    DialogueHistory h(task);
    if (task == Task::esc) {
        h.append(Speaker::user_role, "Hi, I have been feeling really stressed about work lately.");
    } else {
        h.append(Speaker::system_role, "Hello! How are you doing today?");
        h.append(Speaker::user_role, "I'm good, thanks. What is this about?");
    }
    return to_json(engine.run_turn(h)).dump(2);
}

Outcome determinism() {
    std::vector<std::string> notes;
    bool ok = true;

    // byte-identical snapshots across runs and against the committed golden files
    for (Task task : {Task::esc, Task::persuasion}) {
        const std::string a = snapshot_turn(task);
        const std::string b = snapshot_turn(task);
        const auto trace = turn_trace_from_json(nlohmann::json::parse(a));
        const int m = default_candidate_count(task);
        const bool shape = trace.summaries.size() == 3 && trace.candidates.size() == static_cast<std::size_t>(3 * m) &&
                           trace.top_k.size() == 3 && trace.top_k.front().aspect_id == trace.prioritized_aspect &&
                           trace.candidates.front().rank == 1;
        const fs::path golden = fs::path(DIALCOORD_GOLDEN_DIR) / ("turn_trace_" + std::string(to_string(task)) + ".json");
        if (g_update_golden) std::ofstream(golden) << a << '\n';
        std::string stored;
        if (std::ifstream in{golden}) {
            std::stringstream buf;
            buf << in.rdbuf();
            stored = buf.str();
        }
        const bool golden_ok = stored == a + "\n";
        ok &= a == b && shape && golden_ok;
        notes.push_back(std::string(to_string(task)) + (a == b ? " repeatable" : " NOT repeatable") +
                        (golden_ok ? "+golden" : " golden-mismatch") + (shape ? "" : " bad-shape"));
    }

    // interactive sessions terminate within the cap
    const auto profile = load_task_profile(Task::esc, default_templates_dir());
    auto gateway = make_mock_gateway();
    auto model = std::make_shared<EngineModel>(EngineModel::synthetic(3, kDefaultEmbeddingDim, 42));
    EngineOptions opts;
    opts.clock = fake_clock();
    Engine engine(profile, gateway, model, opts);
    const std::vector<std::string> problems = {
        "I lost my job and feel worthless.", "My best friend moved away.", "Exams are stressing me out.",
        "I argue with my parents every day.", "I cannot sleep because of work."};
    int terminated = 0, sessions = 0;
    std::vector<SystemFn> systems = {make_engine_system(engine)};
    for (auto kind : {BaselineKind::gpt35, BaselineKind::gpt35_cot, BaselineKind::mixinit}) {
        systems.push_back(make_baseline_system(kind, profile, gateway, {}));
    }
    for (const auto& system : systems) {
        for (const auto& p : problems) {
            const auto t = run_interactive_session(system, make_llm_seeker(profile, p, gateway), Task::esc, p);
            ++sessions;
            terminated += !t.aborted && t.termination && t.rounds() <= kMaxSessionRounds;
        }
    }
    // a seeker that never repeats itself runs into the round cap
    auto scramble = [](std::size_t salt) {
        std::uint64_t state = salt;
        std::string s;
        for (int i = 0; i < 24; ++i) s += static_cast<char>('a' + splitmix64(state) % 26);
        return s;
    };
    SeekerFn fresh = [&](const DialogueHistory& h) { return scramble(2 * h.size() + 1); };
    SystemFn distinct = [&](const DialogueHistory& h) { return SystemReply{scramble(2 * h.size() + 2), std::nullopt}; };
    const auto capped = run_interactive_session(distinct, fresh, Task::esc, "p");
    const bool cap_ok = capped.rounds() == 10 && capped.termination == TerminationReason::max_rounds;
    ok &= terminated == sessions && cap_ok;
    notes.push_back("sessions terminated " + std::to_string(terminated) + "/" + std::to_string(sessions) +
                    ", never-repeating run stopped at " + std::to_string(capped.rounds()) + " rounds");

    // hyperparameter defaults as stated for the published setup
    const LossConfig loss;
    const TrainConfig train;
    const bool defaults = default_candidate_count(Task::esc) == 4 && default_candidate_count(Task::persuasion) == 3 &&
                          kDefaultTopK == 3 && loss.mix == 0.9 && loss.margin == 0.2 && train.epochs == 5 &&
                          train.learning_rate == 2e-5 && load_task_profile(Task::esc, default_templates_dir()).top_k == 3;
    ok &= defaults;
    notes.push_back(defaults ? "defaults m=4/3 K=3 alpha=0.9 tau=0.2" : "DEFAULTS DIFFER");

    std::string d;
    for (std::size_t i = 0; i < notes.size(); ++i) d += (i ? "; " : "") + notes[i];
    return {ok, d};
}

struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--update-golden") == 0) g_update_golden = true;
    }
    const std::vector<Criterion> criteria = {
        {"clustering-oracle", 10, clustering_oracle}, {"model-selection", 30, model_selection},
        {"attention-math", 10, attention_math},       {"gradient-check", 5, gradient_check},
        {"loss-endpoints", 10, loss_endpoints},       {"trainer", 120, trainer},
        {"pseudo-labeling", 10, pseudo_labeling},     {"metrics", 10, metrics},
        {"end-to-end-determinism", 60, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s  %-24s %s [%.2fs%s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    in_time ? "" : " over budget");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
