// Command-line front end: serve, chat, annotate, cluster, train, eval, analyze.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dialcoord/annotation.hpp"
#include "dialcoord/clustering.hpp"
#include "dialcoord/config.hpp"
#include "dialcoord/error.hpp"
#include "dialcoord/interactive.hpp"
#include "dialcoord/metrics.hpp"
#include "dialcoord/service.hpp"
#include "dialcoord/store.hpp"
#include "dialcoord/trainer.hpp"

using namespace dialcoord;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_file;
    std::string task = "esc";
    bool synthetic = false;
    bool verbose = false;
};

AppConfig load_app_config(const Common& c) {
    AppConfig cfg = c.config_file.empty() ? default_config() : load_config(c.config_file);
    if (c.config_file.empty()) apply_environment(cfg);
    if (c.synthetic) cfg.synthetic_model = true;
    return cfg;
}

TaskProfile profile_for(const AppConfig& cfg, Task task) {
    return load_task_profile(task, cfg.templates_dir, cfg.candidate_count(task), cfg.top_k);
}

void write_json(const fs::path& file, const json& doc) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write " + file.string());
    out << doc.dump(2) << '\n';
}

json read_json(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("io_error", "cannot read " + file.string());
    return json::parse(in);
}

// Every data directory carries manifest.json listing what was produced there.
void update_manifest(const fs::path& dir, const std::string& key, json value) {
    const auto file = dir / "manifest.json";
    json doc = fs::exists(file) ? read_json(file) : json::object();
    doc[key] = std::move(value);
    write_json(file, doc);
}

fs::path annotation_file(const fs::path& dir, Task task) {
    return dir / (std::string(to_string(task)) + ".annotations.jsonl");
}

fs::path centroid_file(const fs::path& dir, Task task, const std::string& aspect) {
    return dir / (std::string(to_string(task)) + "." + aspect + ".centroids");
}

// One text per line, or a JSON array of strings.
std::vector<std::string> read_texts(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("io_error", "cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string body = ss.str();
    if (const auto t = trim(body); !t.empty() && t.front() == '[') return json::parse(t).get<std::vector<std::string>>();
    std::vector<std::string> out;
    std::string line;
    std::istringstream lines(body);
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    while (!out.empty() && trim(out.back()).empty()) out.pop_back();
    return out;
}

void print_table(const std::vector<std::pair<std::string, double>>& rows, double scale = 100.0) {
    std::size_t width = 0;
    for (const auto& [k, _] : rows) width = std::max(width, k.size());
    for (const auto& [k, v] : rows) {
        std::cout << std::left << std::setw(static_cast<int>(width) + 2) << k << std::right << std::fixed
                  << std::setprecision(2) << v * scale << '\n';
    }
}

// Annotated turns of one split, embedded for the ranker.
std::vector<TrainingTurn> training_turns(const std::vector<AnnotatedTurn>& annotations, const Corpus& corpus,
                                         const std::string& split, std::size_t aspect_count, Gateway& gateway) {
    std::set<std::string> ids;
    for (const auto& d : corpus.split(split).dialogues) ids.insert(d.dialogue_id);
    std::vector<TrainingTurn> out;
    for (const auto& a : annotations) {
        if (ids.contains(a.dialogue_id)) out.push_back(to_training_turn(a, aspect_count, gateway));
    }
    return out;
}

ProgressionContext load_progression(const fs::path& dir, const TaskProfile& profile, std::size_t dim) {
    ProgressionContext p;
    for (const auto& aspect : profile.aspects) {
        p.centroids.push_back(load_centroids(centroid_file(dir, profile.task, aspect.name), dim).centroids);
    }
    return p;
}

volatile std::sig_atomic_t g_stop = 0;
HttpService* g_service = nullptr;

void on_signal(int) {
    g_stop = 1;
    if (g_service) g_service->stop();
}

int cmd_serve(const Common& c, const std::string& host, int port) {
    const auto cfg = load_app_config(c);
    std::map<Task, std::shared_ptr<const Engine>> engines;
    auto gateway = make_gateway(cfg);
    for (Task task : {Task::esc, Task::persuasion}) {
        try {
            engines[task] = std::make_shared<Engine>(profile_for(cfg, task), gateway, load_engine_model(cfg, task));
            spdlog::info("serving task {}", to_string(task));
        } catch (const Error& e) {
            if (e.code() != "model_not_loaded") throw;
            spdlog::warn("no model for task {}; sessions for it will be refused", to_string(task));
        }
    }
    SessionManagerOptions so;
    so.event_log = cfg.event_log;
    SessionManager sessions(std::move(engines), so);
    HttpService service(sessions);
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    spdlog::info("listening on {}:{}", host, port);
    if (!service.listen(host, port) && !g_stop) {
        spdlog::error("cannot listen on {}:{}", host, port);
        return 1;
    }
    return 0;
}

int cmd_chat(const Common& c, bool show_trace) {
    const auto cfg = load_app_config(c);
    const Task task = parse_task(c.task);
    Engine engine(profile_for(cfg, task), make_gateway(cfg), load_engine_model(cfg, task));
    const auto& labels = engine.profile().labels;
    DialogueHistory history(task);
    std::cout << "Type a message; an empty line or EOF ends the chat.\n";
    std::string line;
    while (true) {
        std::cout << labels.user << ": " << std::flush;
        if (!std::getline(std::cin, line) || trim(line).empty()) break;
        history.append(Speaker::user_role, line);
        try {
            const auto trace = engine.run_turn(history);
            history.append(Speaker::system_role, trace.utterance);
            if (show_trace) {
                for (const auto& cand : trace.top_k) {
                    std::cout << "  [" << *cand.rank << "] " << engine.profile().aspect_name(cand.aspect_id) << ": "
                              << cand.text << '\n';
                }
            }
            std::cout << labels.system << ": " << trace.utterance << '\n';
        } catch (const Error& e) {
            // the user turn stays; the next message continues the same history
            std::cerr << "error (" << (e.stage().empty() ? "turn" : e.stage()) << "): " << e.what() << '\n';
        }
    }
    return 0;
}

int cmd_annotate(const Common& c, const fs::path& corpus_path, const fs::path& out_dir) {
    const auto cfg = load_app_config(c);
    const Task task = parse_task(c.task);
    const auto corpus = load_corpus(corpus_path, task);
    auto gateway = make_gateway(cfg);
    const auto file = annotation_file(out_dir, task);
    fs::create_directories(out_dir);
    const auto report = annotate_corpus(corpus, profile_for(cfg, task), *gateway, file);
    update_manifest(out_dir, std::string(to_string(task)) + ".annotations",
                    {{"file", file.filename().string()},
                     {"corpus", fs::absolute(corpus_path).string()},
                     {"corpus_hash", corpus.content_hash()},
                     {"report", report.to_json()}});
    std::cout << report.to_json().dump(2) << '\n';
    return report.failures.empty() ? 0 : 2;
}

int cmd_cluster(const Common& c, const fs::path& corpus_path, const fs::path& out_dir, const std::string& which,
                int k_min, int k_max, std::uint64_t seed) {
    const auto cfg = load_app_config(c);
    const Task task = parse_task(c.task);
    const auto profile = profile_for(cfg, task);
    const auto corpus = load_corpus(corpus_path, task).split("train");
    auto gateway = make_gateway(cfg);
    fs::create_directories(out_dir);
    bool any = false;
    json summary = json::array();
    for (const auto& aspect : profile.aspects) {
        if (which != "all" && which != aspect.name) continue;
        any = true;
        const auto targets = build_target_corpus(corpus, aspect, *gateway);
        auto set = select_k(targets.embeddings, k_min, k_max, seed);
        set.aspect_id = aspect.aspect_id;
        const auto file = centroid_file(out_dir, task, aspect.name);
        save_centroids(file, set, corpus.content_hash());
        summary.push_back({{"aspect", aspect.name},
                           {"file", file.filename().string()},
                           {"k", set.k},
                           {"silhouette", set.silhouette},
                           {"dialogues", targets.source_dialogue_ids.size()},
                           {"skipped", targets.skipped_dialogue_ids.size()}});
        std::cout << aspect.name << ": k=" << set.k << " silhouette=" << set.silhouette << '\n';
    }
    if (!any) throw Error("invalid_argument", "unknown aspect '" + which + "'");
    update_manifest(out_dir, std::string(to_string(task)) + ".centroids", summary);
    return 0;
}

struct TrainArgs {
    fs::path corpus;
    fs::path data_dir;
    fs::path out;
    TrainConfig train;
    std::size_t projection_dim = 256;
    std::size_t scorer_hidden = 64;
};

int cmd_train(const Common& c, TrainArgs a) {
    const auto cfg = load_app_config(c);
    const Task task = parse_task(c.task);
    const auto profile = profile_for(cfg, task);
    const auto corpus = load_corpus(a.corpus, task);
    auto gateway = make_gateway(cfg);
    const auto annotations = read_annotations(annotation_file(a.data_dir, task));
    const auto progression = load_progression(a.data_dir, profile, cfg.embedding_dim);
    const auto train = training_turns(annotations, corpus, "train", profile.aspect_count(), *gateway);
    const auto validation = training_turns(annotations, corpus, "validation", profile.aspect_count(), *gateway);
    spdlog::info("{} training turns, {} validation turns", train.size(), validation.size());

    RankerConfig rc;
    rc.aspect_count = profile.aspect_count();
    rc.state_dim = cfg.embedding_dim;
    rc.projection_dim = a.projection_dim;
    rc.scorer_hidden = a.scorer_hidden;
    rc.seed = a.train.seed;
    const auto result = train_ranker(train, validation, progression, RankerModel::initialize(rc), a.train,
                                     [](const EpochStats& s, const RankerModel&) {
                                         spdlog::info("epoch {}: loss {:.4f}, P@n {:.4f}", s.epoch, s.train_loss,
                                                      s.validation_precision);
                                     });
    if (a.out.empty()) a.out = a.data_dir / (std::string(to_string(task)) + ".ckpt");
    save_checkpoint(a.out, result.model, {result.best_epoch, result.best_validation_precision, corpus.content_hash()});
    update_manifest(a.data_dir, std::string(to_string(task)) + ".checkpoint",
                    {{"file", fs::absolute(a.out).string()},
                     {"best_epoch", result.best_epoch},
                     {"validation_precision", result.best_validation_precision}});
    std::cout << "best epoch " << result.best_epoch << ", validation P@" << a.train.precision_at << " = "
              << result.best_validation_precision << "\nwrote " << a.out.string() << '\n';
    return 0;
}

int cmd_eval_static(const fs::path& pred, const fs::path& ref, const fs::path& out) {
    const auto p = read_texts(pred);
    const auto r = read_texts(ref);
    const auto m = evaluate_static(p, r);
    const json doc = {{"n_examples", m.n_examples}, {"bleu_1", m.bleu1},         {"bleu_2", m.bleu2},
                      {"bleu_4", m.bleu4},          {"rouge_l", m.rouge_l},       {"meteor", m.meteor},
                      {"distinct_1", m.distinct1},  {"distinct_2", m.distinct2}, {"distinct_3", m.distinct3}};
    if (!out.empty()) write_json(out, doc);
    print_table({{"BLEU-1", m.bleu1},
                 {"BLEU-2", m.bleu2},
                 {"BLEU-4", m.bleu4},
                 {"ROUGE-L", m.rouge_l},
                 {"METEOR", m.meteor},
                 {"Distinct-1", m.distinct1},
                 {"Distinct-2", m.distinct2},
                 {"Distinct-3", m.distinct3}});
    std::cout << "(" << m.n_examples << " examples, scores x100)\n";
    return 0;
}

int cmd_eval_ranking(const Common& c, const fs::path& corpus_path, const fs::path& data_dir, fs::path model,
                     const std::string& split, const fs::path& out) {
    const auto cfg = load_app_config(c);
    const Task task = parse_task(c.task);
    const auto profile = profile_for(cfg, task);
    const auto corpus = load_corpus(corpus_path, task);
    auto gateway = make_gateway(cfg);
    if (model.empty()) model = data_dir / (std::string(to_string(task)) + ".ckpt");
    const auto ckpt = load_checkpoint(model);
    const auto progression = load_progression(data_dir, profile, cfg.embedding_dim);
    const auto turns =
        training_turns(read_annotations(annotation_file(data_dir, task)), corpus, split, profile.aspect_count(), *gateway);
    if (turns.empty()) throw Error("empty_dataset", "no annotated turns in split " + split);
    json doc = {{"split", split}, {"turns", turns.size()}};
    std::vector<std::pair<std::string, double>> rows;
    for (int n : {1, 3}) {
        const double p = validation_precision(ckpt.model, progression, turns, n);
        doc["precision_at_" + std::to_string(n)] = p;
        rows.emplace_back("P@" + std::to_string(n), p);
    }
    if (!out.empty()) write_json(out, doc);
    print_table(rows);
    return 0;
}

int cmd_eval_interactive(const Common& c, const std::string& system_name, int n, const fs::path& corpus_path,
                         const fs::path& problems_path, const fs::path& out) {
    const auto cfg = load_app_config(c);
    const Task task = parse_task(c.task);
    const auto profile = profile_for(cfg, task);
    auto gateway = make_gateway(cfg);

    std::vector<std::string> problems;
    if (!problems_path.empty()) {
        problems = read_texts(problems_path);
    } else if (!corpus_path.empty()) {
        auto corpus = load_corpus(corpus_path, task);
        auto test = corpus.split(corpus.splits.contains("test") ? "test" : "train");
        for (const auto& d : test.dialogues) {
            if (d.problem_summary) problems.push_back(*d.problem_summary);
        }
    }
    if (problems.empty()) throw Error("invalid_argument", "no problem summaries (pass --problems or --corpus)");

    std::unique_ptr<Engine> engine;
    SystemFn system;
    if (system_name == "engine") {
        engine = std::make_unique<Engine>(profile, gateway, load_engine_model(cfg, task));
        system = make_engine_system(*engine);
    } else {
        const auto kind = parse_baseline(system_name);
        system = make_baseline_system(kind, profile, gateway);
    }

    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream file(out, std::ios::binary | std::ios::trunc);
    if (!file) throw Error("io_error", "cannot write " + out.string());
    int aborted = 0;
    double rounds = 0.0;
    std::map<std::string, int> reasons;
    for (int i = 0; i < n; ++i) {
        const auto& problem = problems[static_cast<std::size_t>(i) % problems.size()];
        auto t = run_interactive_session(system, make_llm_seeker(profile, problem, gateway), task, problem);
        t.system_name = system_name;
        file << to_json(t).dump() << '\n';
        aborted += t.aborted ? 1 : 0;
        rounds += t.rounds();
        ++reasons[t.termination ? std::string(to_string(*t.termination)) : "aborted"];
    }
    std::cout << "sessions  " << n << "\nmean rounds  " << std::fixed << std::setprecision(2) << rounds / n << '\n';
    for (const auto& [reason, count] : reasons) std::cout << reason << "  " << count << '\n';
    std::cout << "transcripts written to " << out.string() << '\n';
    return aborted == 0 ? 0 : 2;
}

int cmd_analyze_aspects(const Common& c, const fs::path& in, const fs::path& corpus_path, const fs::path& out) {
    const auto cfg = load_app_config(c);
    const Task task = parse_task(c.task);
    const auto profile = profile_for(cfg, task);
    const int n_t = static_cast<int>(profile.aspect_count());
    AspectDistribution dist;
    if (!corpus_path.empty()) {
        dist = aspect_distribution(load_corpus(corpus_path, task), profile.strategies, n_t);
    } else {
        std::vector<SessionTranscript> transcripts;
        std::ifstream file(in, std::ios::binary);
        if (!file) throw Error("io_error", "cannot read " + in.string());
        std::string line;
        while (std::getline(file, line)) {
            if (!trim(line).empty()) transcripts.push_back(session_transcript_from_json(json::parse(line)));
        }
        dist = aspect_distribution(transcripts, n_t);
    }
    std::vector<std::string> names;
    for (const auto& a : profile.aspects) names.push_back(a.name);
    const auto doc = dist.to_json(names);
    if (!out.empty()) write_json(out, doc);
    std::cout << "round";
    for (const auto& name : names) std::cout << '\t' << name;
    std::cout << '\n' << std::fixed << std::setprecision(3);
    for (const auto& [round, row] : dist.rows) {
        std::cout << round;
        for (double v : row) std::cout << '\t' << v;
        std::cout << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-agent dialogue coordination engine"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config_file, "JSON config file (mock provider when omitted)");
    app.add_flag("--synthetic", common.synthetic, "Use a seeded untrained model when none is configured");
    app.add_flag("-v,--verbose", common.verbose, "Debug logging");
    auto add_task = [&](CLI::App* sub) {
        sub->add_option("--task", common.task, "esc or persuasion")->check(CLI::IsMember({"esc", "persuasion"}));
    };

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    bool show_trace = false;
    auto* chat = app.add_subcommand("chat", "Terminal chat driving the turn pipeline");
    add_task(chat);
    chat->add_flag("--trace", show_trace, "Print the top-ranked candidates each turn");

    fs::path corpus, out_dir = "data/artifacts";
    auto* annotate = app.add_subcommand("annotate", "Annotate system turns with candidates and rank labels");
    add_task(annotate);
    annotate->add_option("--corpus", corpus)->required();
    annotate->add_option("--out", out_dir, "Data directory");

    std::string aspect = "all";
    int k_min = 2, k_max = 10;
    std::uint64_t seed = 0;
    auto* cluster = app.add_subcommand("cluster", "Cluster end-of-dialogue states into target centroids");
    add_task(cluster);
    cluster->add_option("--corpus", corpus)->required();
    cluster->add_option("--aspect", aspect, "Aspect name or 'all'");
    cluster->add_option("--out", out_dir, "Data directory");
    cluster->add_option("--k-min", k_min);
    cluster->add_option("--k-max", k_max);
    cluster->add_option("--seed", seed);

    TrainArgs targs;
    auto* train = app.add_subcommand("train", "Train the ranker from annotations and centroids");
    add_task(train);
    train->add_option("--corpus", targs.corpus, "Corpus with the train/validation split")->required();
    train->add_option("--data", targs.data_dir, "Data directory from annotate and cluster")->required();
    train->add_option("--out", targs.out, "Checkpoint path (default <data>/<task>.ckpt)");
    train->add_option("--epochs", targs.train.epochs);
    train->add_option("--lr", targs.train.learning_rate);
    train->add_option("--weight-decay", targs.train.weight_decay);
    train->add_option("--batch-size", targs.train.batch_size);
    train->add_option("--alpha", targs.train.loss.mix, "Weight of the triplet term");
    train->add_option("--margin", targs.train.loss.margin);
    train->add_option("--seed", targs.train.seed);
    train->add_option("--projection-dim", targs.projection_dim);
    train->add_option("--scorer-hidden", targs.scorer_hidden, "0 for an affine scorer");
    train->add_flag("--linear-decay", targs.train.linear_decay);
    train->add_flag("!--no-progression", targs.train.use_progression, "Ablate the progression input");

    auto* eval = app.add_subcommand("eval", "Evaluation");
    eval->require_subcommand(1);
    fs::path pred, ref, report;
    auto* eval_static = eval->add_subcommand("static", "Reference-based generation metrics");
    eval_static->add_option("--pred", pred)->required()->check(CLI::ExistingFile);
    eval_static->add_option("--ref", ref)->required()->check(CLI::ExistingFile);
    eval_static->add_option("--out", report, "JSON report");

    fs::path data_dir, model;
    std::string split = "test";
    auto* eval_ranking = eval->add_subcommand("ranking", "Precision@n of a trained ranker");
    add_task(eval_ranking);
    eval_ranking->add_option("--corpus", corpus)->required();
    eval_ranking->add_option("--annotations", data_dir, "Data directory")->required();
    eval_ranking->add_option("--model", model);
    eval_ranking->add_option("--split", split);
    eval_ranking->add_option("--out", report);

    std::string system = "engine";
    int n_sessions = 20;
    fs::path problems, transcripts = "transcripts.jsonl";
    auto* eval_inter = eval->add_subcommand("interactive", "Simulated-seeker sessions");
    add_task(eval_inter);
    eval_inter->add_option("--system", system)->check(CLI::IsMember({"engine", "gpt35", "gpt35_cot", "mixinit"}));
    eval_inter->add_option("--n", n_sessions)->check(CLI::PositiveNumber);
    eval_inter->add_option("--corpus", corpus, "Problem summaries from the test split");
    eval_inter->add_option("--problems", problems, "One problem summary per line");
    eval_inter->add_option("--out", transcripts);

    auto* analyze = app.add_subcommand("analyze", "Analyses");
    analyze->require_subcommand(1);
    fs::path in;
    auto* aspects = analyze->add_subcommand("aspects", "Per-round distribution of the prioritized aspect");
    add_task(aspects);
    aspects->add_option("--in", in, "Transcripts from eval interactive");
    aspects->add_option("--corpus", corpus, "Use the corpus strategy annotations instead");
    aspects->add_option("--out", report);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(common.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        if (*serve) return cmd_serve(common, host, port);
        if (*chat) return cmd_chat(common, show_trace);
        if (*annotate) return cmd_annotate(common, corpus, out_dir);
        if (*cluster) return cmd_cluster(common, corpus, out_dir, aspect, k_min, k_max, seed);
        if (*train) return cmd_train(common, targs);
        if (*eval_static) return cmd_eval_static(pred, ref, report);
        if (*eval_ranking) return cmd_eval_ranking(common, corpus, data_dir, model, split, report);
        if (*eval_inter) return cmd_eval_interactive(common, system, n_sessions, corpus, problems, transcripts);
        if (*aspects) {
            if (in.empty() == corpus.empty()) throw Error("invalid_argument", "pass exactly one of --in or --corpus");
            return cmd_analyze_aspects(common, in, corpus, report);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
