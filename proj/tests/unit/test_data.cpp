#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dialcoord/annotation.hpp"
#include "dialcoord/config.hpp"
#include "dialcoord/corpus.hpp"
#include "dialcoord/error.hpp"
#include "dialcoord/store.hpp"

using namespace dialcoord;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("dialcoord_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& f) const { return path / f; }
};

void write_file(const fs::path& p, const std::string& content) { std::ofstream(p, std::ios::binary) << content; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json native_doc() {
    return {
        {"task", "esc"},
        {"dialogues",
         {
             {{"dialogue_id", "d2"},
              {"problem_summary", "Lost a job"},
              {"turns",
               {{{"speaker", "seeker"}, {"text", "I lost my job."}},
                {{"speaker", "supporter"}, {"text", "How long ago?"}, {"strategies", {"Question"}}},
                {{"speaker", "seeker"}, {"text", "Last week."}},
                {{"speaker", "supporter"},
                 {"text", "That must be hard."},
                 {"strategies", {"Reflection of feelings", "Providing Suggestions"}}}}}},
             {{"dialogue_id", 1},
              {"turns",
               {{{"speaker", "system"}, {"text", "Hi, how can I help?"}, {"strategies", {"Question"}}},
                {{"speaker", "user"}, {"text", "I feel lonely."}},
                {{"speaker", "system"}, {"text", "Tell me more."}, {"strategies", {"Question"}}}}}},
         }},
    };
}

TaskProfile esc_profile() { return load_task_profile(Task::esc, default_templates_dir()); }

// Mock chat that fails for any prompt mentioning a marker.
class FailingOn : public ChatProvider {
public:
    explicit FailingOn(std::string marker) : marker_(std::move(marker)) {}
    std::string complete(const ChatRequest& r) override {
        if (r.prompt.find(marker_) != std::string::npos) throw Error("provider_error", "scripted failure");
        return mock_.complete(r);
    }

private:
    std::string marker_;
    MockChatProvider mock_;
};

Gateway failing_gateway(const std::string& marker, std::size_t dim = 16) {
    GatewayOptions o;
    o.embedding_dim = dim;
    o.retry.max_attempts = 1;
    return Gateway(std::make_shared<FailingOn>(marker), std::make_shared<MockEmbeddingProvider>(dim), o);
}

CentroidSet sample_centroids() {
    CentroidSet c;
    c.aspect_id = 2;
    c.k = 3;
    c.centroids = Matrix(3, 4);
    for (std::size_t i = 0; i < c.centroids.data.size(); ++i) c.centroids.data[i] = 0.25 * static_cast<double>(i) - 1.0;
    c.silhouette = 0.625;
    c.seed = 77;
    return c;
}

RankerModel sample_model() {
    RankerConfig cfg;
    cfg.aspect_count = 2;
    cfg.state_dim = 4;
    cfg.projection_dim = 3;
    cfg.scorer_hidden = 5;
    cfg.seed = 9;
    return RankerModel::initialize(cfg);
}

}  // namespace

// ---------------------------------------------------------------- corpus

TEST_CASE("native corpus parsing") {
    auto c = parse_corpus(native_doc(), Task::esc);
    REQUIRE(c.dialogues.size() == 2);
    CHECK(c.dialogues[1].dialogue_id == "1");
    CHECK(c.dialogues[0].problem_summary == "Lost a job");
    CHECK_FALSE(c.dialogues[1].problem_summary);
    CHECK(c.dialogues[0].turns[1].speaker == Speaker::system_role);
    CHECK(c.dialogues[0].turns[3].strategies.size() == 2);
    CHECK(c.find("d2") == &c.dialogues[0]);
    CHECK(c.find("zz") == nullptr);
    auto h = c.dialogues[0].history(Task::esc, 2);
    CHECK(h.size() == 2);
    CHECK(h.round() == 2);
}

TEST_CASE("native corpus schema violations name the JSON path") {
    auto expect_path = [](json doc, const std::string& path) {
        try {
            parse_corpus(doc, Task::esc);
            FAIL("expected a schema violation");
        } catch (const Error& e) {
            CHECK(e.code() == "schema_violation");
            CHECK(std::string(e.what()).find(path) != std::string::npos);
        }
    };
    auto doc = native_doc();
    doc["dialogues"][0]["turns"][2]["speaker"] = "narrator";
    expect_path(doc, "/dialogues/0/turns/2/speaker");

    doc = native_doc();
    doc["dialogues"][0]["turns"][0]["strategies"] = {"Question"};
    expect_path(doc, "/dialogues/0/turns/0/strategies");

    doc = native_doc();
    doc["dialogues"][1]["turns"][1]["text"] = "  ";
    expect_path(doc, "/dialogues/1/turns/1/text");

    doc = native_doc();
    doc["dialogues"][1].erase("turns");
    expect_path(doc, "/dialogues/1");

    doc = native_doc();
    doc["task"] = "persuasion";
    expect_path(doc, "/task");

    doc = native_doc();
    doc["dialogues"][1]["dialogue_id"] = "d2";
    CHECK(error_code([&] { parse_corpus(doc, Task::esc); }) == "schema_violation");
}

TEST_CASE("splits default to train") {
    auto c = parse_corpus(native_doc(), Task::esc);
    CHECK(c.split("train").dialogues.size() == 2);
    CHECK(c.split("test").dialogues.empty());

    auto doc = native_doc();
    doc["splits"] = {{"train", {"d2"}}, {"test", {1}}};
    auto s = parse_corpus(doc, Task::esc);
    CHECK(s.split("train").dialogues.size() == 1);
    CHECK(s.split("test").dialogues[0].dialogue_id == "1");
    CHECK(s.split("validation").dialogues.empty());
}

TEST_CASE("content hash is stable and content sensitive") {
    auto a = parse_corpus(native_doc(), Task::esc);
    auto b = parse_corpus(native_doc(), Task::esc);
    CHECK(a.content_hash() == b.content_hash());
    b.dialogues[0].turns[0].text += "!";
    CHECK(a.content_hash() != b.content_hash());
    CHECK(parse_corpus(to_json(a), Task::esc).content_hash() == a.content_hash());
}

TEST_CASE("ESConv layout") {
    json doc = json::array({{
        {"emotion_type", "anxiety"},
        {"problem_type", "job crisis"},
        {"situation", "Worried about layoffs"},
        {"dialog",
         {{{"speaker", "seeker"}, {"content", "Hi"}},
          {{"speaker", "supporter"}, {"content", "Hello, what's up?"}, {"annotation", {{"strategy", "Question"}}}},
          {{"speaker", "seeker"}, {"content", "   "}}}},
    }});
    auto c = parse_esconv(doc);
    REQUIRE(c.dialogues.size() == 1);
    CHECK(c.dialogues[0].dialogue_id == "0");
    CHECK(c.dialogues[0].problem_summary == "Worried about layoffs");
    CHECK(c.dialogues[0].emotion_type == "anxiety");
    CHECK(c.dialogues[0].turns.size() == 2);
    CHECK(c.dialogues[0].turns[1].strategies == std::vector<std::string>{"Question"});
    CHECK(error_code([] { parse_esconv(json::object()); }) == "schema_violation");
}

TEST_CASE("CSV parsing follows RFC 4180 quoting") {
    auto rows = parse_csv("a,b,c\r\n\"x, y\",\"say \"\"hi\"\"\",\n\"multi\nline\",2,3");
    REQUIRE(rows.size() == 3);
    CHECK(rows[1] == std::vector<std::string>{"x, y", "say \"hi\"", ""});
    CHECK(rows[2][0] == "multi\nline");
}

TEST_CASE("persuasion CSV layout") {
    const std::string csv =
        "Unit,Turn,B4,B2,er_label_1\n"
        "Hello there!,0,0,20180904-045349_715_live,greeting\n"
        "Hi,0,1,20180904-045349_715_live,\n"
        "Would you donate?,1,0,20180904-045349_715_live,proposition-of-donation\n"
        "Hey,0,0,other,greeting\n";
    auto c = parse_p4g_csv(csv);
    REQUIRE(c.dialogues.size() == 2);
    CHECK(c.task == Task::persuasion);
    const auto& d = c.dialogues[0];
    CHECK(d.turns.size() == 3);
    CHECK(d.turns[0].speaker == Speaker::system_role);
    CHECK(d.turns[1].speaker == Speaker::user_role);
    CHECK(d.turns[2].strategies == std::vector<std::string>{"proposition-of-donation"});
    CHECK(error_code([] { parse_p4g_csv("x,y\n1,2\n"); }) == "schema_violation");
    CHECK(error_code([] { parse_p4g_csv("Unit,B4,B2\na,0,d1\nb,0,d2\nc,0,d1\n"); }) == "schema_violation");
}

TEST_CASE("load_corpus detects the layout and reads a splits manifest") {
    TempDir dir("corpus");
    write_file(dir / "native.json", native_doc().dump());
    write_file(dir / "native.json.splits.json", R"({"test": ["1"]})");
    auto c = load_corpus(dir / "native.json", Task::esc);
    CHECK(c.dialogues.size() == 2);
    CHECK(c.split("test").dialogues.size() == 1);

    write_file(dir / "es.json", R"([{"dialog": [{"speaker": "seeker", "content": "hi"}]}])");
    CHECK(load_corpus(dir / "es.json", Task::esc).dialogues.size() == 1);

    write_file(dir / "p.csv", "Unit,B4,B2\nhi,0,a\n");
    CHECK(load_corpus(dir / "p.csv", Task::persuasion).dialogues.size() == 1);

    write_file(dir / "bad.json", "{not json");
    CHECK(error_code([&] { load_corpus(dir / "bad.json", Task::esc); }) == "schema_violation");
    CHECK(error_code([&] { load_corpus(dir / "missing.json", Task::esc); }) == "io_error");
}

// ---------------------------------------------------------------- annotation

TEST_CASE("annotate_dialogue: one record per system turn with context") {
    auto corpus = parse_corpus(native_doc(), Task::esc);
    auto profile = esc_profile();
    auto g = make_mock_gateway(16);
    AnnotationReport report;
    auto turns = annotate_dialogue(corpus.dialogues[0], profile, *g, {}, &report);
    REQUIRE(turns.size() == 2);
    CHECK(turns[0].round == 1);
    CHECK(turns[1].round == 2);
    CHECK(turns[0].history == "Seeker: I lost my job.");
    CHECK(turns[0].gt_utterance == "How long ago?");
    CHECK(turns[0].gt_aspects == AspectSet{1});
    CHECK(turns[1].gt_aspects == AspectSet{2, 3});
    CHECK(turns[0].summaries.size() == 3);
    CHECK(turns[0].candidates.size() == 12);
    CHECK(turns[0].labels.size() == 12);
    CHECK_FALSE(turns[0].summaries[0].embedding);
    // matching-aspect candidates come first
    for (std::size_t i = 0; i < turns[0].candidates.size(); ++i) {
        const bool matched = turns[0].candidates[i].aspect_id == 1;
        CHECK((turns[0].labels[i].position <= 4) == matched);
    }

    AnnotationReport opening;
    auto second = annotate_dialogue(corpus.dialogues[1], profile, *g, {}, &opening);
    CHECK(second.size() == 1);
    CHECK(second[0].round == 2);
    CHECK(opening.skipped_no_history == 1);
}

TEST_CASE("annotated turns survive a JSON round trip") {
    auto corpus = parse_corpus(native_doc(), Task::esc);
    auto g = make_mock_gateway(16);
    for (const auto& t : annotate_dialogue(corpus.dialogues[0], esc_profile(), *g)) {
        CHECK(annotated_turn_from_json(to_json(t)) == t);
    }
    CHECK(error_code([] { annotated_turn_from_json(json{{"dialogue_id", 3}}); }) == "schema_violation");
}

TEST_CASE("annotate_corpus is deterministic, resumable and repairs torn lines") {
    TempDir dir("annotate");
    auto corpus = parse_corpus(native_doc(), Task::esc);
    auto profile = esc_profile();

    auto g1 = make_mock_gateway(16);
    auto r1 = annotate_corpus(corpus, profile, *g1, dir / "a.jsonl");
    CHECK(r1.written == 3);
    CHECK(r1.skipped_no_history == 1);
    const auto full = read_file(dir / "a.jsonl");

    auto g2 = make_mock_gateway(16);
    annotate_corpus(corpus, profile, *g2, dir / "b.jsonl");
    CHECK(read_file(dir / "b.jsonl") == full);

    // rerun on a complete file writes nothing
    auto r2 = annotate_corpus(corpus, profile, *g1, dir / "a.jsonl");
    CHECK(r2.written == 0);
    CHECK(r2.already_present == 3);
    CHECK(read_file(dir / "a.jsonl") == full);

    // keep the first record plus half of the second, then resume
    const auto first_nl = full.find('\n');
    write_file(dir / "c.jsonl", full.substr(0, first_nl + 1 + (full.find('\n', first_nl + 1) - first_nl) / 2));
    CHECK(read_annotations(dir / "c.jsonl").size() == 1);
    auto r3 = annotate_corpus(corpus, profile, *g1, dir / "c.jsonl");
    CHECK(r3.already_present == 1);
    CHECK(r3.written == 2);
    CHECK(read_file(dir / "c.jsonl") == full);

    CHECK(error_code([&] { read_annotations(dir / "none.jsonl"); }) == "io_error");
}

TEST_CASE("annotation failures are recorded and the run continues") {
    auto corpus = parse_corpus(native_doc(), Task::esc);
    auto g = failing_gateway("Last week.");
    AnnotationReport report;
    auto turns = annotate_dialogue(corpus.dialogues[0], esc_profile(), g, {}, &report);
    CHECK(turns.size() == 1);
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].round == 2);
    CHECK(report.failures[0].code == "provider_error");
    CHECK(report.to_json()["failures"][0]["dialogue_id"] == "d2");
}

TEST_CASE("to_training_turn embeds states and contexts") {
    auto corpus = parse_corpus(native_doc(), Task::esc);
    auto g = make_mock_gateway(16);
    auto t = annotate_dialogue(corpus.dialogues[0], esc_profile(), *g)[0];
    std::reverse(t.summaries.begin(), t.summaries.end());
    auto tt = to_training_turn(t, 3, *g);
    CHECK(tt.features.states.size() == 3);
    CHECK(tt.features.states[0] == g->embed_text(t.summaries[2].text).values);
    CHECK(tt.features.contexts.size() == 12);
    CHECK(tt.features.contexts[5] == g->embed_text(t.history + " [TOPIC] " + t.candidates[5].text).values);
    CHECK(std::count(tt.relevant.begin(), tt.relevant.end(), true) == 4);
    CHECK(error_code([&] { to_training_turn(t, 2, *g); }) == "signal_count_mismatch");
}

TEST_CASE("target corpus rows follow dialogue id order and tolerate few failures") {
    auto corpus = parse_corpus(native_doc(), Task::esc);
    auto profile = esc_profile();
    auto g = make_mock_gateway(16);
    auto t = build_target_corpus(corpus, profile.aspect(1), *g);
    CHECK(t.source_dialogue_ids == std::vector<std::string>{"1", "d2"});
    CHECK(t.embeddings.rows == 2);
    CHECK(t.embeddings.cols == 16);

    // one of two dialogues failing is over the 10% budget
    auto bad = failing_gateway("I feel lonely.");
    CHECK(error_code([&] { build_target_corpus(corpus, profile.aspect(1), bad); }) == "too_many_failures");

    // one of eleven stays within it
    Corpus big;
    for (int i = 0; i < 11; ++i) {
        CorpusDialogue d{"x" + std::to_string(i), {}, {}, {}, {{Speaker::user_role, i == 4 ? "BROKEN" : "hi " + std::to_string(i), {}}}};
        big.dialogues.push_back(d);
    }
    auto flaky = failing_gateway("BROKEN");
    auto ok = build_target_corpus(big, profile.aspect(1), flaky);
    CHECK(ok.embeddings.rows == 10);
    CHECK(ok.skipped_dialogue_ids == std::vector<std::string>{"x4"});
}

// ---------------------------------------------------------------- stores

TEST_CASE("centroid store round trip") {
    TempDir dir("centroids");
    const auto c = sample_centroids();
    save_centroids(dir / "c.bin", c, 0xabcdef);
    CHECK(fs::exists(dir / "c.bin.json"));
    auto back = load_centroids(dir / "c.bin", 4, 0xabcdef);
    CHECK(back.aspect_id == 2);
    CHECK(back.k == 3);
    CHECK(back.centroids == c.centroids);
    CHECK(back.silhouette == 0.625);
    CHECK(back.seed == 77);
    auto manifest = json::parse(read_file(dir / "c.bin.json"));
    CHECK(manifest["k"] == 3);
}

TEST_CASE("centroid store errors") {
    TempDir dir("centroids_err");
    save_centroids(dir / "c.bin", sample_centroids(), 5);
    CHECK(error_code([&] { load_centroids(dir / "c.bin", 8); }) == "version_mismatch");
    CHECK(error_code([&] { load_centroids(dir / "c.bin", 4, 6); }) == "hash_mismatch");

    auto bytes = read_file(dir / "c.bin");
    write_file(dir / "trunc.bin", bytes.substr(0, bytes.size() - 3));
    CHECK(error_code([&] { load_centroids(dir / "trunc.bin"); }) == "corrupt_store");
    write_file(dir / "extra.bin", bytes + "x");
    CHECK(error_code([&] { load_centroids(dir / "extra.bin"); }) == "corrupt_store");
    auto magic = bytes;
    magic[0] = 'X';
    write_file(dir / "magic.bin", magic);
    CHECK(error_code([&] { load_centroids(dir / "magic.bin"); }) == "corrupt_store");
    auto version = bytes;
    version[8] = 9;
    write_file(dir / "version.bin", version);
    CHECK(error_code([&] { load_centroids(dir / "version.bin"); }) == "version_mismatch");
    CHECK(error_code([&] { load_centroids(dir / "missing.bin"); }) != "");
}

TEST_CASE("checkpoint round trip is exact") {
    TempDir dir("ckpt");
    const auto m = sample_model();
    save_checkpoint(dir / "r.ckpt", m, {7, 0.75, 0x1234});
    auto loaded = load_checkpoint(dir / "r.ckpt", m.config, 0x1234);
    CHECK(loaded.model == m);
    CHECK(loaded.meta.epoch == 7);
    CHECK(loaded.meta.validation_precision == 0.75);
    CHECK(loaded.meta.corpus_hash == 0x1234);
    auto manifest = checkpoint_manifest(dir / "r.ckpt");
    CHECK(manifest["n_T"] == 2);
    CHECK(manifest["n_d"] == 4);
    CHECK(manifest["d_b"] == 3);
    CHECK(manifest["d_h"] == 5);
}

TEST_CASE("checkpoint errors") {
    TempDir dir("ckpt_err");
    const auto m = sample_model();
    save_checkpoint(dir / "r.ckpt", m, {1, 0.5, 1});
    auto other = m.config;
    other.projection_dim = 4;
    CHECK(error_code([&] { load_checkpoint(dir / "r.ckpt", other); }) == "version_mismatch");
    CHECK(error_code([&] { load_checkpoint(dir / "r.ckpt", std::nullopt, 2); }) == "hash_mismatch");
    const auto bytes = read_file(dir / "r.ckpt");
    for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        write_file(dir / "t.ckpt", bytes.substr(0, cut));
        CHECK(error_code([&] { load_checkpoint(dir / "t.ckpt"); }) == "corrupt_store");
    }
    // no temporary files are left behind by saving
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++files;
    CHECK(files == 2);
}

TEST_CASE("configured model files load into an engine model") {
    TempDir dir("model_cfg");
    RankerConfig cfg;
    cfg.aspect_count = 3;
    cfg.state_dim = 4;
    cfg.projection_dim = 3;
    save_checkpoint(dir / "r.ckpt", RankerModel::initialize(cfg), {1, 0.5, 0});
    json centroid_files = json::array();
    for (int a = 1; a <= 3; ++a) {
        auto c = sample_centroids();
        c.aspect_id = a;
        const auto name = "c" + std::to_string(a) + ".bin";
        save_centroids(dir / name, c, 0);
        centroid_files.push_back(name);
    }
    auto config = parse_config({{"embedding_dim", 4}, {"models", {{"esc", {{"checkpoint", "r.ckpt"}, {"centroids", centroid_files}}}}}},
                               dir.path);
    auto model = load_engine_model(config, Task::esc);
    CHECK(model->progression.centroids.size() == 3);
    CHECK(model->ranker.config.projection_dim == 3);

    config.embedding_dim = 8;
    CHECK(error_code([&] { load_engine_model(config, Task::esc); }) == "version_mismatch");
}
