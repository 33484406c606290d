#include <doctest.h>

#include <fstream>
#include <sstream>

#include "bond/pipeline.hpp"
#include "support.hpp"

using namespace bond;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kTiny = fs::path(BOND_TEST_DATA) / "tiny";

json tiny_doc() {
    std::ifstream in(kTiny / "config.json");
    return json::parse(in);
}

PipelineConfig tiny(const testing::TempDir& out, json doc = tiny_doc()) {
    ConfigOverrides o;
    o.output = out.path().string();
    return parse_config(doc, kTiny, o);
}

std::size_t line_count(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("config parsing and validation") {
    testing::TempDir out("cfg");
    const auto cfg = tiny(out);
    CHECK(cfg.seed == 3);
    CHECK(cfg.schema.num_types() == 3);
    CHECK(cfg.stage1.steps == 40);
    CHECK(cfg.stage1.seed == 3);
    CHECK(cfg.stage2.seed == 4);
    CHECK(cfg.features.window == 1);
    CHECK(cfg.paths.train == kTiny / "train.conll");
    CHECK(cfg.paths.output == out.path());

    auto doc = tiny_doc();
    doc.erase("seed");
    CHECK_THROWS_AS(tiny(out, doc), ConfigError);

    doc = tiny_doc();
    doc["paths"]["train"] = "missing.conll";
    CHECK_THROWS_AS(tiny(out, doc), ConfigError);

    doc = tiny_doc();
    doc["paths"]["gazetteers"] = "nowhere";
    CHECK_THROWS_AS(tiny(out, doc), ConfigError);

    doc = tiny_doc();
    doc["stage2"]["label_mode"] = "sharp";
    CHECK_THROWS_AS(tiny(out, doc), ConfigError);

    doc = tiny_doc();
    doc["stage2"]["epsilon"] = 1.5;
    CHECK_THROWS_AS(tiny(out, doc), ConfigError);

    doc = tiny_doc();
    doc["stage1"]["steps"] = "many";
    CHECK_THROWS_AS(tiny(out, doc), ConfigError);

    ConfigOverrides seed;
    seed.seed = 99;
    seed.output = out.path().string();
    CHECK(parse_config(tiny_doc(), kTiny, seed).seed == 99);
    CHECK(tiny(out).digest() == tiny(out).digest());
    CHECK(parse_config(tiny_doc(), kTiny, seed).digest() != tiny(out).digest());
}

TEST_CASE("presets ship as config files with the same values") {
    CHECK(preset_names().size() == 5);
    for (const auto& name : preset_names()) {
        const auto path = fs::path(BOND_SOURCE_DIR) / "configs" / "presets" / (name + ".json");
        REQUIRE(fs::exists(path));
        std::ifstream in(path);
        CHECK(json::parse(in) == preset(name));
    }
    CHECK(preset("conll03")["stage1"]["steps"] == 900);
    CHECK(preset("conll03")["stage2"]["inner_steps"] == 1756);
    CHECK(preset("conll03")["stage2"]["epsilon"] == 0.9);
    CHECK_THROWS_AS(preset("imdb"), ConfigError);

    testing::TempDir out("preset");
    ConfigOverrides o;
    o.output = out.path().string();
    o.preset = "wikigold";
    const auto cfg = parse_config(tiny_doc(), kTiny, o);
    CHECK(cfg.stage1.steps == 350);
    CHECK(cfg.stage2.inner_steps == 700);
    CHECK(cfg.stage1.lr.base == 1e-5);
    CHECK(cfg.adam.beta2 == 0.98);
}

TEST_CASE("label writes a valid distant corpus and a report") {
    testing::TempDir out("label");
    const auto cfg = tiny(out);
    std::ostringstream log;
    const auto r = run_label(cfg, log);
    REQUIRE(r.report.has_value());
    const auto back = read_conll_file((out / artifacts::kDistant).string(), cfg.schema, LabelLayer::Distant);
    for (const auto& seq : back.layer(LabelLayer::Distant)) CHECK(validate_bio(seq, cfg.schema).valid);
    const auto report = json::parse(testing::slurp(out / artifacts::kMatchReport));
    for (const char* key : {"precision", "recall", "f1", "token_precision"}) CHECK(report.contains(key));
    // The gazetteer has "Paris", "Rome" and "John Smith"; the stamp rule finds "Acme Inc.".
    CHECK(r.report->entity.counts.tp == 7);
    CHECK(r.report->entity.counts.gold_count == 9);
}

TEST_CASE("label without gold omits the report") {
    testing::TempDir out("nogold");
    out.write("raw.conll", "John\nSmith\nvisited\nRome\n");
    auto doc = tiny_doc();
    doc["paths"]["train"] = (out / "raw.conll").string();
    const auto cfg = tiny(out, doc);
    std::ostringstream log;
    const auto r = run_label(cfg, log);
    CHECK_FALSE(r.report.has_value());
    CHECK_FALSE(fs::exists(out / artifacts::kMatchReport));
    CHECK(fs::exists(out / artifacts::kDistant));
}

TEST_CASE("train with T1 = 0 writes the initial parameters") {
    testing::TempDir out("t0");
    auto doc = tiny_doc();
    doc["stage1"]["steps"] = 0;
    const auto cfg = tiny(out, doc);
    std::ostringstream log;
    run_label(cfg, log);
    run_train(cfg, log);
    const auto p = load_checkpoint((out / artifacts::kStage1Checkpoint).string());
    CHECK(p.weights == init_params(cfg.features.dim(), cfg.schema.num_labels(), cfg.seed).weights);
    CHECK(line_count(testing::slurp(out / artifacts::kStage1Log)) == 1);
}

TEST_CASE("train log has one row per step") {
    testing::TempDir out("t1");
    const auto cfg = tiny(out);
    std::ostringstream log;
    run_label(cfg, log);
    CHECK(run_train(cfg, log).optimizer_steps == 40);
    CHECK(line_count(testing::slurp(out / artifacts::kStage1Log)) == 41);
}

TEST_CASE("train refuses to run before label") {
    testing::TempDir out("nolabel");
    std::ostringstream log;
    CHECK_THROWS_AS(run_train(tiny(out), log), ConfigError);
}

TEST_CASE("selftrain with T2 = 0 copies the checkpoint byte for byte") {
    testing::TempDir out("t2");
    auto doc = tiny_doc();
    doc["stage2"]["iterations"] = 0;
    const auto cfg = tiny(out, doc);
    std::ostringstream log;
    run_label(cfg, log);
    run_train(cfg, log);
    run_selftrain(cfg, out / artifacts::kStage1Checkpoint, log);
    CHECK(testing::slurp(out / artifacts::kStage1Checkpoint) == testing::slurp(out / artifacts::kBondCheckpoint));
}

TEST_CASE("selftrain rejects an incompatible checkpoint") {
    testing::TempDir out("badckpt");
    const auto cfg = tiny(out);
    save_checkpoint((out / "other.ckpt").string(), init_params(16, 7, 1));
    std::ostringstream log;
    CHECK_THROWS_AS(run_selftrain(cfg, out / "other.ckpt", log), ConfigError);
    out.write("junk.ckpt", "not a checkpoint");
    CHECK_THROWS_AS(run_selftrain(cfg, out / "junk.ckpt", log), ConfigError);
}

TEST_CASE("selftrain logs the selected token fraction") {
    testing::TempDir out("frac");
    const auto cfg = tiny(out);
    std::ostringstream log;
    run_label(cfg, log);
    run_train(cfg, log);
    const auto r = run_selftrain(cfg, out / artifacts::kStage1Checkpoint, log);
    CHECK(r.teacher_updates == 2);
    std::istringstream csv(testing::slurp(out / artifacts::kStage2Log));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "iter,inner_step,loss,selected_token_fraction,dev_f1");
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() >= 4);
        const double fraction = std::stod(cells[3]);
        CHECK(fraction > 0.0);
        CHECK(fraction <= 1.0);
        ++rows;
    }
    CHECK(rows == r.log.size());
}

TEST_CASE("eval formats F1 (P/R) for perfect, empty and half-right models") {
    testing::TempDir out("eval");
    auto cfg = tiny(out);
    std::ostringstream log;

    // A model trained to memorize the test fixture.
    Corpus fixture = read_conll_file(cfg.paths.test.string(), cfg.schema);
    fixture.set_layer(LabelLayer::Distant, fixture.layer(LabelLayer::Gold));
    const auto feats = featurize(fixture, cfg.features);
    auto p = init_params(cfg.features.dim(), cfg.schema.num_labels(), 1);
    p.feature_digest = cfg.features.digest();
    Stage1Config s1;
    s1.steps = 300;
    s1.batch_size = 2;
    s1.lr.base = 0.05;
    const auto perfect = train_stage1(fixture, feats, p, s1).params;
    save_checkpoint((out / "perfect.ckpt").string(), perfect);
    auto r = run_eval(cfg, out / "perfect.ckpt", cfg.paths.test, "perfect", log);
    CHECK(r.metrics.summary_line() == "100.00 (100.00/100.00)");
    CHECK(fs::exists(out / "metrics_perfect.json"));
    CHECK(fs::exists(out / "confusion_perfect.csv"));

    // Zero weights give a uniform simplex and argmax O everywhere.
    auto zero = p;
    std::fill(zero.weights.begin(), zero.weights.end(), 0.0);
    save_checkpoint((out / "zero.ckpt").string(), zero);
    r = run_eval(cfg, out / "zero.ckpt", cfg.paths.test, "zero", log);
    CHECK(r.metrics.summary_line() == "0.00 (0.00/0.00)");

    // Same tokens as the test split, relabeled so that two of the model's
    // four spans are right and two gold spans are missed.
    out.write("half.conll",
              "John B-PER\nSmith I-PER\nleft B-LOC\nRome O\n. O\n\n"
              "Mary O\njoined B-LOC\nAcme B-ORG\nInc. I-ORG\n. O\n");
    r = run_eval(cfg, out / "perfect.ckpt", out / "half.conll", "half", log);
    CHECK(r.metrics.summary_line() == "50.00 (50.00/50.00)");

    out.write("nogold.conll", "John\nSmith\n");
    CHECK_THROWS_AS(run_eval(cfg, out / "perfect.ckpt", out / "nogold.conll", "x", log), ConfigError);
}

TEST_CASE("pipeline summary has the three rows") {
    testing::TempDir out("pipe");
    const auto cfg = tiny(out);
    std::ostringstream log;
    const auto s = run_pipeline(cfg, log);
    const auto text = testing::slurp(out / artifacts::kSummary);
    CHECK(text.find("KB Matching") != std::string::npos);
    CHECK(text.find("Stage I") != std::string::npos);
    CHECK(text.find("BOND") != std::string::npos);
    const auto j = json::parse(testing::slurp(out / artifacts::kSummaryJson));
    CHECK(j["bond"]["f1"].get<double>() == doctest::Approx(s.bond.f1()).epsilon(1e-6));
    const auto manifest = json::parse(testing::slurp(out / artifacts::kManifest));
    CHECK(manifest["seed"] == 3);
    CHECK(manifest["config_digest"] == cfg.digest());
}
