#include "bond/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "bond/parallel.hpp"

namespace bond {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reference hyperparameters per dataset. The learning-rate schedule is
// linear to zero over each stage; the 1e-4 "decay" is carried as AdamW weight
// decay.
json make_preset(std::uint64_t t1, std::uint64_t t3, double lr, std::size_t batch) {
    return json{
        {"optimizer", {{"beta1", 0.9}, {"beta2", 0.98}, {"weight_decay", 1e-4}}},
        {"stage1", {{"steps", t1}, {"batch_size", batch}, {"lr", lr}, {"lr_decay", lr / double(t1)}}},
        {"stage2",
         {{"inner_steps", t3},
          {"batch_size", batch},
          {"lr", lr},
          {"lr_decay", lr / double(t3)},
          {"epsilon", 0.9},
          {"label_mode", "soft_high_conf"}}},
    };
}

const std::vector<std::pair<std::string, json>>& presets() {
    static const std::vector<std::pair<std::string, json>> p = {
        {"conll03", make_preset(900, 1756, 1e-5, 16)},
        {"tweet", make_preset(900, 900, 2e-5, 16)},
        {"ontonotes5", make_preset(16500, 1000, 2e-5, 32)},
        {"webpage", make_preset(300, 200, 1e-5, 16)},
        {"wikigold", make_preset(350, 700, 1e-5, 16)},
    };
    return p;
}

void merge_into(json& target, const json& patch) {
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it.value().is_object() && target.contains(it.key()) && target[it.key()].is_object()) {
            merge_into(target[it.key()], it.value());
        } else {
            target[it.key()] = it.value();
        }
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
}

DevSet make_dev(const Corpus& dev, const std::vector<SentenceFeatures>& feats) {
    return DevSet{&feats, &dev.layer(LabelLayer::Gold), &dev.schema()};
}

std::string fnv_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& [name, _] : presets()) out.push_back(name);
    return out;
}

json preset(const std::string& name) {
    for (const auto& [n, p] : presets()) {
        if (n == name) return p;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

std::string PipelineConfig::digest() const { return fnv_hex(source.dump()); }

PipelineConfig parse_config(const json& input, const fs::path& base_dir, const ConfigOverrides& overrides) {
    json doc = input;
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (overrides.preset) merge_into(doc, preset(*overrides.preset));
    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.output) {
        doc["paths"]["output"] = fs::absolute(*overrides.output).string();
    }

    PipelineConfig cfg;
    if (!doc.contains("seed")) throw ConfigError("config needs an explicit 'seed'");
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);

    const auto types = get_or<std::vector<std::string>>(doc, "entity_types", {});
    if (types.empty()) throw ConfigError("config needs a non-empty 'entity_types' list");
    try {
        cfg.schema = LabelSchema(types);
    } catch (const SchemaError& e) {
        throw ConfigError(e.what());
    }

    const json paths = doc.value("paths", json::object());
    cfg.paths.train = resolve(base_dir, get_or<std::string>(paths, "train", ""));
    cfg.paths.dev = resolve(base_dir, get_or<std::string>(paths, "dev", ""));
    cfg.paths.test = resolve(base_dir, get_or<std::string>(paths, "test", ""));
    cfg.paths.gazetteers = resolve(base_dir, get_or<std::string>(paths, "gazetteers", ""));
    cfg.paths.stamp_rules = resolve(base_dir, get_or<std::string>(paths, "stamp_rules", ""));
    cfg.paths.output = resolve(base_dir, get_or<std::string>(paths, "output", "out"));

    const json f = doc.value("features", json::object());
    cfg.features.window = get_or<int>(f, "window", cfg.features.window);
    cfg.features.hash_bits = get_or<unsigned>(f, "hash_bits", cfg.features.hash_bits);
    cfg.features.hash_seed = get_or<std::uint64_t>(f, "hash_seed", cfg.features.hash_seed);
    if (cfg.features.window < 0) throw ConfigError("features.window must be >= 0");
    if (cfg.features.hash_bits < 1 || cfg.features.hash_bits > 26) throw ConfigError("features.hash_bits must be in [1, 26]");

    const json o = doc.value("optimizer", json::object());
    cfg.adam.beta1 = get_or<double>(o, "beta1", cfg.adam.beta1);
    cfg.adam.beta2 = get_or<double>(o, "beta2", cfg.adam.beta2);
    cfg.adam.epsilon = get_or<double>(o, "epsilon", cfg.adam.epsilon);
    cfg.adam.weight_decay = get_or<double>(o, "weight_decay", cfg.adam.weight_decay);

    const json s1 = doc.value("stage1", json::object());
    cfg.stage1.steps = get_or<std::uint64_t>(s1, "steps", cfg.stage1.steps);
    cfg.stage1.batch_size = get_or<std::size_t>(s1, "batch_size", cfg.stage1.batch_size);
    cfg.stage1.lr.base = get_or<double>(s1, "lr", cfg.stage1.lr.base);
    cfg.stage1.lr.decay = get_or<double>(s1, "lr_decay", cfg.stage1.lr.decay);
    cfg.stage1.dev_interval = get_or<std::uint64_t>(s1, "dev_interval", cfg.stage1.dev_interval);
    cfg.stage1.seed = cfg.seed;
    cfg.stage1.adam = cfg.adam;

    const json s2 = doc.value("stage2", json::object());
    cfg.stage2.iterations = get_or<std::uint64_t>(s2, "iterations", cfg.stage2.iterations);
    cfg.stage2.inner_steps = get_or<std::uint64_t>(s2, "inner_steps", cfg.stage2.inner_steps);
    cfg.stage2.inner_steps_schedule =
        get_or<std::vector<std::uint64_t>>(s2, "inner_steps_schedule", cfg.stage2.inner_steps_schedule);
    cfg.stage2.confidence_threshold = get_or<double>(s2, "epsilon", cfg.stage2.confidence_threshold);
    cfg.stage2.stall_patience = get_or<std::size_t>(s2, "stall_patience", cfg.stage2.stall_patience);
    cfg.stage2.per_batch_class_mass = get_or<bool>(s2, "per_batch_class_mass", cfg.stage2.per_batch_class_mass);
    cfg.stage2.batch_size = get_or<std::size_t>(s2, "batch_size", cfg.stage2.batch_size);
    cfg.stage2.lr.base = get_or<double>(s2, "lr", cfg.stage2.lr.base);
    cfg.stage2.lr.decay = get_or<double>(s2, "lr_decay", cfg.stage2.lr.decay);
    cfg.stage2.seed = cfg.seed + 1;
    cfg.stage2.adam = cfg.adam;
    const auto mode = get_or<std::string>(s2, "label_mode", to_string(cfg.stage2.mode));
    if (auto m = parse_label_mode(mode)) cfg.stage2.mode = *m;
    else throw ConfigError("stage2.label_mode must be hard, soft or soft_high_conf");
    const auto reinit = get_or<std::string>(s2, "reinit", to_string(cfg.stage2.reinit));
    if (auto r = parse_reinit_mode(reinit)) cfg.stage2.reinit = *r;
    else throw ConfigError("stage2.reinit must be off, once or on_stall");
    if (!(cfg.stage2.confidence_threshold > 0.0 && cfg.stage2.confidence_threshold < 1.0)) {
        throw ConfigError("stage2.epsilon must lie in (0, 1)");
    }
    if (!cfg.stage2.inner_steps_schedule.empty() && cfg.stage2.inner_steps_schedule.size() != cfg.stage2.iterations) {
        throw ConfigError("stage2.inner_steps_schedule needs one entry per iteration");
    }

    // Every referenced input must exist before any phase starts.
    if (cfg.paths.train.empty()) throw ConfigError("paths.train is required");
    for (const auto* p : {&cfg.paths.train, &cfg.paths.dev, &cfg.paths.test, &cfg.paths.stamp_rules}) {
        if (!p->empty() && !fs::is_regular_file(*p)) throw ConfigError("file not found: " + p->string());
    }
    if (!cfg.paths.gazetteers.empty() && !fs::is_directory(cfg.paths.gazetteers)) {
        throw ConfigError("gazetteer directory not found: " + cfg.paths.gazetteers.string());
    }

    cfg.source = doc;
    return cfg;
}

PipelineConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(doc, fs::absolute(path).parent_path(), overrides);
}

GazetteerMatcher load_matcher(const PipelineConfig& config, std::vector<std::string>* warnings) {
    if (config.paths.gazetteers.empty() || !fs::is_directory(config.paths.gazetteers)) {
        throw ConfigError("gazetteer directory not found: " + config.paths.gazetteers.string());
    }
    auto gaz = load_gazetteer_dir(config.paths.gazetteers.string(), config.schema, warnings);
    return GazetteerMatcher({gaz}, config.schema);
}

std::vector<StampRule> load_rules(const PipelineConfig& config) {
    if (config.paths.stamp_rules.empty()) return {};
    return load_stamp_rules(config.paths.stamp_rules.string(), config.schema);
}

LabelOutcome run_label(const PipelineConfig& config, std::ostream& log) {
    std::vector<std::string> warnings;
    const auto matcher = load_matcher(config, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    const auto rules = load_rules(config);
    const auto train = read_conll_file(config.paths.train.string(), config.schema, LabelLayer::Gold);

    LabelingStats stats;
    LabelOutcome out{generate_distant_labels(train, matcher, rules, &stats), std::nullopt};
    fs::create_directories(config.paths.output);
    write_conll_file((config.paths.output / artifacts::kDistant).string(), out.corpus, LabelLayer::Distant);
    if (out.corpus.has_layer(LabelLayer::Gold)) {
        out.report = match_report(out.corpus, &stats);
        write_text(config.paths.output / artifacts::kMatchReport, out.report->to_json());
        log << "distant labels vs gold: " << out.report->entity.summary_line() << '\n';
    }
    log << "labeled " << out.corpus.size() << " sentences\n";
    return out;
}

Stage1Result run_train(const PipelineConfig& config, std::ostream& log) {
    const auto distant_path = config.paths.output / artifacts::kDistant;
    if (!fs::is_regular_file(distant_path)) {
        throw ConfigError("distant-labeled corpus not found: " + distant_path.string() + " (run 'label' first)");
    }
    Corpus corpus;
    try {
        corpus = read_conll_file(distant_path.string(), config.schema, LabelLayer::Distant);
    } catch (const SchemaError& e) {
        throw ConfigError(std::string("corpus does not match the label schema: ") + e.what());
    }
    if (!corpus.has_layer(LabelLayer::Distant)) throw ConfigError("distant corpus has no label column");

    const auto feats = featurize(corpus, config.features);
    auto params = init_params(config.features.dim(), config.schema.num_labels(), config.seed);
    params.feature_digest = config.features.digest();

    std::optional<Corpus> dev;
    std::vector<SentenceFeatures> dev_feats;
    DevSet dev_set;
    if (!config.paths.dev.empty() && config.stage1.dev_interval > 0) {
        dev = read_conll_file(config.paths.dev.string(), config.schema, LabelLayer::Gold);
        if (!dev->has_layer(LabelLayer::Gold)) throw ConfigError("dev corpus has no gold labels");
        dev_feats = featurize(*dev, config.features);
        dev_set = make_dev(*dev, dev_feats);
    }
    auto result = train_stage1(corpus, feats, std::move(params), config.stage1, dev ? &dev_set : nullptr);
    save_checkpoint((config.paths.output / artifacts::kStage1Checkpoint).string(), result.params);
    write_text(config.paths.output / artifacts::kStage1Log, stage1_log_csv(result.log));
    log << "stage I: " << result.optimizer_steps << " steps";
    if (!result.log.empty()) log << ", final loss " << result.log.back().loss;
    log << '\n';
    return result;
}

ModelParams load_compatible_checkpoint(const PipelineConfig& config, const fs::path& path) {
    ModelParams p;
    try {
        p = load_checkpoint(path.string());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    if (p.dim != config.features.dim() || p.num_classes != config.schema.num_labels() ||
        p.feature_digest != config.features.digest()) {
        throw ConfigError("checkpoint " + path.string() + " does not match the configured schema and features");
    }
    return p;
}

Stage2Result run_selftrain(const PipelineConfig& config, const fs::path& checkpoint, std::ostream& log) {
    auto params = load_compatible_checkpoint(config, checkpoint);
    // Only tokens are used; any label column is ignored.
    auto corpus = read_conll_file(config.paths.train.string(), config.schema, LabelLayer::Gold);
    const auto feats = featurize(corpus, config.features);

    std::optional<Corpus> dev;
    std::vector<SentenceFeatures> dev_feats;
    DevSet dev_set;
    if (!config.paths.dev.empty()) {
        dev = read_conll_file(config.paths.dev.string(), config.schema, LabelLayer::Gold);
        if (dev->has_layer(LabelLayer::Gold)) {
            dev_feats = featurize(*dev, config.features);
            dev_set = make_dev(*dev, dev_feats);
        } else {
            dev.reset();
        }
    }
    auto result = train_stage2(feats, params, config.stage2, dev ? &dev_set : nullptr);
    for (const auto& w : result.warnings) log << "warning: " << w << '\n';
    fs::create_directories(config.paths.output);
    save_checkpoint((config.paths.output / artifacts::kBondCheckpoint).string(), result.student);
    write_text(config.paths.output / artifacts::kStage2Log, stage2_log_csv(result.log));
    log << "stage II: " << result.teacher_updates << " teacher updates, " << result.student_updates
        << " student updates\n";
    return result;
}

EvalOutcome run_eval(const PipelineConfig& config, const fs::path& checkpoint, const fs::path& corpus_path,
                     const std::string& name, std::ostream& log) {
    const auto params = load_compatible_checkpoint(config, checkpoint);
    const auto corpus = read_conll_file(corpus_path.string(), config.schema, LabelLayer::Gold);
    if (!corpus.has_layer(LabelLayer::Gold)) throw ConfigError("evaluation corpus has no gold labels");
    const auto pred = decode(predict(params, featurize(corpus, config.features)), config.schema);
    const auto& gold = corpus.layer(LabelLayer::Gold);
    EvalOutcome out{entity_prf(gold, pred, config.schema), token_confusion(gold, pred, config.schema)};
    fs::create_directories(config.paths.output);
    write_text(config.paths.output / ("metrics_" + name + ".json"), out.metrics.to_json());
    write_text(config.paths.output / ("confusion_" + name + ".csv"), out.confusion.to_csv(config.schema));
    log << out.metrics.summary_line() << '\n';
    return out;
}

std::string PipelineSummary::to_text() const {
    std::ostringstream out;
    out << "method         F1 (Precision/Recall)\n";
    out << "KB Matching    " << kb_matching.summary_line() << '\n';
    out << "Stage I        " << stage1.summary_line() << '\n';
    out << "BOND           " << bond.summary_line() << '\n';
    return out.str();
}

std::string PipelineSummary::to_json() const {
    auto row = [](const Metrics& m) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "{\"precision\": %.6f, \"recall\": %.6f, \"f1\": %.6f}", m.precision(),
                      m.recall(), m.f1());
        return std::string(buf);
    };
    return "{\"kb_matching\": " + row(kb_matching) + ", \"stage1\": " + row(stage1) + ", \"bond\": " + row(bond) +
           "}\n";
}

PipelineSummary run_pipeline(const PipelineConfig& config, std::ostream& log) {
    const auto eval_path = !config.paths.test.empty() ? config.paths.test : config.paths.dev;
    if (eval_path.empty()) throw ConfigError("pipeline needs paths.test or paths.dev for the summary");
    fs::create_directories(config.paths.output);

    {
        json manifest{{"config_digest", config.digest()},
                      {"seed", config.seed},
                      {"version", "1.0.0"},
                      {"threads", worker_count()},
                      {"started", std::time(nullptr)}};
        write_text(config.paths.output / artifacts::kManifest, manifest.dump(2) + "\n");
    }

    log << "[label]\n";
    run_label(config, log);
    log << "[train]\n";
    run_train(config, log);
    log << "[selftrain]\n";
    run_selftrain(config, config.paths.output / artifacts::kStage1Checkpoint, log);

    log << "[eval]\n";
    PipelineSummary summary;
    {
        std::vector<std::string> warnings;
        const auto matcher = load_matcher(config, &warnings);
        const auto gold = read_conll_file(eval_path.string(), config.schema, LabelLayer::Gold);
        if (!gold.has_layer(LabelLayer::Gold)) throw ConfigError("evaluation corpus has no gold labels");
        const auto labeled = generate_distant_labels(gold, matcher, load_rules(config));
        summary.kb_matching = entity_prf(gold.layer(LabelLayer::Gold), labeled.layer(LabelLayer::Distant), config.schema);
        write_text(config.paths.output / "metrics_kb.json", summary.kb_matching.to_json());
    }
    summary.stage1 = run_eval(config, config.paths.output / artifacts::kStage1Checkpoint, eval_path, "stage1", log).metrics;
    summary.bond = run_eval(config, config.paths.output / artifacts::kBondCheckpoint, eval_path, "bond", log).metrics;

    write_text(config.paths.output / artifacts::kSummary, summary.to_text());
    write_text(config.paths.output / artifacts::kSummaryJson, summary.to_json());
    log << summary.to_text();
    return summary;
}

}  // namespace bond
