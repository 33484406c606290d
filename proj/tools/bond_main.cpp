// bond: distant-label, train, self-train and evaluate an NER tagger.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bond/error.hpp"
#include "bond/pipeline.hpp"
#include "bond/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonFlags {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> preset;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config, "JSON config file")->required();
    cmd->add_option("--out", flags.out, "Output directory (overrides paths.output)");
    cmd->add_option("--seed", flags.seed, "Global seed (overrides the config)");
    cmd->add_option("--preset", flags.preset, "Reference hyperparameter preset");
}

bond::PipelineConfig load(const CommonFlags& flags) {
    bond::ConfigOverrides o;
    o.seed = flags.seed;
    o.output = flags.out;
    o.preset = flags.preset;
    return bond::load_config(flags.config, o);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage distantly supervised NER"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint;
    std::string corpus;
    std::string name;

    auto* label = app.add_subcommand("label", "Write distant labels for the training corpus");
    add_common(label, flags);
    auto* train = app.add_subcommand("train", "Stage I: fit the tagger to distant labels");
    add_common(train, flags);
    auto* selftrain = app.add_subcommand("selftrain", "Stage II: teacher-student self-training");
    add_common(selftrain, flags);
    selftrain->add_option("--checkpoint", checkpoint, "Stage I checkpoint (default: <out>/stage1.ckpt)");
    auto* eval = app.add_subcommand("eval", "Score a checkpoint on a gold corpus");
    add_common(eval, flags);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/bond.ckpt)");
    eval->add_option("--corpus", corpus, "Gold CoNLL corpus (default: paths.test, else paths.dev)");
    eval->add_option("--name", name, "Suffix for metrics_<name>.json")->default_val("eval");
    auto* pipeline = app.add_subcommand("pipeline", "label, train, selftrain and eval in sequence");
    add_common(pipeline, flags);

    std::string synth_dir;
    std::uint64_t synth_seed = 7;
    std::size_t synth_train = bond::SyntheticConfig{}.train_sentences;
    auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus with gazetteers");
    synth->add_option("--dir", synth_dir, "Target directory")->required();
    synth->add_option("--seed", synth_seed, "Generator seed");
    synth->add_option("--sentences", synth_train, "Training sentences; dev and test get a quarter each");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (synth->parsed()) {
            bond::SyntheticConfig sc;
            sc.seed = synth_seed;
            sc.train_sentences = synth_train;
            sc.dev_sentences = sc.test_sentences = synth_train / 4;
            bond::write_synthetic(bond::make_synthetic(sc), synth_dir);
            return kExitOk;
        }
        const auto cfg = load(flags);
        if (label->parsed()) {
            bond::run_label(cfg, std::cout);
        } else if (train->parsed()) {
            bond::run_train(cfg, std::cout);
        } else if (selftrain->parsed()) {
            const auto ckpt = checkpoint.empty() ? cfg.paths.output / bond::artifacts::kStage1Checkpoint
                                                 : std::filesystem::path(checkpoint);
            bond::run_selftrain(cfg, ckpt, std::cout);
        } else if (eval->parsed()) {
            const auto ckpt = checkpoint.empty() ? cfg.paths.output / bond::artifacts::kBondCheckpoint
                                                 : std::filesystem::path(checkpoint);
            std::filesystem::path target = corpus;
            if (target.empty()) target = !cfg.paths.test.empty() ? cfg.paths.test : cfg.paths.dev;
            if (target.empty()) throw bond::ConfigError("eval needs --corpus or paths.test/paths.dev");
            bond::run_eval(cfg, ckpt, target, name, std::cout);
        } else if (pipeline->parsed()) {
            bond::run_pipeline(cfg, std::cout);
        }
    } catch (const bond::NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const bond::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}
