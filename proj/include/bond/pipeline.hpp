#pragma once

// Config loading and the label -> train -> selftrain -> eval phases shared by
// the command-line tool and the end-to-end tests.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bond/corpus.hpp"
#include "bond/distant_labeler.hpp"
#include "bond/eval.hpp"
#include "bond/stage1.hpp"
#include "bond/stage2.hpp"
#include "bond/tagger.hpp"

namespace bond {

/// Bad or unresolvable configuration; the CLI maps it to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct PipelinePaths {
    std::filesystem::path train;
    std::filesystem::path dev;  // optional
    std::filesystem::path test;  // optional
    std::filesystem::path gazetteers;
    std::filesystem::path stamp_rules;  // optional
    std::filesystem::path output;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    LabelSchema schema;
    PipelinePaths paths;
    FeatureConfig features;
    AdamConfig adam;
    Stage1Config stage1;
    Stage2Config stage2;
    nlohmann::json source;  // effective config after presets and overrides

    /// Stable digest of `source` for the run manifest.
    std::string digest() const;
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<std::string> preset;
};

/// Names accepted by --preset.
std::vector<std::string> preset_names();
/// Reference hyperparameters for a preset; throws ConfigError when unknown.
nlohmann::json preset(const std::string& name);

/// Parses a config document. Relative paths resolve against `base_dir`.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                            const ConfigOverrides& overrides = {});
PipelineConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});

/// Files written into the output directory.
namespace artifacts {
inline constexpr const char* kDistant = "distant.conll";
inline constexpr const char* kMatchReport = "match_report.json";
inline constexpr const char* kStage1Checkpoint = "stage1.ckpt";
inline constexpr const char* kStage1Log = "stage1_log.csv";
inline constexpr const char* kBondCheckpoint = "bond.ckpt";
inline constexpr const char* kStage2Log = "stage2_log.csv";
inline constexpr const char* kSummary = "summary.txt";
inline constexpr const char* kSummaryJson = "summary.json";
inline constexpr const char* kManifest = "run_manifest.json";
}  // namespace artifacts

struct LabelOutcome {
    Corpus corpus;  // train split with a distant layer
    std::optional<MatchReport> report;
};

/// Builds the knowledge source and stamp rules named in the config.
GazetteerMatcher load_matcher(const PipelineConfig& config, std::vector<std::string>* warnings = nullptr);
std::vector<StampRule> load_rules(const PipelineConfig& config);

LabelOutcome run_label(const PipelineConfig& config, std::ostream& log);
Stage1Result run_train(const PipelineConfig& config, std::ostream& log);
Stage2Result run_selftrain(const PipelineConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);

struct EvalOutcome {
    Metrics metrics;
    ConfusionTable confusion;
};

/// Scores a checkpoint on a gold corpus; writes metrics_<name>.json and
/// confusion_<name>.csv.
EvalOutcome run_eval(const PipelineConfig& config, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& corpus, const std::string& name, std::ostream& log);

struct PipelineSummary {
    Metrics kb_matching;
    Metrics stage1;
    Metrics bond;
    std::string to_text() const;
    std::string to_json() const;
};

/// label -> train -> selftrain -> eval on test (dev when no test split).
PipelineSummary run_pipeline(const PipelineConfig& config, std::ostream& log);

/// Loads a checkpoint and checks it against the schema and feature config.
ModelParams load_compatible_checkpoint(const PipelineConfig& config, const std::filesystem::path& path);

}  // namespace bond
