#pragma once

#include <string>
#include <vector>

#include "vjscc/codec_pipeline.hpp"
#include "vjscc/training.hpp"

namespace vjscc {

// Everything a run needs: model/pipeline settings, training settings, data
// source, sweep lists and output locations. Parsed from a sectioned key=value
// file; every key can be overridden on the command line as `--key value`.
struct ExperimentConfig {
    PipelineConfig pipe;
    TrainConfig train;

    std::string data_source = "synthetic";  // synthetic | raw
    std::string pattern = "moving_square";
    size_t train_clips = 4;
    size_t eval_clips = 8;
    uint64_t clip_seed = 1000;
    size_t clip_index = 0;  // which eval clip visualize-masks uses
    std::vector<std::string> raw_paths;

    std::string output_dir = "out";
    std::string checkpoint;  // input checkpoint for sweeps / visualization
    std::string resume;      // checkpoint to continue training from
    std::vector<double> snr_list{1, 4, 7, 10, 13};
    std::vector<double> gamma_list{0.4, 0.6, 0.8, 1.0};
    bool gradcheck_corrupt = false;  // test hook: breaks one gradient on purpose

    void validate() const;
};

// Parses a config file. Unknown keys, malformed lines and bad values raise
// ConfigError naming the line and field.
ExperimentConfig load_config_file(const std::string& path);

// Applies `--key value`; throws ConfigError for unknown keys or bad values.
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Canonical serialization; parseable by load_config_file.
std::string serialize_config(const ExperimentConfig& cfg);

std::vector<std::string> config_keys();

}  // namespace vjscc
