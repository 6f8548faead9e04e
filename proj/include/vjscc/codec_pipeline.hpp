#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vjscc/channel.hpp"
#include "vjscc/multiscale.hpp"
#include "vjscc/rng.hpp"
#include "vjscc/st_transformer.hpp"
#include "vjscc/token_select.hpp"
#include "vjscc/tubelet.hpp"
#include "vjscc/video_io.hpp"

namespace vjscc {

struct PipelineConfig {
    size_t t_frames = 8;
    size_t channels = 3;
    size_t height = 32;
    size_t width = 32;
    size_t tube_t = 2;
    size_t tube_h = 4;
    size_t tube_w = 4;
    size_t hidden_dim = 32;  // K
    size_t n_heads = 4;
    size_t depth = 2;  // L, per ST/TT stack
    size_t mlp_ratio = 4;
    size_t channel_dim = 8;  // c, reals per transmitted token
    double gamma = 0.8;
    double snr_db = 13.0;
    bool disable_multiscale = false;
    bool disable_token_selection = false;

    size_t n_t() const { return t_frames / tube_t; }
    size_t n_h() const { return height / tube_h; }
    size_t n_w() const { return width / tube_w; }
    size_t spatial() const { return n_h() * n_w(); }
    size_t token_count() const { return n_t() * spatial(); }
    size_t source_numel() const { return t_frames * channels * height * width; }
    TubeletConfig tubelet() const { return {tube_t, tube_h, tube_w, hidden_dim}; }
    ClipDims clip_dims() const { return {t_frames, channels, height, width}; }

    void validate() const;  // throws ConfigError / DimensionError
};

enum class Init { Normal002, Zeros, Ones };

// Ordered store of named trainable arrays; registration order defines both
// the initialization RNG stream and the checkpoint layout.
class ParamStore {
public:
    Tensor create(const std::string& name, std::vector<size_t> shape, Init init, Rng& rng);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    size_t size() const { return items_.size(); }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, size_t> index_;
};

struct EncodeResult {
    Tensor tx_pairs;  // normalized real pair vector, length kept*c
    SelectionResult selection;
    RateReport rate;
    double norm_scale = 1.0;
    double snr_db = 0.0;

    ChannelFrame frame() const { return make_channel_frame(tx_pairs.values(), snr_db, norm_scale); }
};

struct RoundtripResult {
    Tensor reconstruction;  // [T, C, H, W], unclamped
    EncodeResult enc;
};

// The encoder/decoder pair with all trainable state. Forward passes build a
// fresh graph each call; the parameter tensors are shared leaves.
class Model {
public:
    Model(const PipelineConfig& cfg, uint64_t init_seed);

    const PipelineConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    EncodeResult encode(const Tensor& clip, double gamma) const;
    Tensor decode(const Tensor& received_pairs, const SelectionResult& sel) const;
    RoundtripResult roundtrip(const Tensor& clip, double snr_db, uint64_t noise_seed,
                              double gamma) const;

    // Replaces parameter values from named arrays, verifying every expected
    // name and shape; throws CheckpointError listing mismatches.
    void load_state(const std::vector<std::pair<std::string, Tensor>>& arrays);

    static Tensor clip_to_tensor(const VideoClip& clip);
    static VideoClip tensor_to_clip(const Tensor& t, const ClipDims& dims, double frame_rate = 25.0,
                                    bool clamp = true);

private:
    TransformerStack build_stack(const std::string& prefix, size_t dim, size_t layers,
                                 size_t seq_spatial, size_t seq_temporal, Rng& rng);
    LayerParams build_layer(const std::string& prefix, size_t dim, Rng& rng);

    PipelineConfig cfg_;
    ParamStore params_;

    Tensor embed_w_, embed_b_;
    TransformerStack enc_stem_, enc_down_;
    MergeParams enc_merge_;
    SelectorParams selector_;
    Tensor chan_tx_w_, chan_tx_b_, chan_rx_w_, chan_rx_b_;
    TransformerStack dec_stem_, dec_down_;
    MergeParams dec_merge_;
    Tensor deembed_w_, deembed_b_;
};

// Flat archive of named 64-bit arrays, versioned with the config text that
// produced it.
struct CheckpointData {
    uint32_t version = 1;
    uint64_t step = 0;
    std::string config_text;
    std::vector<std::pair<std::string, Tensor>> arrays;
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace vjscc
