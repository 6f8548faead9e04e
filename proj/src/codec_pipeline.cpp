#include "vjscc/codec_pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vjscc {

void PipelineConfig::validate() const {
    check_divisible(clip_dims(), tubelet());
    if (hidden_dim % 2)
        throw ConfigError("hidden_dim must be even (the selector splits it in half), got " +
                          std::to_string(hidden_dim));
    if (n_heads == 0 || hidden_dim % n_heads)
        throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " not divisible by " +
                          std::to_string(n_heads) + " heads");
    if (channel_dim == 0 || channel_dim % 2)
        throw ConfigError("channel_dim must be even and positive, got " +
                          std::to_string(channel_dim));
    if (depth == 0) throw ConfigError("depth must be at least 1");
    if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be at least 1");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw ConfigError("gamma must lie in (0, 1], got " + std::to_string(gamma));
    if (!disable_multiscale && (n_h() % 2 || n_w() % 2))
        throw ConfigError("multi-scale branch needs even token extents, got " +
                          std::to_string(n_h()) + "x" + std::to_string(n_w()) +
                          " (set disable_multiscale or adjust dims)");
}

Tensor ParamStore::create(const std::string& name, std::vector<size_t> shape, Init init,
                          Rng& rng) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    size_t n = 1;
    for (size_t d : shape) n *= d;
    std::vector<double> data(n);
    switch (init) {
        case Init::Normal002:
            for (auto& v : data) v = rng.normal(0.0, 0.02);
            break;
        case Init::Zeros:
            std::fill(data.begin(), data.end(), 0.0);
            break;
        case Init::Ones:
            std::fill(data.begin(), data.end(), 1.0);
            break;
    }
    Tensor t = Tensor::param(std::move(shape), std::move(data));
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter name: " + name);
    return items_[it->second].second;
}

LayerParams Model::build_layer(const std::string& prefix, size_t dim, Rng& rng) {
    LayerParams p;
    p.n_heads = cfg_.n_heads;
    p.ln1_gain = params_.create(prefix + ".ln1.g", {dim}, Init::Ones, rng);
    p.ln1_bias = params_.create(prefix + ".ln1.b", {dim}, Init::Zeros, rng);
    p.wq = params_.create(prefix + ".wq", {dim, dim}, Init::Normal002, rng);
    p.bq = params_.create(prefix + ".bq", {dim}, Init::Zeros, rng);
    p.wk = params_.create(prefix + ".wk", {dim, dim}, Init::Normal002, rng);
    p.bk = params_.create(prefix + ".bk", {dim}, Init::Zeros, rng);
    p.wv = params_.create(prefix + ".wv", {dim, dim}, Init::Normal002, rng);
    p.bv = params_.create(prefix + ".bv", {dim}, Init::Zeros, rng);
    p.wo = params_.create(prefix + ".wo", {dim, dim}, Init::Normal002, rng);
    p.bo = params_.create(prefix + ".bo", {dim}, Init::Zeros, rng);
    p.ln2_gain = params_.create(prefix + ".ln2.g", {dim}, Init::Ones, rng);
    p.ln2_bias = params_.create(prefix + ".ln2.b", {dim}, Init::Zeros, rng);
    const size_t hidden = cfg_.mlp_ratio * dim;
    p.mlp_w1 = params_.create(prefix + ".mlp.w1", {dim, hidden}, Init::Normal002, rng);
    p.mlp_b1 = params_.create(prefix + ".mlp.b1", {hidden}, Init::Zeros, rng);
    p.mlp_w2 = params_.create(prefix + ".mlp.w2", {hidden, dim}, Init::Normal002, rng);
    p.mlp_b2 = params_.create(prefix + ".mlp.b2", {dim}, Init::Zeros, rng);
    return p;
}

TransformerStack Model::build_stack(const std::string& prefix, size_t dim, size_t layers,
                                    size_t seq_spatial, size_t seq_temporal, Rng& rng) {
    TransformerStack stack;
    stack.pos_spatial = params_.create(prefix + ".spos", {seq_spatial, dim}, Init::Normal002, rng);
    stack.pos_temporal =
        params_.create(prefix + ".tpos", {seq_temporal, dim}, Init::Normal002, rng);
    for (size_t l = 0; l < layers; ++l)
        stack.spatial_layers.push_back(build_layer(prefix + ".st." + std::to_string(l), dim, rng));
    for (size_t l = 0; l < layers; ++l)
        stack.temporal_layers.push_back(build_layer(prefix + ".tt." + std::to_string(l), dim, rng));
    return stack;
}

Model::Model(const PipelineConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(mix64(init_seed, 0x706172616d73ULL));  // dedicated init stream
    const size_t k = cfg_.hidden_dim;
    const size_t tube_len = cfg_.tubelet().tube_numel(cfg_.channels);
    // single-stack ablation doubles the stem depth so capacity stays comparable
    const size_t stem_layers = cfg_.disable_multiscale ? 2 * cfg_.depth : cfg_.depth;

    embed_w_ = params_.create("enc.embed.w", {tube_len, k}, Init::Normal002, rng);
    embed_b_ = params_.create("enc.embed.b", {k}, Init::Zeros, rng);
    enc_stem_ = build_stack("enc.stem", k, stem_layers, cfg_.spatial(), cfg_.n_t(), rng);
    if (!cfg_.disable_multiscale) {
        enc_merge_.merge_w = params_.create("enc.merge.w", {4 * k, 2 * k}, Init::Normal002, rng);
        enc_merge_.merge_b = params_.create("enc.merge.b", {2 * k}, Init::Zeros, rng);
        enc_down_ = build_stack("enc.down", 2 * k, cfg_.depth, cfg_.spatial() / 4, cfg_.n_t(), rng);
        enc_merge_.reverse_w =
            params_.create("enc.reverse.w", {2 * k, 4 * k}, Init::Normal002, rng);
        enc_merge_.reverse_b = params_.create("enc.reverse.b", {4 * k}, Init::Zeros, rng);
    }
    // selector parameters are registered regardless of the ablation flag so
    // checkpoints and init streams stay identical across it
    const size_t k_half = k / 2;
    selector_.split_w1 = params_.create("sel.split.w1", {k, k_half}, Init::Normal002, rng);
    selector_.split_b1 = params_.create("sel.split.b1", {k_half}, Init::Zeros, rng);
    selector_.split_w2 = params_.create("sel.split.w2", {k_half, k_half}, Init::Normal002, rng);
    selector_.split_b2 = params_.create("sel.split.b2", {k_half}, Init::Zeros, rng);
    selector_.score_w1 = params_.create("sel.score.w1", {k, k_half}, Init::Normal002, rng);
    selector_.score_b1 = params_.create("sel.score.b1", {k_half}, Init::Zeros, rng);
    selector_.score_w2 = params_.create("sel.score.w2", {k_half, 1}, Init::Normal002, rng);
    selector_.score_b2 = params_.create("sel.score.b2", {1}, Init::Zeros, rng);

    chan_tx_w_ = params_.create("chan.tx.w", {k, cfg_.channel_dim}, Init::Normal002, rng);
    chan_tx_b_ = params_.create("chan.tx.b", {cfg_.channel_dim}, Init::Zeros, rng);
    chan_rx_w_ = params_.create("chan.rx.w", {cfg_.channel_dim, k}, Init::Normal002, rng);
    chan_rx_b_ = params_.create("chan.rx.b", {k}, Init::Zeros, rng);

    dec_stem_ = build_stack("dec.stem", k, stem_layers, cfg_.spatial(), cfg_.n_t(), rng);
    if (!cfg_.disable_multiscale) {
        dec_merge_.merge_w = params_.create("dec.merge.w", {4 * k, 2 * k}, Init::Normal002, rng);
        dec_merge_.merge_b = params_.create("dec.merge.b", {2 * k}, Init::Zeros, rng);
        dec_down_ = build_stack("dec.down", 2 * k, cfg_.depth, cfg_.spatial() / 4, cfg_.n_t(), rng);
        dec_merge_.reverse_w =
            params_.create("dec.reverse.w", {2 * k, 4 * k}, Init::Normal002, rng);
        dec_merge_.reverse_b = params_.create("dec.reverse.b", {4 * k}, Init::Zeros, rng);
    }
    deembed_w_ = params_.create("dec.deembed.w", {k, tube_len}, Init::Normal002, rng);
    deembed_b_ = params_.create("dec.deembed.b", {tube_len}, Init::Zeros, rng);
}

Tensor Model::clip_to_tensor(const VideoClip& clip) {
    return Tensor::from_data({clip.t_frames, clip.channels, clip.height, clip.width}, clip.data);
}

VideoClip Model::tensor_to_clip(const Tensor& t, const ClipDims& dims, double frame_rate,
                                bool clamp) {
    if (t.numel() != dims.numel())
        throw DimensionError("tensor_to_clip: tensor " + shape_str(t.shape()) +
                             " does not match clip dims");
    VideoClip clip;
    clip.t_frames = dims.t_frames;
    clip.channels = dims.channels;
    clip.height = dims.height;
    clip.width = dims.width;
    clip.frame_rate = frame_rate;
    clip.data = t.values();
    if (clamp)
        for (auto& v : clip.data) v = std::clamp(v, 0.0, 1.0);
    return clip;
}

EncodeResult Model::encode(const Tensor& clip, double gamma) const {
    const ClipDims dims = cfg_.clip_dims();
    if (clip.numel() != dims.numel())
        throw DimensionError("encode: clip " + shape_str(clip.shape()) +
                             " does not match configured dims");
    TokenGrid z = embed(clip, dims, cfg_.tubelet(), embed_w_, embed_b_);
    TokenGrid feat = z;
    if (cfg_.disable_multiscale)
        feat.values = st_then_tt(z.values, enc_stem_);
    else
        feat = two_branch_encode(z, enc_stem_, enc_down_, enc_merge_);

    const size_t m = feat.token_count();
    const size_t k = cfg_.hidden_dim;
    Tensor flat = reshape(feat.values, {m, k});

    EncodeResult res;
    Tensor kept_source = flat;
    if (cfg_.disable_token_selection || gamma == 1.0) {
        res.selection = identity_selection(flat);
    } else {
        auto [local, global] = split_features(feat.values, selector_);
        Tensor probs = reshape(score_tokens(local, global, selector_), {m, 1});
        res.selection = select(flat, probs.values(), gamma);
        kept_source = straight_through_mask(flat, res.selection.mask, probs);
    }
    Tensor kept = gather(kept_source, res.selection.kept_indices);
    Tensor tx = linear(kept, chan_tx_w_, chan_tx_b_);
    const size_t n_reals = res.selection.kept_count() * cfg_.channel_dim;
    Tensor tx_flat = reshape(tx, {n_reals});
    res.tx_pairs = power_normalize(tx_flat, n_reals / 2, &res.norm_scale);
    res.rate = rate_report(res.selection.gamma, m, cfg_.channel_dim, cfg_.source_numel());
    res.snr_db = cfg_.snr_db;
    return res;
}

Tensor Model::decode(const Tensor& received_pairs, const SelectionResult& sel) const {
    const size_t kept = sel.kept_count();
    const size_t m = cfg_.token_count();
    if (sel.mask.size() != m)
        throw DimensionError("decode: mask over " + std::to_string(sel.mask.size()) +
                             " tokens, config expects " + std::to_string(m));
    if (received_pairs.numel() != kept * cfg_.channel_dim)
        throw DimensionError("decode: frame holds " + std::to_string(received_pairs.numel()) +
                             " reals, expected " + std::to_string(kept * cfg_.channel_dim));
    Tensor y = reshape(received_pairs, {kept, cfg_.channel_dim});
    Tensor tokens = linear(y, chan_rx_w_, chan_rx_b_);
    // zero padding restores dropped token positions
    Tensor full = scatter_zeros(tokens, sel.kept_indices, m);
    TokenGrid grid;
    grid.n_t = cfg_.n_t();
    grid.n_h = cfg_.n_h();
    grid.n_w = cfg_.n_w();
    grid.values = reshape(full, {grid.n_t, grid.spatial(), cfg_.hidden_dim});
    TokenGrid out = grid;
    if (cfg_.disable_multiscale)
        out.values = tt_then_st(grid.values, dec_stem_);
    else
        out = two_branch_decode(grid, dec_stem_, dec_down_, dec_merge_);
    return deembed(out, cfg_.clip_dims(), cfg_.tubelet(), deembed_w_, deembed_b_);
}

RoundtripResult Model::roundtrip(const Tensor& clip, double snr_db, uint64_t noise_seed,
                                 double gamma) const {
    RoundtripResult res;
    res.enc = encode(clip, gamma);
    res.enc.snr_db = snr_db;
    Tensor received = awgn(res.enc.tx_pairs, snr_db, noise_seed);
    res.reconstruction = decode(received, res.enc.selection);
    return res;
}

void Model::load_state(const std::vector<std::pair<std::string, Tensor>>& arrays) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : arrays) by_name[name] = &tensor;
    std::ostringstream problems;
    size_t n_bad = 0;
    for (const auto& [name, param] : params_.items()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            problems << "  missing: " << name << " " << shape_str(param.shape()) << "\n";
            ++n_bad;
        } else if (it->second->shape() != param.shape()) {
            problems << "  shape mismatch: " << name << " expected " << shape_str(param.shape())
                     << " got " << shape_str(it->second->shape()) << "\n";
            ++n_bad;
        }
    }
    if (n_bad)
        throw CheckpointError("checkpoint incompatible with model (" + std::to_string(n_bad) +
                              " arrays):\n" + problems.str());
    for (const auto& [name, param] : params_.items()) {
        Tensor handle = param;  // shared node
        handle.values() = by_name.at(name)->values();
    }
}

// ---------------------------------------------------------------------------
// Checkpoint archive
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'V', 'J', 'S', 'C'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointError("truncated checkpoint: " + path);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    write_pod(out, data.version);
    write_pod(out, data.step);
    write_pod(out, static_cast<uint64_t>(data.config_text.size()));
    out.write(data.config_text.data(), static_cast<std::streamsize>(data.config_text.size()));
    write_pod(out, static_cast<uint64_t>(data.arrays.size()));
    for (const auto& [name, tensor] : data.arrays) {
        write_pod(out, static_cast<uint64_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<uint64_t>(tensor.ndim()));
        for (size_t d : tensor.shape()) write_pod(out, static_cast<uint64_t>(d));
        out.write(reinterpret_cast<const char*>(tensor.values().data()),
                  static_cast<std::streamsize>(tensor.numel() * sizeof(double)));
    }
    if (!out) throw IoError("save_checkpoint: short write to " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CheckpointError("load_checkpoint: " + path + " is not a checkpoint archive");
    CheckpointData data;
    data.version = read_pod<uint32_t>(in, path);
    if (data.version != 1)
        throw CheckpointError("load_checkpoint: unsupported version " +
                              std::to_string(data.version));
    data.step = read_pod<uint64_t>(in, path);
    const auto cfg_len = read_pod<uint64_t>(in, path);
    data.config_text.resize(cfg_len);
    in.read(data.config_text.data(), static_cast<std::streamsize>(cfg_len));
    const auto n_arrays = read_pod<uint64_t>(in, path);
    for (uint64_t i = 0; i < n_arrays; ++i) {
        const auto name_len = read_pod<uint64_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        const auto ndim = read_pod<uint64_t>(in, path);
        std::vector<size_t> shape(ndim);
        size_t n = 1;
        for (auto& d : shape) {
            d = read_pod<uint64_t>(in, path);
            n *= d;
        }
        std::vector<double> values(n);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw CheckpointError("truncated checkpoint: " + path);
        data.arrays.emplace_back(std::move(name),
                                 Tensor::from_data(std::move(shape), std::move(values)));
    }
    return data;
}

}  // namespace vjscc
