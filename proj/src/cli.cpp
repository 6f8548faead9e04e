#include "vjscc/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "vjscc/gradcheck.hpp"
#include "vjscc/metrics.hpp"
#include "vjscc/token_select.hpp"

namespace vjscc::cli {

namespace {

namespace fs = std::filesystem;

// held-out clips draw from a disjoint seed range
constexpr uint64_t kEvalClipOffset = 1ull << 20;

std::string fmt(double v, int precision = 12) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

void prepare_output_dir(const ExperimentConfig& cfg, const std::string& config_bytes) {
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream out(cfg.output_dir + "/config.cfg");
        out << config_bytes;
    }
    {
        std::ofstream out(cfg.output_dir + "/config_effective.cfg");
        out << serialize_config(cfg);
    }
}

std::vector<SyntheticClip> make_synthetic(const ExperimentConfig& cfg, size_t count,
                                          uint64_t seed_offset) {
    std::vector<SyntheticClip> clips;
    clips.reserve(count);
    for (size_t i = 0; i < count; ++i)
        clips.push_back(synthesize_clip(cfg.clip_seed + seed_offset + i, cfg.pipe.t_frames,
                                        cfg.pipe.channels, cfg.pipe.height, cfg.pipe.width,
                                        cfg.pattern));
    return clips;
}

std::vector<VideoClip> training_clips(const ExperimentConfig& cfg) {
    std::vector<VideoClip> clips;
    if (cfg.data_source == "raw") {
        for (const auto& path : cfg.raw_paths)
            clips.push_back(load_raw(path, cfg.pipe.t_frames, cfg.pipe.channels, cfg.pipe.height,
                                     cfg.pipe.width));
    } else {
        for (auto& s : make_synthetic(cfg, cfg.train_clips, 0)) clips.push_back(std::move(s.clip));
    }
    return clips;
}

std::vector<VideoClip> evaluation_clips(const ExperimentConfig& cfg) {
    std::vector<VideoClip> clips;
    if (cfg.data_source == "raw") {
        for (const auto& path : cfg.raw_paths)
            clips.push_back(load_raw(path, cfg.pipe.t_frames, cfg.pipe.channels, cfg.pipe.height,
                                     cfg.pipe.width));
    } else {
        for (auto& s : make_synthetic(cfg, cfg.eval_clips, kEvalClipOffset))
            clips.push_back(std::move(s.clip));
    }
    return clips;
}

CheckpointData snapshot(const Model& model, const AdamState& adam, const ExperimentConfig& cfg) {
    CheckpointData data;
    data.step = adam.step;
    data.config_text = serialize_config(cfg);
    const auto& items = model.params().items();
    for (const auto& [name, tensor] : items)
        data.arrays.emplace_back(name, Tensor::from_data(tensor.shape(), tensor.values()));
    for (size_t i = 0; i < items.size(); ++i) {
        data.arrays.emplace_back("adam.m." + items[i].first,
                                 Tensor::from_data(items[i].second.shape(), adam.m[i]));
        data.arrays.emplace_back("adam.v." + items[i].first,
                                 Tensor::from_data(items[i].second.shape(), adam.v[i]));
    }
    return data;
}

void restore(Model& model, AdamState& adam, const CheckpointData& data) {
    std::vector<std::pair<std::string, Tensor>> params;
    for (const auto& [name, tensor] : data.arrays)
        if (name.rfind("adam.", 0) != 0) params.emplace_back(name, tensor);
    model.load_state(params);
    adam.init(model.params());
    adam.step = data.step;
    const auto& items = model.params().items();
    for (const auto& [name, tensor] : data.arrays) {
        for (size_t i = 0; i < items.size(); ++i) {
            if (name == "adam.m." + items[i].first) adam.m[i] = tensor.values();
            if (name == "adam.v." + items[i].first) adam.v[i] = tensor.values();
        }
    }
}

Model model_from_checkpoint(const ExperimentConfig& cfg) {
    if (cfg.checkpoint.empty())
        throw ConfigError("this command needs a checkpoint (set checkpoint= or --checkpoint)");
    const CheckpointData data = load_checkpoint(cfg.checkpoint);
    Model model(cfg.pipe, cfg.train.seed);
    std::vector<std::pair<std::string, Tensor>> params;
    for (const auto& [name, tensor] : data.arrays)
        if (name.rfind("adam.", 0) != 0) params.emplace_back(name, tensor);
    model.load_state(params);
    return model;
}

struct MeanMetrics {
    double psnr = 0.0;
    double ms_ssim = 0.0;
    double cbr = 0.0;
};

MeanMetrics mean_over_clips(const std::vector<EvalRow>& rows, double snr_db) {
    MeanMetrics m;
    size_t n = 0;
    for (const auto& r : rows) {
        if (r.snr_db != snr_db) continue;
        m.psnr += r.psnr_db;
        m.ms_ssim += r.ms_ssim;
        m.cbr = r.cbr;
        ++n;
    }
    if (n) {
        m.psnr /= static_cast<double>(n);
        m.ms_ssim /= static_cast<double>(n);
    }
    return m;
}

}  // namespace

std::string usage() {
    return "usage: vjscc <command> [--config FILE] [--key value ...]\n"
           "\n"
           "commands:\n"
           "  train             train a model, write checkpoint + training CSV\n"
           "  sweep-snr         evaluate a checkpoint over snr_list, write CSV\n"
           "  sweep-cbr         evaluate a checkpoint over gamma_list, write CSV\n"
           "  visualize-masks   write per-temporal-slice token mask graymaps\n"
           "  gradcheck         run finite-difference gradient suites\n"
           "\n"
           "Any config key can be overridden with --key value; see configs/desk.cfg\n"
           "for the full key list. Exit codes: 0 ok, 1 config error, 2 failure.\n";
}

int cmd_train(ExperimentConfig cfg, const std::string& config_bytes) {
    cfg.validate();
    prepare_output_dir(cfg, config_bytes);
    const auto clips = training_clips(cfg);
    if (clips.empty()) throw ConfigError("no training clips configured");

    Model model(cfg.pipe, cfg.train.seed);
    AdamState adam;
    adam.init(model.params());
    bool resumed = false;
    if (!cfg.resume.empty()) {
        restore(model, adam, load_checkpoint(cfg.resume));
        resumed = true;
    }

    const std::string log_path = cfg.output_dir + "/train_log.csv";
    const bool append = resumed && fs::exists(log_path);
    std::ofstream log(log_path, append ? std::ios::app : std::ios::out);
    if (!log) throw IoError("cannot open " + log_path);
    if (!append) log << "step,snr_db,loss,wall_ms\n";

    const std::string ckpt_path = cfg.output_dir + "/checkpoint.ckpt";
    std::vector<const VideoClip*> batch(cfg.train.batch_size);
    for (size_t i = 0; i < cfg.train.steps; ++i) {
        const auto idx =
            batch_indices(cfg.train.seed, adam.step, cfg.train.batch_size, clips.size());
        for (size_t b = 0; b < batch.size(); ++b) batch[b] = &clips[idx[b]];
        const auto t0 = std::chrono::steady_clock::now();
        const StepResult res = train_step(model, batch, adam, cfg.train);
        const double wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        log << adam.step << "," << fmt(res.snr_db, 6) << "," << fmt(res.loss) << ","
            << std::fixed << std::setprecision(3) << wall_ms << std::defaultfloat << "\n";
        if (cfg.train.eval_every && adam.step % cfg.train.eval_every == 0)
            save_checkpoint(ckpt_path, snapshot(model, adam, cfg));
        if (adam.step % 100 == 0)
            std::cout << "step " << adam.step << " loss " << fmt(res.loss, 6) << "\n";
    }
    save_checkpoint(ckpt_path, snapshot(model, adam, cfg));
    std::cout << "checkpoint written to " << ckpt_path << "\n";
    return kExitOk;
}

int cmd_sweep_snr(ExperimentConfig cfg, const std::string& config_bytes) {
    cfg.validate();
    prepare_output_dir(cfg, config_bytes);
    Model model = model_from_checkpoint(cfg);
    const auto clips = evaluation_clips(cfg);
    const auto rows = evaluate(model, clips, cfg.snr_list, cfg.pipe.gamma, cfg.train.seed);

    const std::string csv_path = cfg.output_dir + "/sweep_snr.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path);
    csv << "snr_db,mean_psnr_db,mean_ms_ssim,cbr\n";
    for (double snr : cfg.snr_list) {
        const MeanMetrics m = mean_over_clips(rows, snr);
        csv << fmt(snr, 6) << "," << fmt(m.psnr) << "," << fmt(m.ms_ssim) << "," << fmt(m.cbr)
            << "\n";
    }
    std::cout << "wrote " << csv_path << "\n";
    return kExitOk;
}

int cmd_sweep_cbr(ExperimentConfig cfg, const std::string& config_bytes) {
    cfg.validate();
    prepare_output_dir(cfg, config_bytes);
    Model model = model_from_checkpoint(cfg);
    const auto clips = evaluation_clips(cfg);

    const std::string csv_path = cfg.output_dir + "/sweep_cbr.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path);
    csv << "gamma,cbr,mean_psnr_db,mean_ms_ssim\n";
    for (double gamma : cfg.gamma_list) {
        const auto rows = evaluate(model, clips, {cfg.pipe.snr_db}, gamma, cfg.train.seed);
        const MeanMetrics m = mean_over_clips(rows, cfg.pipe.snr_db);
        csv << fmt(gamma, 6) << "," << fmt(m.cbr) << "," << fmt(m.psnr) << "," << fmt(m.ms_ssim)
            << "\n";
    }
    std::cout << "wrote " << csv_path << "\n";
    return kExitOk;
}

int cmd_visualize_masks(ExperimentConfig cfg, const std::string& config_bytes) {
    cfg.validate();
    prepare_output_dir(cfg, config_bytes);
    Model model = model_from_checkpoint(cfg);

    VideoClip clip;
    MoverTrace trace;
    if (cfg.data_source == "raw") {
        if (cfg.clip_index >= cfg.raw_paths.size())
            throw ConfigError("clip_index " + std::to_string(cfg.clip_index) +
                              " out of range for raw_paths");
        clip = load_raw(cfg.raw_paths[cfg.clip_index], cfg.pipe.t_frames, cfg.pipe.channels,
                        cfg.pipe.height, cfg.pipe.width);
    } else {
        SyntheticClip synth =
            synthesize_clip(cfg.clip_seed + kEvalClipOffset + cfg.clip_index, cfg.pipe.t_frames,
                            cfg.pipe.channels, cfg.pipe.height, cfg.pipe.width, cfg.pattern);
        clip = std::move(synth.clip);
        trace = std::move(synth.trace);
    }

    EncodeResult enc = model.encode(Model::clip_to_tensor(clip), cfg.pipe.gamma);
    const auto& pipe = cfg.pipe;
    write_mask_map(enc.selection.mask, pipe.n_t(), pipe.n_h(), pipe.n_w(),
                   cfg.output_dir + "/mask");
    {
        const auto bits = serialize_mask(enc.selection.mask);
        std::ofstream out(cfg.output_dir + "/mask.bin", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bits.data()),
                  static_cast<std::streamsize>(bits.size()));
    }
    std::cout << "kept " << enc.selection.kept_count() << " of " << enc.selection.mask.size()
              << " tokens (gamma " << fmt(cfg.pipe.gamma, 6) << ")\n";

    if (!trace.boxes.empty()) {
        const auto footprint = mover_token_footprint(trace, pipe.tube_t, pipe.tube_h, pipe.tube_w,
                                                     pipe.n_t(), pipe.n_h(), pipe.n_w());
        size_t on_footprint = 0, footprint_total = 0;
        for (size_t i = 0; i < footprint.size(); ++i) {
            footprint_total += footprint[i];
            if (footprint[i] && enc.selection.mask[i]) ++on_footprint;
        }
        const double fraction =
            static_cast<double>(on_footprint) / static_cast<double>(enc.selection.kept_count());
        std::cout << "kept tokens intersecting mover footprint: " << fmt(fraction, 6) << " ("
                  << on_footprint << "/" << enc.selection.kept_count() << " kept, footprint "
                  << footprint_total << " tokens)\n";
    }
    std::cout << pipe.n_t() << " mask maps written under " << cfg.output_dir << "\n";
    return kExitOk;
}

int cmd_gradcheck(ExperimentConfig cfg, const std::string& config_bytes) {
    if (cfg.pipe.hidden_dim > 64)
        throw ConfigError("gradcheck refuses hidden_dim > 64 (finite differences need toy dims); "
                          "got " + std::to_string(cfg.pipe.hidden_dim));
    cfg.validate();
    prepare_output_dir(cfg, config_bytes);

    GradCheckReport report = check_primitives(cfg.train.seed, 1e-4, cfg.gradcheck_corrupt);
    report.entries.push_back(check_pipeline(cfg.pipe, 48, cfg.train.seed, 1e-3));

    std::cout << std::left << std::setw(34) << "operation" << std::setw(14) << "max_rel_err"
              << std::setw(10) << "tol" << "status\n";
    for (const auto& e : report.entries)
        std::cout << std::left << std::setw(34) << e.name << std::setw(14)
                  << fmt(e.max_rel_err, 3) << std::setw(10) << fmt(e.tol, 2)
                  << (e.pass ? "PASS" : "FAIL") << "\n";
    if (!report.all_pass()) {
        std::cout << "gradcheck FAILED\n";
        return kExitRuntime;
    }
    std::cout << "gradcheck passed\n";
    return kExitOk;
}

int run(const std::vector<std::string>& args) {
    try {
        if (args.empty() || args[0] == "help" || args[0] == "--help") {
            std::cout << usage();
            return args.empty() ? kExitConfig : kExitOk;
        }
        const std::string command = args[0];

        // two passes so a checkpoint's embedded config can serve as the base:
        // defaults -> embedded -> config file -> flag overrides
        auto apply_args = [&](ExperimentConfig base, std::string* verbatim) {
            ExperimentConfig cfg = std::move(base);
            for (size_t i = 1; i < args.size(); i += 2) {
                if (args[i].rfind("--", 0) != 0 || i + 1 >= args.size())
                    throw ConfigError("expected --key value pairs, got '" + args[i] + "'");
                const std::string key = args[i].substr(2);
                const std::string& value = args[i + 1];
                if (key == "config") {
                    cfg = [&] {
                        ExperimentConfig file_cfg = load_config_file(value);
                        return file_cfg;
                    }();
                    if (verbatim) {
                        std::ifstream in(value);
                        std::stringstream ss;
                        ss << in.rdbuf();
                        *verbatim = ss.str();
                    }
                } else {
                    apply_override(cfg, key, value);
                }
            }
            return cfg;
        };

        std::string verbatim;
        ExperimentConfig cfg = apply_args(ExperimentConfig{}, &verbatim);
        if (!cfg.checkpoint.empty() &&
            (command == "sweep-snr" || command == "sweep-cbr" || command == "visualize-masks")) {
            // re-apply everything on top of the embedded config
            const CheckpointData data = load_checkpoint(cfg.checkpoint);
            ExperimentConfig base;
            {
                const std::string tmp = cfg.output_dir + "/.embedded.cfg";
                // parse the embedded text through the normal loader
                std::error_code ec;
                std::filesystem::create_directories(cfg.output_dir, ec);
                std::ofstream out(tmp);
                out << data.config_text;
                out.close();
                base = load_config_file(tmp);
                std::filesystem::remove(tmp, ec);
            }
            cfg = apply_args(std::move(base), nullptr);
        }
        if (verbatim.empty()) verbatim = serialize_config(cfg);

        if (command == "train") return cmd_train(std::move(cfg), verbatim);
        if (command == "sweep-snr") return cmd_sweep_snr(std::move(cfg), verbatim);
        if (command == "sweep-cbr") return cmd_sweep_cbr(std::move(cfg), verbatim);
        if (command == "visualize-masks") return cmd_visualize_masks(std::move(cfg), verbatim);
        if (command == "gradcheck") return cmd_gradcheck(std::move(cfg), verbatim);
        std::cerr << "unknown command '" << command << "'\n" << usage();
        return kExitConfig;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace vjscc::cli
