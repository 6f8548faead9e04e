#include "vjscc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vjscc {

namespace {

struct KeyDesc {
    std::string section;
    std::string key;
    std::string doc;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

size_t parse_size(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size() || n < 0) throw std::invalid_argument(v);
        return static_cast<size_t>(n);
    } catch (const std::exception&) {
        throw ConfigError("field '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("field '" + key + "': expected an unsigned integer, got '" + v + "'");
    }
}

double parse_double(const std::string& v, const std::string& key) {
    if (v == "inf") return std::numeric_limits<double>::infinity();
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("field '" + key + "': expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("field '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(v);
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_double(item, key));
    if (out.empty()) throw ConfigError("field '" + key + "': empty list");
    return out;
}

std::string format_double(double d) {
    if (std::isinf(d)) return "inf";
    std::ostringstream os;
    os.precision(15);
    os << d;
    return os.str();
}

std::string format_double_list(const std::vector<double>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_double(v[i]);
    }
    return out;
}

std::string format_string_list(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

const std::vector<KeyDesc>& key_table() {
    static const std::vector<KeyDesc> table = [] {
        std::vector<KeyDesc> t;
        auto add = [&t](const std::string& sec, const std::string& key, const std::string& doc,
                        std::function<void(ExperimentConfig&, const std::string&)> set,
                        std::function<std::string(const ExperimentConfig&)> get) {
            t.push_back({sec, key, doc, std::move(set), std::move(get)});
        };

        // [video]
        add("video", "T", "frames per clip",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.t_frames = parse_size(v, "T"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.t_frames); });
        add("video", "C", "color channels",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.channels = parse_size(v, "C"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.channels); });
        add("video", "H", "frame height",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.height = parse_size(v, "H"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.height); });
        add("video", "W", "frame width",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.width = parse_size(v, "W"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.width); });

        // [model]
        add("model", "tube_t", "tube extent in frames",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.tube_t = parse_size(v, "tube_t"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.tube_t); });
        add("model", "tube_h", "tube extent in rows",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.tube_h = parse_size(v, "tube_h"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.tube_h); });
        add("model", "tube_w", "tube extent in columns",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.tube_w = parse_size(v, "tube_w"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.tube_w); });
        add("model", "K", "token hidden dimension",
            [](ExperimentConfig& c, const std::string& v) {
                c.pipe.hidden_dim = parse_size(v, "K");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.hidden_dim); });
        add("model", "heads", "attention heads",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.n_heads = parse_size(v, "heads"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.n_heads); });
        add("model", "L", "layers per ST/TT stack",
            [](ExperimentConfig& c, const std::string& v) { c.pipe.depth = parse_size(v, "L"); },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.depth); });
        add("model", "mlp_ratio", "MLP hidden width multiplier",
            [](ExperimentConfig& c, const std::string& v) {
                c.pipe.mlp_ratio = parse_size(v, "mlp_ratio");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.mlp_ratio); });
        add("model", "c", "channel reals per transmitted token",
            [](ExperimentConfig& c, const std::string& v) {
                c.pipe.channel_dim = parse_size(v, "c");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.pipe.channel_dim); });
        add("model", "disable_multiscale", "single 2L-layer stack instead of two branches",
            [](ExperimentConfig& c, const std::string& v) {
                c.pipe.disable_multiscale = parse_bool(v, "disable_multiscale");
            },
            [](const ExperimentConfig& c) {
                return c.pipe.disable_multiscale ? "true" : "false";
            });
        add("model", "disable_token_selection", "transmit every token",
            [](ExperimentConfig& c, const std::string& v) {
                c.pipe.disable_token_selection = parse_bool(v, "disable_token_selection");
            },
            [](const ExperimentConfig& c) {
                return c.pipe.disable_token_selection ? "true" : "false";
            });

        // [channel]
        add("channel", "snr_db", "evaluation SNR in dB (inf for noiseless)",
            [](ExperimentConfig& c, const std::string& v) {
                c.pipe.snr_db = parse_double(v, "snr_db");
            },
            [](const ExperimentConfig& c) { return format_double(c.pipe.snr_db); });
        add("channel", "snr_set_db", "training SNR set, one drawn per step",
            [](ExperimentConfig& c, const std::string& v) {
                c.train.snr_set_db = parse_double_list(v, "snr_set_db");
            },
            [](const ExperimentConfig& c) { return format_double_list(c.train.snr_set_db); });
        add("channel", "noiseless", "bypass channel noise during training",
            [](ExperimentConfig& c, const std::string& v) {
                c.train.noiseless = parse_bool(v, "noiseless");
            },
            [](const ExperimentConfig& c) { return c.train.noiseless ? "true" : "false"; });

        // [train]
        add("train", "lr", "Adam learning rate",
            [](ExperimentConfig& c, const std::string& v) {
                c.train.learning_rate = parse_double(v, "lr");
            },
            [](const ExperimentConfig& c) { return format_double(c.train.learning_rate); });
        add("train", "batch_size", "clips per optimization step",
            [](ExperimentConfig& c, const std::string& v) {
                c.train.batch_size = parse_size(v, "batch_size");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.train.batch_size); });
        add("train", "steps", "optimization steps to run",
            [](ExperimentConfig& c, const std::string& v) {
                c.train.steps = parse_size(v, "steps");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.train.steps); });
        add("train", "seed", "master seed for init, batches and noise",
            [](ExperimentConfig& c, const std::string& v) { c.train.seed = parse_u64(v, "seed"); },
            [](const ExperimentConfig& c) { return std::to_string(c.train.seed); });
        add("train", "gamma", "token keep ratio",
            [](ExperimentConfig& c, const std::string& v) {
                c.train.gamma = parse_double(v, "gamma");
                c.pipe.gamma = c.train.gamma;
            },
            [](const ExperimentConfig& c) { return format_double(c.train.gamma); });
        add("train", "eval_every", "steps between checkpoint saves",
            [](ExperimentConfig& c, const std::string& v) {
                c.train.eval_every = parse_size(v, "eval_every");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.train.eval_every); });

        // [data]
        add("data", "source", "synthetic or raw",
            [](ExperimentConfig& c, const std::string& v) {
                if (v != "synthetic" && v != "raw")
                    throw ConfigError("field 'source': expected synthetic or raw, got '" + v + "'");
                c.data_source = v;
            },
            [](const ExperimentConfig& c) { return c.data_source; });
        add("data", "pattern", "synthetic pattern name",
            [](ExperimentConfig& c, const std::string& v) { c.pattern = v; },
            [](const ExperimentConfig& c) { return c.pattern; });
        add("data", "train_clips", "number of synthetic training clips",
            [](ExperimentConfig& c, const std::string& v) {
                c.train_clips = parse_size(v, "train_clips");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.train_clips); });
        add("data", "eval_clips", "number of held-out synthetic clips",
            [](ExperimentConfig& c, const std::string& v) {
                c.eval_clips = parse_size(v, "eval_clips");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.eval_clips); });
        add("data", "clip_seed", "base seed for synthetic clips",
            [](ExperimentConfig& c, const std::string& v) {
                c.clip_seed = parse_u64(v, "clip_seed");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.clip_seed); });
        add("data", "clip_index", "which eval clip visualize-masks renders",
            [](ExperimentConfig& c, const std::string& v) {
                c.clip_index = parse_size(v, "clip_index");
            },
            [](const ExperimentConfig& c) { return std::to_string(c.clip_index); });
        add("data", "raw_paths", "comma-separated raw clip files",
            [](ExperimentConfig& c, const std::string& v) { c.raw_paths = split_list(v); },
            [](const ExperimentConfig& c) { return format_string_list(c.raw_paths); });

        // [run]
        add("run", "output_dir", "directory for logs, CSVs and checkpoints",
            [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
            [](const ExperimentConfig& c) { return c.output_dir; });
        add("run", "checkpoint", "checkpoint consumed by sweeps/visualization",
            [](ExperimentConfig& c, const std::string& v) { c.checkpoint = v; },
            [](const ExperimentConfig& c) { return c.checkpoint; });
        add("run", "resume", "checkpoint to continue training from",
            [](ExperimentConfig& c, const std::string& v) { c.resume = v; },
            [](const ExperimentConfig& c) { return c.resume; });
        add("run", "snr_list", "SNR sweep points in dB",
            [](ExperimentConfig& c, const std::string& v) {
                c.snr_list = parse_double_list(v, "snr_list");
            },
            [](const ExperimentConfig& c) { return format_double_list(c.snr_list); });
        add("run", "gamma_list", "keep-ratio sweep points",
            [](ExperimentConfig& c, const std::string& v) {
                c.gamma_list = parse_double_list(v, "gamma_list");
            },
            [](const ExperimentConfig& c) { return format_double_list(c.gamma_list); });
        add("run", "gradcheck_corrupt", "test hook: corrupt one gradient on purpose",
            [](ExperimentConfig& c, const std::string& v) {
                c.gradcheck_corrupt = parse_bool(v, "gradcheck_corrupt");
            },
            [](const ExperimentConfig& c) { return c.gradcheck_corrupt ? "true" : "false"; });
        return t;
    }();
    return table;
}

const KeyDesc* find_key(const std::string& key) {
    for (const auto& d : key_table())
        if (d.key == key) return &d;
    return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
    pipe.validate();
    train.validate();
    if (data_source == "raw" && raw_paths.empty())
        throw ConfigError("data source 'raw' needs raw_paths");
    for (double g : gamma_list)
        if (!(g > 0.0 && g <= 1.0))
            throw ConfigError("gamma_list entries must lie in (0, 1], got " + std::to_string(g));
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    ExperimentConfig cfg;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": malformed section header '" + line + "'");
            continue;  // sections are organizational; keys are globally unique
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value, got '" +
                              line + "'");
        auto trim = [](std::string s) {
            const auto sb = s.find_first_not_of(" \t");
            if (sb == std::string::npos) return std::string();
            const auto se = s.find_last_not_of(" \t");
            return s.substr(sb, se - sb + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const KeyDesc* desc = find_key(key);
        if (!desc)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown field '" + key +
                              "'");
        try {
            desc->set(cfg, value);
        } catch (const ConfigError& err) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + err.what());
        }
    }
    return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const KeyDesc* desc = find_key(key);
    if (!desc) throw ConfigError("unknown config key '--" + key + "'");
    desc->set(cfg, value);
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream os;
    std::string section;
    for (const auto& d : key_table()) {
        if (d.section != section) {
            if (!section.empty()) os << "\n";
            section = d.section;
            os << "[" << section << "]\n";
        }
        os << d.key << " = " << d.get(cfg) << "  # " << d.doc << "\n";
    }
    return os.str();
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& d : key_table()) keys.push_back(d.key);
    return keys;
}

}  // namespace vjscc
