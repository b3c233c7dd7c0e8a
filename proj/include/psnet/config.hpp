#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "psnet/errors.hpp"
#include "psnet/losses.hpp"
#include "psnet/model.hpp"

namespace psnet {

enum class ConfigType { integer, real, boolean, text };

struct ConfigEntry {
    const char* key;
    ConfigType type;
    const char* default_value;
};

// Every tunable the pipeline understands, with its default. File sections map
// onto dotted prefixes, so "[train.step1] epochs = 5" sets train.step1.epochs.
inline const std::vector<ConfigEntry>& config_schema() {
    static const std::vector<ConfigEntry> schema = {
        {"data.align_size", ConfigType::integer, "272"},
        {"data.distractors_manifest", ConfigType::text, ""},
        {"data.eye_height", ConfigType::real, "0.35"},
        {"data.eye_span", ConfigType::real, "0.46"},
        {"data.photos_manifest", ConfigType::text, ""},
        {"data.pretrain_manifest", ConfigType::text, ""},
        {"data.target_manifest", ConfigType::text, ""},
        {"eval.partitions", ConfigType::integer, "5"},
        {"eval.ranks", ConfigType::text, "1,10,50"},
        {"eval.shared_pretrain", ConfigType::boolean, "true"},
        {"eval.test_count", ConfigType::integer, "75"},
        {"eval.train_count", ConfigType::integer, "48"},
        {"loss.similarity", ConfigType::text, "l1+ssim"},
        {"model.activation", ConfigType::text, "softplus"},
        {"model.adacos_dynamic", ConfigType::boolean, "true"},
        {"model.disc_base", ConfigType::integer, "64"},
        {"model.disc_padding", ConfigType::integer, "1"},
        {"model.encoder_base", ConfigType::integer, "32"},
        {"model.encoder_stages", ConfigType::integer, "5"},
        {"model.generator_base", ConfigType::integer, "512"},
        {"model.generator_min", ConfigType::integer, "32"},
        {"model.image_size", ConfigType::integer, "256"},
        {"model.latent_dim", ConfigType::integer, "512"},
        {"model.sketch_channels", ConfigType::integer, "3"},
        {"model.synthesis", ConfigType::text, "bidirectional"},
        {"train.beta1", ConfigType::real, "0.5"},
        {"train.beta2", ConfigType::real, "0.999"},
        {"train.schedule", ConfigType::text, "1,2,3"},
        {"train.seed", ConfigType::integer, "1"},
        {"train.step1.batch", ConfigType::integer, "8"},
        {"train.step1.epochs", ConfigType::integer, "3000"},
        {"train.step1.lr", ConfigType::real, "2e-4"},
        {"train.step1.weights.lambda_gan", ConfigType::real, "1"},
        {"train.step1.weights.lambda_s", ConfigType::real, "10"},
        {"train.step1.weights.lambda_w", ConfigType::real, "1"},
        {"train.step2.batch", ConfigType::integer, "32"},
        {"train.step2.epochs", ConfigType::integer, "50"},
        {"train.step2.lr", ConfigType::real, "5e-4"},
        {"train.step3.batch", ConfigType::integer, "8"},
        {"train.step3.epochs", ConfigType::integer, "3000"},
        {"train.step3.lr", ConfigType::real, "2e-4"},
        {"train.step3.reset_disc", ConfigType::boolean, "false"},
        {"train.step3.weights.lambda_gan", ConfigType::real, "1"},
        {"train.step3.weights.lambda_s", ConfigType::real, "10"},
        {"train.step3.weights.lambda_w", ConfigType::real, "1"},
    };
    return schema;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline std::string valid_keys_hint() {
    std::string out = "valid keys:";
    for (const auto& e : config_schema()) {
        out += "\n  ";
        out += e.key;
    }
    return out;
}

}  // namespace detail

class Config {
public:
    Config() {
        for (const auto& e : config_schema()) values_[e.key] = e.default_value;
    }

    static const ConfigEntry& entry(const std::string& key) {
        for (const auto& e : config_schema())
            if (key == e.key) return e;
        throw ConfigError("unknown config key '" + key + "'\n" + detail::valid_keys_hint());
    }

    static bool has_key(const std::string& key) {
        for (const auto& e : config_schema())
            if (key == e.key) return true;
        return false;
    }

    // Sets a dotted key, validating both the key and the value's type.
    void set(const std::string& key, const std::string& value, const std::string& where = "") {
        const std::string ctx = where.empty() ? "" : " (" + where + ")";
        if (!has_key(key))
            throw ConfigError("unknown config key '" + key + "'" + ctx + "\n" +
                              detail::valid_keys_hint());
        const auto& e = entry(key);
        const std::string val = detail::trim(value);
        switch (e.type) {
            case ConfigType::integer: {
                char* end = nullptr;
                (void)std::strtoll(val.c_str(), &end, 10);
                if (val.empty() || end == val.c_str() || *end != '\0')
                    throw ConfigError("config key '" + key + "' expects an integer, got '" + val +
                                      "'" + ctx);
                break;
            }
            case ConfigType::real: {
                char* end = nullptr;
                (void)std::strtod(val.c_str(), &end);
                if (val.empty() || end == val.c_str() || *end != '\0')
                    throw ConfigError("config key '" + key + "' expects a number, got '" + val +
                                      "'" + ctx);
                break;
            }
            case ConfigType::boolean:
                if (val != "true" && val != "false" && val != "1" && val != "0")
                    throw ConfigError("config key '" + key + "' expects true/false, got '" + val +
                                      "'" + ctx);
                break;
            case ConfigType::text: break;
        }
        values_[key] = val;
    }

    const std::string& get_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            throw ConfigError("unknown config key '" + key + "'\n" + detail::valid_keys_hint());
        return it->second;
    }

    std::int64_t get_int(const std::string& key) const {
        return std::strtoll(get_string(key).c_str(), nullptr, 10);
    }

    double get_double(const std::string& key) const {
        return std::strtod(get_string(key).c_str(), nullptr);
    }

    bool get_bool(const std::string& key) const {
        const auto& v = get_string(key);
        return v == "true" || v == "1";
    }

    std::uint64_t get_seed() const { return static_cast<std::uint64_t>(get_int("train.seed")); }

    // INI-style text: [section] headers become key prefixes, '#' and ';' start
    // comments, later assignments win.
    void load_stream(std::istream& in, const std::string& origin) {
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const std::string where = origin + " line " + std::to_string(line_no);
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("malformed section header '" + line + "' (" + where + ")");
                section = detail::trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("expected 'key = value', got '" + line + "' (" + where + ")");
            std::string key = detail::trim(line.substr(0, eq));
            if (!section.empty()) key = section + "." + key;
            set(key, line.substr(eq + 1), where);
        }
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        load_stream(in, path);
    }

    // Deterministic flat echo; the output parses back via load_stream.
    std::string echo() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

    bool operator==(const Config& o) const { return values_ == o.values_; }

private:
    std::map<std::string, std::string> values_;
};

inline ModelConfig model_config_from(const Config& c) {
    ModelConfig m;
    m.image_size = static_cast<int>(c.get_int("model.image_size"));
    m.latent_dim = static_cast<int>(c.get_int("model.latent_dim"));
    m.encoder_stages = static_cast<int>(c.get_int("model.encoder_stages"));
    m.encoder_base_channels = static_cast<int>(c.get_int("model.encoder_base"));
    m.generator_base_channels = static_cast<int>(c.get_int("model.generator_base"));
    m.generator_min_channels = static_cast<int>(c.get_int("model.generator_min"));
    m.disc_base_channels = static_cast<int>(c.get_int("model.disc_base"));
    m.disc_padding = static_cast<int>(c.get_int("model.disc_padding"));
    m.sketch_channels = static_cast<int>(c.get_int("model.sketch_channels"));
    m.generator_activation = parse_generator_activation(c.get_string("model.activation"));
    m.synthesis = parse_synthesis_mode(c.get_string("model.synthesis"));
    m.adacos_dynamic = c.get_bool("model.adacos_dynamic");
    m.validate();
    return m;
}

// Per-step loss weights; only steps 1 and 3 use the joint objective.
template <typename T>
LossWeights<T> loss_weights_from(const Config& c, int step) {
    if (step != 1 && step != 3)
        throw ConfigError("loss weights exist for steps 1 and 3 only");
    const std::string p = "train.step" + std::to_string(step) + ".weights.";
    LossWeights<T> w;
    w.lambda_gan = static_cast<T>(c.get_double(p + "lambda_gan"));
    w.lambda_s = static_cast<T>(c.get_double(p + "lambda_s"));
    w.lambda_w = static_cast<T>(c.get_double(p + "lambda_w"));
    w.validate();
    return w;
}

inline SimilarityMode similarity_mode_from(const Config& c) {
    return parse_similarity_mode(c.get_string("loss.similarity"));
}

// Ordered training-step subset, e.g. "1,2,3", "2,3" or "3".
inline std::vector<int> parse_schedule(const std::string& s) {
    std::vector<int> steps;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur = detail::trim(cur);
        if (cur != "1" && cur != "2" && cur != "3")
            throw ConfigError("train.schedule must list steps from {1,2,3}, got '" + s + "'");
        steps.push_back(cur[0] - '0');
    }
    if (steps.empty()) throw ConfigError("train.schedule is empty");
    for (std::size_t i = 1; i < steps.size(); ++i)
        if (steps[i] <= steps[i - 1])
            throw ConfigError("train.schedule must be strictly increasing, got '" + s + "'");
    return steps;
}

// Rank levels reported in summaries, e.g. "1,10,50".
inline std::vector<int> parse_ranks(const std::string& s) {
    std::vector<int> ranks;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) {
        cur = detail::trim(cur);
        char* end = nullptr;
        const long v = std::strtol(cur.c_str(), &end, 10);
        if (cur.empty() || *end != '\0' || v < 1)
            throw ConfigError("eval.ranks must be positive integers, got '" + s + "'");
        ranks.push_back(static_cast<int>(v));
    }
    if (ranks.empty()) throw ConfigError("eval.ranks is empty");
    return ranks;
}

}  // namespace psnet
