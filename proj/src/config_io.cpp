#include "qdren/config_io.hpp"

namespace qdren {

using nlohmann::json;

json config_to_json(const ModelConfig& c) {
    return json{
        {"dim", c.dim},
        {"blocks", c.blocks},
        {"mode", std::string(to_string(c.mode))},
        {"input_style", std::string(to_string(c.input_style))},
        {"window", c.window},
        {"phi_cell", std::string(ops::to_string(c.phi_cell))},
        {"phi_out", std::string(ops::to_string(c.output_activation()))},
        {"l2", c.l2},
        {"l2_embedding", c.l2_embedding},
        {"dropout", c.dropout},
        {"lr", c.lr},
        {"clip_norm", c.clip_norm},
        {"batch", c.batch_size},
        {"optimizer", std::string(to_string(c.optimizer))},
        {"seed", c.seed},
    };
}

namespace {

template <typename T>
T get_as(const std::string& key, const json& v) {
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
            if (!v.is_number_unsigned()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("");
        } else {
            if (!v.is_string()) throw ConfigError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError("invalid value for '" + key + "': " + v.dump());
    }
}

template <typename F>
auto parse_enum(const std::string& key, const json& v, F parse) {
    try {
        return parse(get_as<std::string>(key, v));
    } catch (const ArgumentError& e) {
        throw ConfigError("invalid value for '" + key + "': " + e.what());
    }
}

}  // namespace

bool apply_config_key(ModelConfig& c, const std::string& key, const json& v) {
    if (key == "dim") c.dim = get_as<std::size_t>(key, v);
    else if (key == "blocks") c.blocks = get_as<std::size_t>(key, v);
    else if (key == "mode") c.mode = parse_enum(key, v, parse_gate_mode);
    else if (key == "input_style") c.input_style = parse_enum(key, v, parse_input_style);
    else if (key == "window") c.window = get_as<std::size_t>(key, v);
    else if (key == "phi_cell") c.phi_cell = parse_enum(key, v, ops::parse_activation);
    else if (key == "phi_out") c.phi_out = parse_enum(key, v, ops::parse_activation);
    else if (key == "l2") c.l2 = get_as<double>(key, v);
    else if (key == "l2_embedding") c.l2_embedding = get_as<bool>(key, v);
    else if (key == "dropout") c.dropout = get_as<double>(key, v);
    else if (key == "lr") c.lr = get_as<double>(key, v);
    else if (key == "clip_norm") c.clip_norm = get_as<double>(key, v);
    else if (key == "batch") c.batch_size = get_as<std::size_t>(key, v);
    else if (key == "optimizer") c.optimizer = parse_enum(key, v, parse_optimizer);
    else if (key == "seed") c.seed = get_as<std::uint64_t>(key, v);
    else return false;
    return true;
}

ModelConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ModelConfig c;
    for (const auto& [key, value] : j.items()) {
        if (!apply_config_key(c, key, value)) throw ConfigError("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

}  // namespace qdren
