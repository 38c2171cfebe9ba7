#include "json_config.hpp"

#include <iterator>

#include <json.hpp>

namespace gvk::cli {

namespace {

using nlohmann::ordered_json;

std::string scalar_text(const ordered_json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConfigError("config key '" + key + "' must be a string, number, boolean or array of those");
}

void add_items(const ordered_json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : obj.items()) {
        CLI::ConfigItem item;
        item.parents = parents;
        item.name = key;
        if (value.is_array()) {
            for (const auto& e : value) item.inputs.push_back(scalar_text(e, key));
        } else {
            item.inputs.push_back(scalar_text(value, key));
        }
        out.push_back(std::move(item));
    }
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
    return app ? resolved_config_json(*app) : "{}";
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
    ordered_json doc;
    try {
        doc = ordered_json::parse(std::string(std::istreambuf_iterator<char>(input), {}));
    } catch (const nlohmann::json::parse_error& e) {
        throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    ordered_json flat = ordered_json::object();
    for (const auto& [key, value] : doc.items()) {
        if (value.is_object()) {
            if (key == subcommand_) add_items(value, {key}, items);
        } else {
            flat[key] = value;
        }
    }
    add_items(flat, {subcommand_}, items);
    return items;
}

std::string resolved_config_json(const CLI::App& sub) {
    ordered_json j = ordered_json::object();
    j["subcommand"] = sub.get_name();
    for (const auto* opt : sub.get_options()) {
        const auto name = opt->get_single_name();
        if (name == "help" || name == "config" || opt->get_lnames().empty()) continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_expected_max() > 1 && opt->get_type_size_max() >= 1) {
                j[name] = res;
            } else if (opt->get_expected_min() == 0) {
                j[name] = true;
            } else {
                j[name] = res.empty() ? std::string() : res.back();
            }
        } else if (!opt->get_default_str().empty()) {
            j[name] = opt->get_default_str();
        } else if (opt->get_expected_min() == 0) {
            j[name] = false;
        } else {
            j[name] = nullptr;
        }
    }
    return j.dump();
}

}  // namespace gvk::cli
