#pragma once

#include <string>
#include <vector>

#include <CLI11.hpp>

namespace gvk::cli {

/// JSON config files for CLI11. Top-level keys are flag names of the invoked
/// subcommand ("steps", "vit-dim"); an object under a subcommand name applies
/// to that subcommand only. Values given on the command line win.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(std::string subcommand) : subcommand_(std::move(subcommand)) {}

    std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                          std::string prefix) const override;
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

private:
    std::string subcommand_;
};

/// Resolved option values of one subcommand as a JSON object.
std::string resolved_config_json(const CLI::App& sub);

}  // namespace gvk::cli
