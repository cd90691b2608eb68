#pragma once

#include <map>
#include <string>
#include <vector>

#include "augrl/trainer.hpp"

namespace augrl {

// Flat key-value configuration: one `section.key = value` per line, `#`
// comments, optional quotes around values. Unknown keys and malformed values
// are collected and reported together.
struct ConfigKey {
    std::string key;
    std::string type;  // int | float | bool | string
    std::string default_value;
    std::string description;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

const std::vector<ConfigKey>& config_schema();
std::string config_help_text();

std::map<std::string, std::string> parse_config_text(const std::string& text);  // throws ConfigError
TrainConfig train_config_from(const std::map<std::string, std::string>& kv);    // throws ConfigError

// convenience: parse text (usually file contents), apply overrides, build
TrainConfig load_train_config(const std::string& text,
                              const std::map<std::string, std::string>& overrides = {});

}  // namespace augrl
