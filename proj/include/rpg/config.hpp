#pragma once

#include <stdexcept>
#include <string>

#include "rpg/trainer.hpp"

namespace rpg {

class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Nested key/value text config mirroring TrainConfig. Unknown sections
// or keys are rejected with the offending line number; parse ->
// serialize -> parse is the identity.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);
std::string serialize_config(const TrainConfig& cfg);

// Applies one "section.key = value" override.
void apply_override(TrainConfig& cfg, const std::string& section,
                    const std::string& key, const std::string& value);

// Environment overrides of the form RPG_<SECTION>_<KEY>, e.g.
// RPG_RUN_SEED=7.
void apply_env_overrides(TrainConfig& cfg);

}  // namespace rpg
