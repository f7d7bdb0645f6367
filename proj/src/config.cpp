#include "rpg/config.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

extern char** environ;

namespace rpg {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double parse_real(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw ConfigError(where + ": expected a real number, got '" + v + "'");
  }
  return x;
}

long parse_int(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    throw ConfigError(where + ": expected an integer, got '" + v + "'");
  }
  return x;
}

bool parse_bool(const std::string& v, const std::string& where) {
  const std::string s = lower(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

std::vector<size_t> parse_size_list(const std::string& v,
                                    const std::string& where) {
  std::vector<size_t> out;
  std::string cur;
  std::stringstream ss(v);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (cur.empty()) continue;
    const long x = parse_int(cur, where);
    if (x <= 0) throw ConfigError(where + ": sizes must be positive");
    out.push_back(static_cast<size_t>(x));
  }
  return out;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_size_list(const std::vector<size_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::string section, key;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    auto add = [&](const std::string& sec, const std::string& key, auto setter,
                   auto getter) {
      f.push_back({sec, key, setter, getter});
    };

    add("run", "env",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          if (!env_id_known(v)) throw ConfigError(w + ": unknown env id '" + v + "'");
          c.env_id = v;
        },
        [](const TrainConfig& c) { return c.env_id; });
    add("run", "estimator",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          try {
            c.estimator = estimator_from_string(v);
          } catch (const std::exception&) {
            throw ConfigError(w + ": estimator must be score|pathwise|hybrid");
          }
        },
        [](const TrainConfig& c) { return std::string(to_string(c.estimator)); });
    add("run", "model_based",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.model_based = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.model_based ? "true" : "false"; });
    add("run", "seed",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.seed = static_cast<uint64_t>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.seed); });
    add("run", "total_env_steps",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.total_env_steps = parse_int(v, w);
          if (c.total_env_steps < 1) throw ConfigError(w + ": must be >= 1");
        },
        [](const TrainConfig& c) { return std::to_string(c.total_env_steps); });
    add("run", "eval_every_steps",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.eval_every_steps = parse_int(v, w);
        },
        [](const TrainConfig& c) { return std::to_string(c.eval_every_steps); });
    add("run", "eval_episodes",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.eval_episodes = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.eval_episodes); });
    add("run", "horizon_override",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.horizon_override = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.horizon_override); });

    add("latent", "kind",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          if (v == "none") c.latent_kind = LatentKind::none;
          else if (v == "categorical") c.latent_kind = LatentKind::categorical;
          else if (v == "gaussian") c.latent_kind = LatentKind::gaussian;
          else throw ConfigError(w + ": kind must be none|categorical|gaussian");
        },
        [](const TrainConfig& c) {
          return std::string(c.latent_kind == LatentKind::none ? "none"
                             : c.latent_kind == LatentKind::categorical
                                 ? "categorical"
                                 : "gaussian");
        });
    add("latent", "categories",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.latent_categories = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.latent_categories); });
    add("latent", "dim",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.latent_dim = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.latent_dim); });
    add("latent", "learned",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.latent_learned = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.latent_learned ? "true" : "false"; });
    add("latent", "resample_period",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.resample_period = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.resample_period); });

    add("objective", "temperature",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.temperature = parse_real(v, w);
          if (c.temperature <= 0) throw ConfigError(w + ": must be positive");
        },
        [](const TrainConfig& c) { return fmt_real(c.temperature); });
    add("objective", "beta",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.beta = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.beta); });
    add("objective", "gamma",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.gamma = parse_real(v, w);
          if (c.gamma <= 0.0 || c.gamma >= 1.0) {
            throw ConfigError(w + ": gamma must lie in (0, 1)");
          }
        },
        [](const TrainConfig& c) { return fmt_real(c.gamma); });
    add("objective", "alpha_init",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.alpha_init = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.alpha_init); });
    add("objective", "alpha_auto",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.alpha_auto = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.alpha_auto ? "true" : "false"; });
    add("objective", "alpha_lr",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.alpha_lr = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.alpha_lr); });
    add("objective", "entropy_target",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.entropy_target = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.entropy_target); });
    add("objective", "entropy_target_anneal",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.entropy_target_anneal = parse_bool(v, w);
        },
        [](const TrainConfig& c) {
          return c.entropy_target_anneal ? "true" : "false";
        });
    add("objective", "entropy_target_explore",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.entropy_target_explore = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.entropy_target_explore); });
    add("objective", "alpha_z_init",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.alpha_z_init = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.alpha_z_init); });
    add("objective", "alpha_z_decay",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.alpha_z_decay = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.alpha_z_decay ? "true" : "false"; });

    add("policy", "hidden",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.policy_hidden = parse_size_list(v, w);
        },
        [](const TrainConfig& c) { return fmt_size_list(c.policy_hidden); });
    add("policy", "init_log_sigma",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.init_log_sigma = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.init_log_sigma); });
    add("policy", "train_sigma",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.train_sigma = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.train_sigma ? "true" : "false"; });

    add("optim", "batch",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.batch = static_cast<int>(parse_int(v, w));
          if (c.batch < 1) throw ConfigError(w + ": batch must be >= 1");
        },
        [](const TrainConfig& c) { return std::to_string(c.batch); });
    add("optim", "lr",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.lr = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.lr); });
    add("optim", "adam_beta1",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.adam_beta1 = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.adam_beta1); });
    add("optim", "grad_clip",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.grad_clip = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.grad_clip); });
    add("optim", "score_baseline",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.score_baseline = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.score_baseline ? "true" : "false"; });

    add("model", "state_dim",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.state_dim = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.state_dim); });
    add("model", "hidden",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.model_hidden = parse_size_list(v, w);
        },
        [](const TrainConfig& c) { return fmt_size_list(c.model_hidden); });
    add("model", "gru",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.gru_dynamics = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.gru_dynamics ? "true" : "false"; });
    add("model", "batch",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.model_batch = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.model_batch); });
    add("model", "k_horizon",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.k_horizon = static_cast<int>(parse_int(v, w));
          if (c.k_horizon < 0) throw ConfigError(w + ": k_horizon must be >= 0");
        },
        [](const TrainConfig& c) { return std::to_string(c.k_horizon); });
    add("model", "lr",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.model_lr = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.model_lr); });
    add("model", "update_every",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.update_every = static_cast<int>(parse_int(v, w));
          if (c.update_every < 1) throw ConfigError(w + ": must be >= 1");
        },
        [](const TrainConfig& c) { return std::to_string(c.update_every); });
    add("model", "actor_update_freq",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.actor_update_freq = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.actor_update_freq); });
    add("model", "seed_steps",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.seed_steps = parse_int(v, w);
        },
        [](const TrainConfig& c) { return std::to_string(c.seed_steps); });
    add("model", "buffer_capacity",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          const long x = parse_int(v, w);
          if (x < 1) throw ConfigError(w + ": capacity must be >= 1");
          c.buffer_capacity = static_cast<size_t>(x);
        },
        [](const TrainConfig& c) { return std::to_string(c.buffer_capacity); });
    add("model", "polyak",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.polyak = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.polyak); });

    add("rnd", "enabled",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.rnd_enabled = parse_bool(v, w);
        },
        [](const TrainConfig& c) { return c.rnd_enabled ? "true" : "false"; });
    add("rnd", "coef",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.rnd_coef = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.rnd_coef); });
    add("rnd", "levels",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.rnd_levels = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.rnd_levels); });
    add("rnd", "out_dim",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.rnd_out_dim = static_cast<int>(parse_int(v, w));
        },
        [](const TrainConfig& c) { return std::to_string(c.rnd_out_dim); });
    add("rnd", "hidden",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.rnd_hidden = parse_size_list(v, w);
        },
        [](const TrainConfig& c) { return fmt_size_list(c.rnd_hidden); });
    add("rnd", "lr",
        [](TrainConfig& c, const std::string& v, const std::string& w) {
          c.rnd_lr = parse_real(v, w);
        },
        [](const TrainConfig& c) { return fmt_real(c.rnd_lr); });
    return f;
  }();
  return fields;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : schema()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const Field& f : schema()) {
        if (f.section == section) known = true;
      }
      if (!known) throw ConfigError(where + ": unknown section '" + section + "'");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError(where + ": key '" + key + "' outside any section");
    }
    const Field* field = find_field(section, key);
    if (field == nullptr) {
      throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
    }
    field->set(cfg, value, where + " (" + section + "." + key + ")");
  }
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : schema()) {
    if (f.section != section) {
      if (!out.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

void apply_override(TrainConfig& cfg, const std::string& section,
                    const std::string& key, const std::string& value) {
  const Field* field = find_field(section, key);
  if (field == nullptr) {
    throw ConfigError("unknown key '" + section + "." + key + "'");
  }
  field->set(cfg, value, section + "." + key);
}

void apply_env_overrides(TrainConfig& cfg) {
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry(*e);
    if (entry.rfind("RPG_", 0) != 0) continue;
    const size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    const std::string name = entry.substr(4, eq - 4);
    const std::string value = entry.substr(eq + 1);
    const size_t us = name.find('_');
    if (us == std::string::npos) continue;
    const std::string section = lower(name.substr(0, us));
    const std::string key = lower(name.substr(us + 1));
    const Field* field = find_field(section, key);
    if (field == nullptr) {
      throw ConfigError("environment override names unknown key '" + section +
                        "." + key + "'");
    }
    field->set(cfg, value, "env RPG_" + name);
  }
}

}  // namespace rpg
