#include "rpg.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "rpg/checkpoint.hpp"
#include "rpg/config.hpp"
#include "rpg/csv.hpp"
#include "rpg/estimators.hpp"
#include "rpg/gradcheck.hpp"
#include "rpg/trainer.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

// Exceptions map onto the exit-code contract: config problems are 1,
// anything that breaks at runtime is 2.
template <class Fn>
rpg_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const rpg::ConfigError& e) {
    set_error(e.what());
    return RPG_ERR_CONFIG;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return RPG_ERR_CONFIG;
  } catch (const std::exception& e) {
    set_error(e.what());
    return RPG_ERR_RUNTIME;
  } catch (...) {
    set_error("unknown failure");
    return RPG_ERR_RUNTIME;
  }
}

rpg::BanditPolicySpec default_bias_policy(const rpg::Env& env) {
  rpg::BanditPolicySpec spec;
  spec.logits = {0.0};
  spec.mu = {0.0};
  const auto& bounds = env.spec().action_bounds[0];
  if (bounds[1] - bounds[0] <= 100.0) {
    spec.squash = true;
    spec.bounds = {bounds[0], bounds[1]};
    spec.log_sigma = {std::log(0.3)};
  } else {
    spec.squash = false;
    spec.log_sigma = {0.0};
  }
  return spec;
}

}  // namespace

struct rpg_config {
  rpg::TrainConfig cfg;
};

struct rpg_run {
  rpg::RunRecord record;
  double final_return = 0.0;
  double final_coverage = 0.0;
};

extern "C" {

const char* rpg_last_error(void) { return g_last_error.c_str(); }

void rpg_string_free(char* s) { delete[] s; }

rpg_status rpg_config_default(rpg_config** out) {
  return guarded([&] {
    *out = new rpg_config();
    return RPG_OK;
  });
}

rpg_status rpg_config_load(const char* path, rpg_config** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) {
      throw rpg::ConfigError("null argument to rpg_config_load");
    }
    auto cfg = rpg::parse_config_file(path);
    *out = new rpg_config{std::move(cfg)};
    return RPG_OK;
  });
}

rpg_status rpg_config_parse(const char* text, rpg_config** out) {
  return guarded([&] {
    if (text == nullptr || out == nullptr) {
      throw rpg::ConfigError("null argument to rpg_config_parse");
    }
    auto cfg = rpg::parse_config_text(text);
    *out = new rpg_config{std::move(cfg)};
    return RPG_OK;
  });
}

rpg_status rpg_config_set(rpg_config* cfg, const char* section,
                          const char* key, const char* value) {
  return guarded([&] {
    if (cfg == nullptr || section == nullptr || key == nullptr ||
        value == nullptr) {
      throw rpg::ConfigError("null argument to rpg_config_set");
    }
    rpg::apply_override(cfg->cfg, section, key, value);
    return RPG_OK;
  });
}

rpg_status rpg_config_apply_env(rpg_config* cfg) {
  return guarded([&] {
    if (cfg == nullptr) throw rpg::ConfigError("null config");
    rpg::apply_env_overrides(cfg->cfg);
    return RPG_OK;
  });
}

char* rpg_config_dump(const rpg_config* cfg) {
  if (cfg == nullptr) return nullptr;
  const std::string text = rpg::serialize_config(cfg->cfg);
  char* out = new char[text.size() + 1];
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

void rpg_config_free(rpg_config* cfg) { delete cfg; }

rpg_status rpg_train(const rpg_config* cfg, const char* out_dir,
                     rpg_run** out) {
  return guarded([&] {
    if (cfg == nullptr || out == nullptr) {
      throw rpg::ConfigError("null argument to rpg_train");
    }
    rpg::TrainOutputs res = rpg::train(cfg->cfg);

    auto run = std::make_unique<rpg_run>();
    run->record = res.record;
    run->final_return = res.final_eval.mean;
    run->final_coverage =
        res.record.rows.empty() ? 0.0 : res.record.rows.back().coverage;

    if (out_dir != nullptr) {
      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      rpg::write_text_file((dir / "run.csv").string(),
                           rpg::run_record_csv(run->record));

      rpg::Checkpoint ck;
      std::vector<double> flat(res.policy.param_count());
      res.policy.copy_params_to(flat);
      ck.add("policy.params", flat);
      if (res.encoder) {
        std::vector<double> enc(res.encoder->net.param_count());
        res.encoder->net.copy_params_to(enc);
        ck.add("encoder.params", enc);
      }
      if (res.world_model) {
        std::vector<double> wmp(res.world_model->param_count());
        res.world_model->copy_params_to(wmp);
        ck.add("world_model.params", wmp);
      }
      ck.save((dir / "checkpoint").string());
    }

    *out = run.release();
    return RPG_OK;
  });
}

long rpg_run_row_count(const rpg_run* run) {
  return run == nullptr ? 0 : static_cast<long>(run->record.rows.size());
}

rpg_status rpg_run_row(const rpg_run* run, long index, double* out10) {
  return guarded([&] {
    if (run == nullptr || out10 == nullptr) {
      throw rpg::ConfigError("null argument to rpg_run_row");
    }
    if (index < 0 || index >= rpg_run_row_count(run)) {
      throw rpg::ConfigError("row index out of range");
    }
    const rpg::RunRow& r = run->record.rows[static_cast<size_t>(index)];
    out10[0] = static_cast<double>(r.step);
    out10[1] = static_cast<double>(r.env_steps);
    out10[2] = r.return_mean;
    out10[3] = r.return_std;
    out10[4] = r.coverage;
    out10[5] = r.reward_term;
    out10[6] = r.prior_term;
    out10[7] = r.cross_entropy_term;
    out10[8] = r.entropy_term;
    out10[9] = r.grad_norm;
    return RPG_OK;
  });
}

rpg_status rpg_run_write_csv(const rpg_run* run, const char* path) {
  return guarded([&] {
    if (run == nullptr || path == nullptr) {
      throw rpg::ConfigError("null argument to rpg_run_write_csv");
    }
    rpg::write_text_file(path, rpg::run_record_csv(run->record));
    return RPG_OK;
  });
}

double rpg_run_final_return(const rpg_run* run) {
  return run == nullptr ? 0.0 : run->final_return;
}

double rpg_run_final_coverage(const rpg_run* run) {
  return run == nullptr ? 0.0 : run->final_coverage;
}

void rpg_run_free(rpg_run* run) { delete run; }

rpg_status rpg_gradcheck(const char* module, int trials, unsigned long seed,
                         const char* csv_path, int* failures) {
  return guarded([&] {
    if (module == nullptr) throw rpg::ConfigError("null gradcheck module");
    auto rows = rpg::run_gradcheck(module, trials, seed);
    if (csv_path != nullptr) {
      rpg::write_text_file(csv_path, rpg::gradcheck_csv(rows));
    }
    if (failures != nullptr) {
      int bad = 0;
      for (const auto& r : rows) {
        if (!r.pass) ++bad;
      }
      *failures = bad;
    }
    return RPG_OK;
  });
}

rpg_status rpg_bias_demo(const char* env_id, long samples, unsigned long seed,
                         const char* csv_path) {
  return guarded([&] {
    if (env_id == nullptr) throw rpg::ConfigError("null env id");
    auto env = rpg::make_env(env_id);
    if (env->spec().horizon != 1 || env->spec().action_dim != 1) {
      throw rpg::ConfigError("bias demo needs a one-step 1-D action env; '" +
                             std::string(env_id) + "' is not one");
    }
    if (samples < 1) throw rpg::ConfigError("samples must be >= 1");
    rpg::BanditPolicySpec policy = default_bias_policy(*env);
    rpg::BiasReport report = rpg::bias_report(*env, policy, samples, seed);
    if (csv_path != nullptr) {
      rpg::write_text_file(csv_path, rpg::bias_report_csv(report));
    }
    return RPG_OK;
  });
}

rpg_status rpg_coverage(const char* policy, long env_steps, unsigned long seed,
                        const char* csv_path, int* rooms) {
  return guarded([&] {
    if (policy == nullptr) throw rpg::ConfigError("null coverage policy");
    const std::string kind(policy);
    if (kind != "rpg" && kind != "baseline") {
      throw rpg::ConfigError("coverage policy must be 'rpg' or 'baseline'");
    }
    rpg::TrainConfig cfg = rpg::default_maze_config(kind == "rpg");
    cfg.seed = seed;
    if (env_steps > 0) cfg.total_env_steps = env_steps;

    std::vector<rpg::CoverageRow> rows;
    rows.push_back({0, 1});  // start room only
    int final_rooms = 1;
    if (env_steps != 0) {
      rpg::TrainOutputs res = rpg::train_model_based(cfg);
      for (const rpg::RunRow& r : res.record.rows) {
        rows.push_back({r.env_steps, static_cast<int>(r.coverage)});
      }
      if (!res.record.rows.empty()) {
        final_rooms = static_cast<int>(res.record.rows.back().coverage);
      }
    }
    if (csv_path != nullptr) {
      rpg::write_text_file(csv_path, rpg::coverage_csv(rows));
    }
    if (rooms != nullptr) *rooms = final_rooms;
    return RPG_OK;
  });
}

}  // extern "C"
