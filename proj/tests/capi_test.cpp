// Exercises the shared-library surface end to end: opaque handles,
// error codes, and the CSV artifacts the CLI relies on.
#include "rpg.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("config handles: defaults, set, dump, parse round-trip") {
  rpg_config* cfg = nullptr;
  REQUIRE(rpg_config_default(&cfg) == RPG_OK);
  CHECK(rpg_config_set(cfg, "run", "env", "bandit_a") == RPG_OK);
  CHECK(rpg_config_set(cfg, "run", "seed", "99") == RPG_OK);
  CHECK(rpg_config_set(cfg, "run", "nope", "1") == RPG_ERR_CONFIG);
  CHECK(std::string(rpg_last_error()).find("nope") != std::string::npos);

  char* text = rpg_config_dump(cfg);
  REQUIRE(text != nullptr);
  rpg_config* reparsed = nullptr;
  REQUIRE(rpg_config_parse(text, &reparsed) == RPG_OK);
  char* text2 = rpg_config_dump(reparsed);
  CHECK(std::string(text) == std::string(text2));
  rpg_string_free(text);
  rpg_string_free(text2);
  rpg_config_free(reparsed);
  rpg_config_free(cfg);
}

TEST_CASE("bad config text maps to RPG_ERR_CONFIG") {
  rpg_config* cfg = nullptr;
  CHECK(rpg_config_parse("[run]\nbogus = 1\n", &cfg) == RPG_ERR_CONFIG);
  CHECK(std::string(rpg_last_error()).find("line 2") != std::string::npos);
  CHECK(rpg_config_load("/nonexistent/path.cfg", &cfg) == RPG_ERR_CONFIG);
}

TEST_CASE("train through the C API writes run.csv and a checkpoint") {
  rpg_config* cfg = nullptr;
  REQUIRE(rpg_config_default(&cfg) == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "run", "env", "bandit_b") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "run", "estimator", "hybrid") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "run", "total_env_steps", "2048") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "run", "eval_every_steps", "1024") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "run", "eval_episodes", "4") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "optim", "batch", "16") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "policy", "hidden", "8") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "latent", "categories", "2") == RPG_OK);
  REQUIRE(rpg_config_set(cfg, "run", "seed", "11") == RPG_OK);

  const std::string dir = tmp_path("rpg_capi_run");
  std::filesystem::remove_all(dir);
  rpg_run* run = nullptr;
  REQUIRE(rpg_train(cfg, dir.c_str(), &run) == RPG_OK);
  REQUIRE(run != nullptr);
  CHECK(rpg_run_row_count(run) >= 1);

  double row[10];
  REQUIRE(rpg_run_row(run, 0, row) == RPG_OK);
  CHECK(row[1] >= 1.0);  // env steps
  CHECK(rpg_run_row(run, 9999, row) == RPG_ERR_CONFIG);

  const std::string csv = slurp(dir + "/run.csv");
  CHECK(csv.rfind("step,env_steps,return_mean,return_std,coverage,", 0) == 0);
  CHECK(std::filesystem::exists(dir + "/checkpoint.bin"));
  CHECK(std::filesystem::exists(dir + "/checkpoint.manifest"));

  // Same config + seed reruns byte-identically.
  const std::string dir2 = tmp_path("rpg_capi_run2");
  std::filesystem::remove_all(dir2);
  rpg_run* run2 = nullptr;
  REQUIRE(rpg_train(cfg, dir2.c_str(), &run2) == RPG_OK);
  CHECK(slurp(dir2 + "/run.csv") == csv);

  rpg_run_free(run);
  rpg_run_free(run2);
  rpg_config_free(cfg);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("gradcheck through the C API") {
  const std::string csv = tmp_path("rpg_capi_gc.csv");
  int failures = -1;
  REQUIRE(rpg_gradcheck("graph", 1, 0, csv.c_str(), &failures) == RPG_OK);
  CHECK(failures == 0);
  CHECK(slurp(csv).rfind("test_id,analytic,numeric,rel_err,pass", 0) == 0);

  REQUIRE(rpg_gradcheck("selftest", 1, 0, nullptr, &failures) == RPG_OK);
  CHECK(failures == 1);

  CHECK(rpg_gradcheck("not_a_module", 1, 0, nullptr, &failures) ==
        RPG_ERR_CONFIG);
  std::filesystem::remove(csv);
}

TEST_CASE("bias demo through the C API") {
  const std::string csv = tmp_path("rpg_capi_bias.csv");
  REQUIRE(rpg_bias_demo("step_bandit", 2000, 1, csv.c_str()) == RPG_OK);
  const std::string text = slurp(csv);
  CHECK(text.rfind("param,estimator,mean,std_error,oracle,boundary,z_score",
                   0) == 0);
  CHECK(text.find("pathwise") != std::string::npos);

  CHECK(rpg_bias_demo("maze", 100, 1, nullptr) == RPG_ERR_CONFIG);
  CHECK(rpg_bias_demo("bandit_a", 0, 1, nullptr) == RPG_ERR_CONFIG);
  std::filesystem::remove(csv);
}

TEST_CASE("coverage with a zero budget reports the start room") {
  const std::string csv = tmp_path("rpg_capi_cov.csv");
  int rooms = -1;
  REQUIRE(rpg_coverage("rpg", 0, 1, csv.c_str(), &rooms) == RPG_OK);
  CHECK(rooms == 1);
  CHECK(slurp(csv) == "env_steps,rooms_covered\n0,1\n");
  CHECK(rpg_coverage("both", 0, 1, nullptr, &rooms) == RPG_ERR_CONFIG);
  std::filesystem::remove(csv);
}
