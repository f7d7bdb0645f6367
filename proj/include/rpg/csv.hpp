#pragma once

#include <string>
#include <vector>

#include "rpg/estimators.hpp"
#include "rpg/gradcheck.hpp"
#include "rpg/trainer.hpp"

namespace rpg {

// All CSV output is UTF-8 with LF line endings and '.' decimals, and
// formats doubles with %.17g so reruns are byte-identical.

// Columns: step, env_steps, return_mean, return_std, coverage,
// reward_term, prior_term, cross_entropy_term, entropy_term, grad_norm.
std::string run_record_csv(const RunRecord& record);

std::string bias_report_csv(const BiasReport& report);

std::string gradcheck_csv(const std::vector<GradCheckRow>& rows);

struct CoverageRow {
  long env_steps = 0;
  int rooms = 0;
};
std::string coverage_csv(const std::vector<CoverageRow>& rows);

void write_text_file(const std::string& path, const std::string& content);
std::string format_double(double v);

}  // namespace rpg
