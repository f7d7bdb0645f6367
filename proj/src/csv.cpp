#include "rpg/csv.hpp"

#include <cstdio>
#include <fstream>

namespace rpg {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string run_record_csv(const RunRecord& record) {
  std::string out =
      "step,env_steps,return_mean,return_std,coverage,reward_term,"
      "prior_term,cross_entropy_term,entropy_term,grad_norm\n";
  for (const RunRow& r : record.rows) {
    out += std::to_string(r.step) + "," + std::to_string(r.env_steps) + "," +
           format_double(r.return_mean) + "," + format_double(r.return_std) +
           "," + format_double(r.coverage) + "," +
           format_double(r.reward_term) + "," + format_double(r.prior_term) +
           "," + format_double(r.cross_entropy_term) + "," +
           format_double(r.entropy_term) + "," + format_double(r.grad_norm) +
           "\n";
  }
  return out;
}

std::string bias_report_csv(const BiasReport& report) {
  std::string out = "param,estimator,mean,std_error,oracle,boundary,z_score,samples\n";
  for (const BiasRow& r : report.rows) {
    out += r.param + "," + r.estimator + "," + format_double(r.mean) + "," +
           format_double(r.std_error) + "," + format_double(r.oracle) + "," +
           format_double(r.boundary) + "," + format_double(r.z_score) + "," +
           std::to_string(r.samples) + "\n";
  }
  return out;
}

std::string gradcheck_csv(const std::vector<GradCheckRow>& rows) {
  std::string out = "test_id,analytic,numeric,rel_err,pass\n";
  for (const GradCheckRow& r : rows) {
    out += r.id + "," + format_double(r.analytic) + "," +
           format_double(r.numeric) + "," + format_double(r.rel_err) + "," +
           (r.pass ? "1" : "0") + "\n";
  }
  return out;
}

std::string coverage_csv(const std::vector<CoverageRow>& rows) {
  std::string out = "env_steps,rooms_covered\n";
  for (const CoverageRow& r : rows) {
    out += std::to_string(r.env_steps) + "," + std::to_string(r.rooms) + "\n";
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing file: " + path);
}

}  // namespace rpg
