#include <ostream>

#include "cael/harness.hpp"
#include "cael/oracle.hpp"

namespace cael::harness {

bool run_verify(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  const oracle::VerifyReport report =
      oracle::run_verification(cfg.verify_instances, cfg.seed);
  out << report.to_string();
  out << (report.all_pass() ? "verification passed" : "verification FAILED")
      << " (" << report.instances << " random instances)\n";
  return report.all_pass();
}

}  // namespace cael::harness
