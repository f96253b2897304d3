#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace vml {

struct CliOverrides {
  std::optional<std::string> out_dir;   // --out; else config, $VML_LAB_OUT, "."
  std::optional<std::uint64_t> seed;    // --seed
  int workers = 4;                      // --workers, bounds the densities pool
};

// exit codes: 0 success, 1 invalid config, 2 solver divergence, 3 check failure

int cmd_solve(const std::string& config_path, const CliOverrides& overrides,
              std::ostream& log);

int cmd_check(const std::string& suite, const CliOverrides& overrides,
              std::ostream& log);

int cmd_densities(const std::string& config_path, const CliOverrides& overrides,
                  std::ostream& log);

int cmd_schedule(const std::string& config_path, std::ostream& out);

}  // namespace vml
