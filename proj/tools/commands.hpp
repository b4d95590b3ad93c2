#pragma once

#include <iosfwd>

#include "run_config.hpp"

namespace ladderlab::cli {

/// Human-readable summaries go to `out`, diagnostics (cache activity,
/// warnings) to `log`. Primary artifacts are written under config.out_dir.
/// Every command returns 0 or throws ladderlab::Error.
int cmd_spectrum(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_count(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_upsilon(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_volume(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_flow(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_periods(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_admissible(const RunConfig& config, std::ostream& out, std::ostream& log);
int cmd_verify_weyl(const RunConfig& config, std::ostream& out, std::ostream& log);

} // namespace ladderlab::cli
