#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "evtes/config.hpp"

namespace evtes {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitCompute = 2, kExitInconsistent = 3 };

/// Writes modes_summary.csv (pol,re_neff,im_neff,alpha_cm), field_<pol>.csv
/// and, with the detector enabled, segment.csv.
int cmd_modes(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out);
int cmd_sweep_thickness(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out);
int cmd_sweep_aspect(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out);
int cmd_optimize(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, const std::vector<Polarization>& pols, std::ostream& out);
/// `measurement_file` overrides the configured one when non-empty.
int cmd_calibrate(const RunConfig& cfg, const std::string& measurement_file, std::ostream& out);

/// Full command line: parses flags, loads the config, dispatches, and maps
/// exceptions to exit codes (1 config, 2 compute, 3 inconsistent measurement).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evtes
