#pragma once

#include "psplat/run_config.hpp"

#include <iosfwd>

namespace psplat {

/// Subcommand entry points shared by the CLI and the tests. Each writes its
/// artifacts under cfg.run.out, echoes the effective config there, and
/// returns a process exit code.

int cmd_synth(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out);
int cmd_optimize(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out);
int cmd_render(const RunConfig& cfg, const ConfigRegistry& reg, std::ostream& out);
int cmd_convert_depth(const std::string& input_png, const std::string& output_f32, double scale,
                      std::ostream& out);

}  // namespace psplat
