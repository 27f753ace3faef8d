#pragma once

#include <string>
#include <vector>

namespace resetfree {

// Command-line entry point, callable from tests.  Verbs:
//   run <config.json>       execute the grid, write CSVs and summaries
//   certify <config.json>   oracle-only checks (feasibility, saddle, equivalence)
//   scale <summary_dir>     fit log-log slopes over per-cell summaries
// Exit codes: 0 success, 1 verification failure, 2 config or usage error.
// RESETFREE_OUTPUT_DIR overrides the configured output directory; the
// --output-dir flag overrides both.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, const char* const* argv);

} // namespace resetfree
