#pragma once

#include "persona/config.hpp"

#include <string>
#include <vector>

namespace persona::cli {

/// Parse flags, dispatch to a command, map exceptions to exit codes:
/// 0 success, 2 input/config/data error, 3 runtime/numeric error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args); // args without the program name

// Command bodies. They throw on failure; `run` does the exit-code mapping.
// Exposed so tests can drive them in-process with a prepared RunConfig.
void cmd_ingest(const cfg::RunConfig& config);
void cmd_augment(const cfg::RunConfig& config, aug::ChatClient* client_override = nullptr);
void cmd_train(const cfg::RunConfig& config);
void cmd_eval(const cfg::RunConfig& config);
void cmd_predict(const cfg::RunConfig& config);
void cmd_llm_baseline(const cfg::RunConfig& config, aug::ChatClient* client_override = nullptr);
void cmd_sweep_lambda(const cfg::RunConfig& config);

} // namespace persona::cli
