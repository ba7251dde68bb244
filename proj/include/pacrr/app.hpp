#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "pacrr/config_file.hpp"
#include "pacrr/training.hpp"

namespace pacrr {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitData = 2, kExitCheckFailed = 3 };

/// query_id -> "train", "validation" or "test", one "query_id role" per line.
std::map<std::string, std::string> load_split(const std::filesystem::path& path);

struct CommandOptions {
    RunConfig config;
    /// Model for rerank, score and pairacc; defaults to <output_dir>/best.pacrr.
    std::filesystem::path checkpoint;
    /// Run evaluated by `eval`; defaults to the config's run.
    std::filesystem::path run;
    /// Restricts rerank, score and pairacc to one split role, or "all".
    std::string query_set = "all";
};

/// Each command checks every input before writing anything under output_dir.
/// Config and path problems throw ConfigError, malformed data DataError.
int cmd_synth(const CommandOptions& options, std::ostream& out);
int cmd_train(const CommandOptions& options, std::ostream& out);
int cmd_rerank(const CommandOptions& options, std::ostream& out);
int cmd_score(const CommandOptions& options, std::ostream& out);
int cmd_eval(const CommandOptions& options, std::ostream& out);
int cmd_pairacc(const CommandOptions& options, std::ostream& out);
int cmd_gradcheck(const CommandOptions& options, std::ostream& out);

}  // namespace pacrr
