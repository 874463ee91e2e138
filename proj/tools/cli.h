#ifndef GAITFORGE_TOOLS_CLI_H_
#define GAITFORGE_TOOLS_CLI_H_

#include <optional>
#include <ostream>
#include <string>

#include "gaitforge/config.h"

namespace gaitforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Parses argv (argv[0] is the program name), runs the subcommand and maps
// errors to exit codes.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Loads a run configuration from a config file or a run manifest (its
// `config` section). An empty path yields the built-in defaults.
RunConfig LoadConfigOrManifest(const std::string& path,
                               const std::optional<ActuationMode>& mode);

// Joint torques (7 joints) produced by the given muscle forces at pose q.
Vec7 ReconstructJointTorques(const ModelSpec& spec, const Vec9& q,
                             const Eigen::VectorXd& forces);

}  // namespace gaitforge::cli

#endif  // GAITFORGE_TOOLS_CLI_H_
