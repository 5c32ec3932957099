// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. RunCli is the whole program minus process setup so
// tests and the Python module can drive it in-process.
//
// Exit codes: 0 success, 1 domain or validation error, 2 usage error.

#ifndef CTXBIAS_CLI_H_
#define CTXBIAS_CLI_H_

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ctxbias {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

inline constexpr std::string_view kManifestFormat = "ctxbias-manifest/1";

std::string_view ToolkitVersion();

// `args` excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string Sha256Hex(std::string_view bytes);

}  // namespace ctxbias

#endif  // CTXBIAS_CLI_H_
