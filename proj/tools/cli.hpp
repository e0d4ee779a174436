// Copyright 2026 The accboed Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCBOED_TOOLS_CLI_HPP
#define ACCBOED_TOOLS_CLI_HPP

#include "accboed/engine.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace accboed::cli
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

class ConfigError : public std::runtime_error
{
public:
   using std::runtime_error::runtime_error;
};

struct RunConfig
{
   std::string problem;
   Method method = Method::AccBoed;
   std::uint64_t seed = 0;
   std::filesystem::path output_dir = "accboed_out";
   AccBoedConfig engine;
};

// INI file with sections [run], [engine], [mcmc], [kmn]. Unknown sections or
// keys and unparsable values throw ConfigError. The problem name is not
// checked here.
RunConfig load_config(const std::filesystem::path &path);
RunConfig parse_config(std::istream &in);

int cmd_run(const std::filesystem::path &config, std::ostream &log);
int cmd_compare(const std::vector<std::filesystem::path> &configs,
                const std::filesystem::path &report, std::ostream &log);
int cmd_bench_timing(const std::filesystem::path &config, std::ostream &log);
int cmd_list_problems(std::ostream &out);

// Full command-line entry point; returns the process exit code.
int main_entry(int argc, char **argv);

}  // namespace accboed::cli

#endif  // ACCBOED_TOOLS_CLI_HPP
