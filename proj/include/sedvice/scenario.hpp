#pragma once
// Scripted end-to-end runs: SIBs in this process, every KP a child process.
//
// Script lines:
//   # comment
//   CONFIG <file>                      SIB configuration, relative to the script
//   KP <name>[@<sib>] <program> <args...>
//   AT <ms> <name> <command...>        one line on that KP's stdin
//
// KPs start in declaration order, each given --endpoint, --space, --kp-id
// and --ready ahead of its own arguments. After every action the run waits
// until the SIBs and the KPs' output have been quiet for a while, so the
// transcript depends only on the script.

#include <chrono>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedvice::chat {

class scenario_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Script {
    struct Kp {
        std::string name;
        std::string sib; // empty: the first SIB
        std::string program;
        std::vector<std::string> args;
    };
    struct Action {
        std::int64_t at_ms = 0;
        std::string kp;
        std::string command;
    };
    std::string config_text;
    std::vector<Kp> kps;
    std::vector<Action> actions;
};

// Throws scenario_error with a line number.
Script parse_script(const std::string& text, const std::filesystem::path& base_dir = ".");
Script load_script(const std::filesystem::path& file);

struct ScenarioOptions {
    std::filesystem::path bin_dir;
    std::chrono::milliseconds quiet{150};
    std::chrono::milliseconds step_limit{10000};
};

struct ScenarioResult {
    std::vector<std::string> transcript;
    // Output lines per KP, in arrival order.
    std::map<std::string, std::vector<std::string>> outputs;
    std::map<std::string, int> exit_codes;
    std::chrono::milliseconds wall{0};
};

ScenarioResult run_scenario(const Script& script, const ScenarioOptions& opts);

// Empty when equal, else a description of the first difference.
std::string compare_transcripts(const std::vector<std::string>& expected, const std::vector<std::string>& actual);

} // namespace sedvice::chat
