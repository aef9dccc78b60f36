// Runs a chat scenario script and prints or checks its transcript.
#include "sedvice/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace sedvice::chat;

int main(int argc, char** argv) {
    CLI::App app{"chat scenario runner"};
    std::string script_file, golden, write_golden, bin_dir;
    app.add_option("script", script_file, "Scenario script")->required();
    app.add_option("--golden", golden, "Transcript to compare against");
    app.add_option("--write-golden", write_golden, "Store the transcript here");
    app.add_option("--bin-dir", bin_dir, "Directory holding the KP programs (default: next to this one)");
    CLI11_PARSE(app, argc, argv);

    ScenarioOptions opts;
    opts.bin_dir = bin_dir.empty() ? std::filesystem::canonical("/proc/self/exe").parent_path()
                                   : std::filesystem::path(bin_dir);
    ScenarioResult res;
    try {
        res = run_scenario(load_script(script_file), opts);
    } catch (const std::exception& e) {
        std::cerr << "chat-scenario: " << e.what() << "\n";
        return 2;
    }
    for (const auto& l : res.transcript)
        std::cout << l << "\n";
    std::cerr << "wall " << res.wall.count() << " ms\n";
    if (!write_golden.empty()) {
        std::ofstream out(write_golden);
        for (const auto& l : res.transcript)
            out << l << "\n";
    }
    if (!golden.empty()) {
        std::ifstream in(golden);
        if (!in) {
            std::cerr << "chat-scenario: cannot read " << golden << "\n";
            return 2;
        }
        std::vector<std::string> expected;
        for (std::string l; std::getline(in, l);)
            expected.push_back(l);
        auto diff = compare_transcripts(expected, res.transcript);
        if (!diff.empty()) {
            std::cerr << "transcript differs from " << golden << ": " << diff << "\n";
            return 1;
        }
    }
    return 0;
}
