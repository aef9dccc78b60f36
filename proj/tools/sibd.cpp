// Runs the SIBs of a configuration file until interrupted.
#include "sedvice/log.hpp"
#include "sedvice/sib.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

using namespace sedvice;

int main(int argc, char** argv) {
    CLI::App app{"Semantic Information Broker"};
    std::string config_file;
    std::string space = "chat", sib_id = "A";
    std::vector<std::string> listeners;
    app.add_option("--config", config_file, "Configuration file");
    app.add_option("--space", space, "Space name when no config file is given");
    app.add_option("--sib", sib_id, "SIB id when no config file is given");
    app.add_option("--listen", listeners, "tcp:<host>:<port>, repeatable, when no config file is given");
    CLI11_PARSE(app, argc, argv);

    std::vector<SibConfig> configs;
    try {
        if (!config_file.empty()) {
            configs = load_config(config_file);
        } else {
            std::string text = "space = " + space + "\nsib = " + sib_id + "\n";
            for (const auto& l : listeners)
                text += "listener = " + l + "\n";
            configs = parse_config(text);
        }
    } catch (const config_error& e) {
        std::cerr << "sibd: " << e.what() << "\n";
        return 2;
    }

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    std::vector<std::unique_ptr<Sib>> sibs;
    try {
        sibs = boot_sibs(configs);
    } catch (const std::exception& e) {
        std::cerr << "sibd: " << e.what() << "\n";
        return 1;
    }
    for (const auto& s : sibs)
        for (const auto& ep : s->endpoints())
            std::cout << s->id() << " serving " << s->space_name() << " on " << ep.str() << std::endl;

    int sig = 0;
    sigwait(&set, &sig);
    for (auto& s : sibs)
        s->stop();
    return 0;
}
