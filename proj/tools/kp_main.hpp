#pragma once
// Shared plumbing of the terminal KPs: common flags, join, a stdin command
// loop, and serialized stdout.

#include "sedvice/chat.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <memory>
#include <mutex>

namespace kpmain {

struct Common {
    std::string endpoint = "tcp:127.0.0.1:7001";
    std::string space = "chat";
    std::string kp_id;
    std::vector<std::string> credentials;
    bool ready = false;
    int timeout_ms = 10000;

    void add_to(CLI::App& app) {
        app.add_option("--endpoint", endpoint, "SIB listener, tcp:<host>:<port>");
        app.add_option("--space", space, "Space name");
        app.add_option("--kp-id", kp_id, "KP identifier")->required();
        app.add_option("--credentials", credentials, "Credentials sent with JOIN");
        app.add_option("--timeout", timeout_ms, "Request timeout in ms");
        app.add_flag("--ready", ready, "Print 'ready' once joined");
    }
};

inline std::mutex& out_mu() {
    static std::mutex m;
    return m;
}

inline void print(const std::string& line) {
    std::lock_guard lk(out_mu());
    std::cout << line << std::endl;
}

// Joins, lets setup build the role, then feeds it stdin lines until EOF.
// setup returns the per-line command handler.
template <typename Setup>
int run(const Common& c, Setup setup) {
    using namespace sedvice;
    auto node = std::make_unique<kp::Node>(c.kp_id, std::chrono::milliseconds(c.timeout_ms));
    node->on_remove([](const kp::SpaceHandle& h, const std::string& reason) {
        print("removed from " + h.space + ": " + reason);
    });
    std::optional<kp::SpaceHandle> handle;
    try {
        handle = node->join(net::Endpoint::parse(c.endpoint), c.space, c.credentials);
    } catch (const std::exception& e) {
        std::cerr << c.kp_id << ": join failed: " << e.what() << "\n";
        return 1;
    }
    int rc = 0;
    {
        std::function<void(const std::string&)> on_line;
        std::shared_ptr<void> role;
        try {
            std::tie(role, on_line) = setup(*node);
        } catch (const std::exception& e) {
            std::cerr << c.kp_id << ": " << e.what() << "\n";
            return 1;
        }
        if (c.ready)
            print("ready");
        for (std::string line; std::getline(std::cin, line);) {
            if (!on_line)
                continue;
            try {
                on_line(line);
            } catch (const std::exception& e) {
                print(std::string("error: ") + e.what());
            }
        }
    }
    try {
        if (!node->spaces().empty())
            node->leave(*handle);
    } catch (const std::exception& e) {
        std::cerr << c.kp_id << ": leave failed: " << e.what() << "\n";
        rc = 1;
    }
    return rc;
}

} // namespace kpmain
