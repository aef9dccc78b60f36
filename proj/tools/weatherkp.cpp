// Weather KPs: the linker that ties reports to chat messages, and a feed
// publishing scripted reports.
#include "kp_main.hpp"

using namespace sedvice;

int main(int argc, char** argv) {
    CLI::App app{"weather KP"};
    kpmain::Common common;
    common.add_to(app);
    app.require_subcommand(1);
    bool verbose = false;
    auto* linker = app.add_subcommand("linker", "Links weather reports into conversations mentioning their place");
    linker->add_flag("--verbose", verbose, "Print each link");
    app.add_subcommand("feed", "Commands: report <id> <place> | <text>, retract <id>");
    CLI11_PARSE(app, argc, argv);

    using Handler = std::function<void(const std::string&)>;
    return kpmain::run(common, [&](kp::Node& node) -> std::pair<std::shared_ptr<void>, Handler> {
        if (*linker)
            return {std::make_shared<chat::WeatherLinker>(node, verbose ? chat::Output(kpmain::print) : nullptr),
                    nullptr};
        auto f = std::make_shared<chat::WeatherFeed>(node, kpmain::print);
        return {f, [f](const std::string& line) { f->command(line); }};
    });
}
