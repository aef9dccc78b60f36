// Terminal chat KP: sender, viewer, conversation list or membership.
#include "kp_main.hpp"

using namespace sedvice;

int main(int argc, char** argv) {
    CLI::App app{"chat KP"};
    kpmain::Common common;
    common.add_to(app);
    app.require_subcommand(1);

    std::string user, conversation;
    auto* sender = app.add_subcommand("sender", "Each stdin line becomes a message; '/reply <uri> text' replies");
    sender->add_option("--user", user)->required();
    sender->add_option("--conversation", conversation)->required();
    auto* viewer = app.add_subcommand("viewer", "Prints the messages of one conversation");
    viewer->add_option("--conversation", conversation)->required();
    auto* list = app.add_subcommand("conversations", "Prints conversations as they appear and disappear");
    auto* members = app.add_subcommand("membership", "Commands: new <name>, enter <conv>, exit <conv>");
    members->add_option("--user", user)->required();
    CLI11_PARSE(app, argc, argv);

    using Handler = std::function<void(const std::string&)>;
    return kpmain::run(common, [&](kp::Node& node) -> std::pair<std::shared_ptr<void>, Handler> {
        if (*sender) {
            auto s = std::make_shared<chat::Sender>(node, user, chat::conversation_uri(conversation));
            return {s, [s](const std::string& line) {
                        std::optional<Term> reply;
                        std::string text = line;
                        if (line.rfind("/reply ", 0) == 0) {
                            auto sp = line.find(' ', 7);
                            reply = Term::uri(line.substr(7, sp == std::string::npos ? std::string::npos : sp - 7));
                            text = sp == std::string::npos ? "" : line.substr(sp + 1);
                        }
                        if (auto m = s->send(text, reply))
                            kpmain::print("sent " + m->value());
                    }};
        }
        if (*viewer)
            return {std::make_shared<chat::Viewer>(node, chat::conversation_uri(conversation), kpmain::print), nullptr};
        if (*list)
            return {std::make_shared<chat::ConversationList>(node, kpmain::print), nullptr};
        auto m = std::make_shared<chat::Membership>(node, user, kpmain::print);
        return {m, [m](const std::string& line) { m->command(line); }};
    });
}
