#include "sedvice/scenario.hpp"

#include "sedvice/log.hpp"
#include "sedvice/sib.hpp"

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace sedvice::chat {

namespace {

constexpr const char* kDefaultConfig = "space = chat\nsib = A\nlistener = tcp:127.0.0.1:0\n"
                                       "namespace = chat http://sedspace.example/chat#\n";

std::vector<std::string> split_words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

// A KP child process with piped stdin and stdout.
class Child {
public:
    Child(std::string name, const std::filesystem::path& program, const std::vector<std::string>& args)
        : name_(std::move(name)) {
        int in[2], out[2];
        if (pipe2(in, O_CLOEXEC) != 0 || pipe2(out, O_CLOEXEC) != 0)
            throw scenario_error("pipe failed");
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_adddup2(&fa, in[0], 0);
        posix_spawn_file_actions_adddup2(&fa, out[1], 1);
        std::vector<std::string> argv_s{program.string()};
        argv_s.insert(argv_s.end(), args.begin(), args.end());
        std::vector<char*> argv;
        for (auto& a : argv_s)
            argv.push_back(a.data());
        argv.push_back(nullptr);
        int rc = posix_spawn(&pid_, program.c_str(), &fa, nullptr, argv.data(), environ);
        posix_spawn_file_actions_destroy(&fa);
        ::close(in[0]);
        ::close(out[1]);
        if (rc != 0) {
            ::close(in[1]);
            ::close(out[0]);
            throw scenario_error("cannot start " + program.string() + ": " + std::strerror(rc));
        }
        stdin_ = in[1];
        stdout_ = out[0];
        reader_ = std::thread([this] { read_loop(); });
    }

    ~Child() {
        finish(std::chrono::seconds(5));
        if (reader_.joinable())
            reader_.join();
        if (stdout_ >= 0)
            ::close(stdout_);
    }

    const std::string& name() const { return name_; }

    void send(const std::string& line) {
        std::string data = line + "\n";
        const char* p = data.data();
        std::size_t left = data.size();
        while (left > 0) {
            ssize_t n = ::write(stdin_, p, left);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw scenario_error(name_ + ": stdin closed");
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
    }

    bool wait_ready(std::chrono::milliseconds limit) {
        std::unique_lock lk(mu_);
        return cv_.wait_for(lk, limit, [&] { return ready_ || eof_; }) && ready_;
    }

    std::size_t line_count() {
        std::lock_guard lk(mu_);
        return lines_.size();
    }

    std::vector<std::string> lines_from(std::size_t from) {
        std::lock_guard lk(mu_);
        return {lines_.begin() + static_cast<std::ptrdiff_t>(std::min(from, lines_.size())), lines_.end()};
    }

    std::vector<std::string> lines() {
        std::lock_guard lk(mu_);
        return lines_;
    }

    // Closes stdin and waits for exit, killing after the limit.
    int finish(std::chrono::milliseconds limit) {
        if (stdin_ >= 0) {
            ::close(stdin_);
            stdin_ = -1;
        }
        if (pid_ <= 0)
            return status_;
        auto end = std::chrono::steady_clock::now() + limit;
        int st = 0;
        for (;;) {
            pid_t r = waitpid(pid_, &st, WNOHANG);
            if (r == pid_)
                break;
            if (std::chrono::steady_clock::now() > end) {
                kill(pid_, SIGKILL);
                waitpid(pid_, &st, 0);
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        pid_ = -1;
        status_ = WIFEXITED(st) ? WEXITSTATUS(st) : 128 + (WIFSIGNALED(st) ? WTERMSIG(st) : 0);
        return status_;
    }

private:
    void read_loop() {
        std::string buf;
        char chunk[4096];
        for (;;) {
            ssize_t n = ::read(stdout_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0)
                break;
            buf.append(chunk, static_cast<std::size_t>(n));
            for (auto nl = buf.find('\n'); nl != std::string::npos; nl = buf.find('\n')) {
                std::string line = buf.substr(0, nl);
                buf.erase(0, nl + 1);
                std::lock_guard lk(mu_);
                if (!ready_ && line == "ready")
                    ready_ = true;
                else
                    lines_.push_back(std::move(line));
                cv_.notify_all();
            }
        }
        std::lock_guard lk(mu_);
        if (!buf.empty())
            lines_.push_back(buf);
        eof_ = true;
        cv_.notify_all();
    }

    std::string name_;
    pid_t pid_ = -1;
    int status_ = -1;
    int stdin_ = -1;
    int stdout_ = -1;
    std::thread reader_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::vector<std::string> lines_;
    bool ready_ = false;
    bool eof_ = false;
};

std::string notify_line(const std::string& kp, const wire::Envelope& e) {
    return "notify " + kp + " " + e.body["sub"].get<std::string>() + " v" + std::to_string(e.body["version"].get<std::uint64_t>()) +
           " +" + e.body["added"].dump() + " -" + e.body["removed"].dump();
}

} // namespace

Script parse_script(const std::string& text, const std::filesystem::path& base_dir) {
    Script s;
    std::istringstream in(text);
    std::size_t lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw scenario_error("script line " + std::to_string(lineno) + ": " + msg);
    };
    for (std::string line; std::getline(in, line);) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto w = split_words(line);
        if (w.empty() || w[0][0] == '#')
            continue;
        if (w[0] == "CONFIG") {
            if (w.size() != 2)
                fail("CONFIG <file>");
            std::ifstream f(base_dir / w[1]);
            if (!f)
                fail("cannot read " + (base_dir / w[1]).string());
            std::stringstream buf;
            buf << f.rdbuf();
            s.config_text = buf.str();
        } else if (w[0] == "KP") {
            if (w.size() < 3)
                fail("KP <name>[@<sib>] <program> <args...>");
            Script::Kp kp;
            kp.name = w[1];
            if (auto at = kp.name.find('@'); at != std::string::npos) {
                kp.sib = kp.name.substr(at + 1);
                kp.name.resize(at);
            }
            kp.program = w[2];
            kp.args.assign(w.begin() + 3, w.end());
            for (const auto& other : s.kps)
                if (other.name == kp.name)
                    fail("duplicate KP " + kp.name);
            s.kps.push_back(std::move(kp));
        } else if (w[0] == "AT") {
            if (w.size() < 3)
                fail("AT <ms> <kp> <command...>");
            Script::Action a;
            try {
                a.at_ms = std::stoll(w[1]);
            } catch (const std::exception&) {
                fail("bad time " + w[1]);
            }
            if (!s.actions.empty() && a.at_ms < s.actions.back().at_ms)
                fail("actions must be in time order");
            a.kp = w[2];
            // Keep the command's own spacing.
            auto pos = line.find(w[2], line.find(w[1]) + w[1].size()) + w[2].size();
            auto rest = line.find_first_not_of(' ', pos);
            a.command = rest == std::string::npos ? "" : line.substr(rest);
            bool known = false;
            for (const auto& kp : s.kps)
                known = known || kp.name == a.kp;
            if (!known)
                fail("unknown KP " + a.kp);
            s.actions.push_back(std::move(a));
        } else {
            fail("unknown directive " + w[0]);
        }
    }
    if (s.config_text.empty())
        s.config_text = kDefaultConfig;
    return s;
}

Script load_script(const std::filesystem::path& file) {
    std::ifstream f(file);
    if (!f)
        throw scenario_error("cannot read " + file.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_script(buf.str(), file.parent_path());
}

ScenarioResult run_scenario(const Script& script, const ScenarioOptions& opts) {
    const auto started = std::chrono::steady_clock::now();
    ::signal(SIGPIPE, SIG_IGN);
    ScenarioResult res;
    std::mutex tmu;
    std::vector<std::string> notifies;
    auto sibs = boot_sibs(parse_config(script.config_text));
    for (auto& s : sibs)
        s->set_notify_tap([&](const std::string& kp, const wire::Envelope& e) {
            std::lock_guard lk(tmu);
            notifies.push_back(notify_line(kp, e));
        });

    auto sib_for = [&](const std::string& id) -> Sib& {
        if (id.empty())
            return *sibs.front();
        for (auto& s : sibs)
            if (s->id() == id)
                return *s;
        throw scenario_error("no SIB " + id);
    };

    std::vector<std::unique_ptr<Child>> kids;
    std::map<std::string, Child*> by_name;
    std::vector<std::size_t> seen;

    auto activity = [&] {
        std::uint64_t n = 0;
        for (auto& s : sibs)
            n += s->activity();
        for (auto& k : kids)
            n += k->line_count();
        std::lock_guard lk(tmu);
        return n + notifies.size();
    };
    auto settle = [&] {
        auto limit = std::chrono::steady_clock::now() + opts.step_limit;
        auto last = activity();
        for (;;) {
            std::this_thread::sleep_for(opts.quiet);
            auto now = activity();
            if (now == last)
                return;
            if (std::chrono::steady_clock::now() > limit)
                throw scenario_error("no quiescence within " + std::to_string(opts.step_limit.count()) + " ms");
            last = now;
        }
    };
    std::size_t notify_seen = 0;
    auto collect = [&] {
        {
            std::lock_guard lk(tmu);
            for (; notify_seen < notifies.size(); ++notify_seen)
                res.transcript.push_back(notifies[notify_seen]);
        }
        for (std::size_t i = 0; i < kids.size(); ++i) {
            auto fresh = kids[i]->lines_from(seen[i]);
            seen[i] += fresh.size();
            for (auto& l : fresh)
                res.transcript.push_back(kids[i]->name() + "| " + l);
        }
    };

    for (const auto& kp : script.kps) {
        Sib& sib = sib_for(kp.sib);
        auto ep = sib.endpoints().front();
        std::vector<std::string> args{"--endpoint", ep.str(), "--space", sib.space_name(), "--kp-id", kp.name, "--ready"};
        args.insert(args.end(), kp.args.begin(), kp.args.end());
        kids.push_back(std::make_unique<Child>(kp.name, opts.bin_dir / kp.program, args));
        seen.push_back(0);
        by_name[kp.name] = kids.back().get();
        if (!kids.back()->wait_ready(opts.step_limit)) {
            auto out = kids.back()->lines();
            throw scenario_error(kp.name + " did not become ready" + (out.empty() ? "" : ": " + out.back()));
        }
    }
    settle();
    collect();

    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& a : script.actions) {
        std::this_thread::sleep_until(t0 + std::chrono::milliseconds(a.at_ms));
        res.transcript.push_back("@" + std::to_string(a.at_ms) + " " + a.kp + (a.command.empty() ? "" : " " + a.command));
        by_name.at(a.kp)->send(a.command);
        settle();
        collect();
    }

    for (auto& k : kids)
        res.exit_codes[k->name()] = k->finish(opts.step_limit);
    collect();
    for (auto& k : kids)
        res.outputs[k->name()] = k->lines();
    kids.clear();
    for (auto& s : sibs)
        s->stop();
    res.wall = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    return res;
}

std::string compare_transcripts(const std::vector<std::string>& expected, const std::vector<std::string>& actual) {
    std::size_t n = std::min(expected.size(), actual.size());
    for (std::size_t i = 0; i < n; ++i)
        if (expected[i] != actual[i])
            return "line " + std::to_string(i + 1) + ": expected\n  " + expected[i] + "\ngot\n  " + actual[i];
    if (expected.size() != actual.size())
        return "expected " + std::to_string(expected.size()) + " lines, got " + std::to_string(actual.size()) +
               (actual.size() > n ? "; first extra: " + actual[n] : "; first missing: " + expected[n]);
    return {};
}

} // namespace sedvice::chat
