#include "crashfix/subprocess.hpp"

#include <cerrno>
#include <cstring>

extern "C" {
#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>
}

extern char** environ;

namespace crashfix {

    namespace {

        using clock = std::chrono::steady_clock;

        std::vector<std::string> build_environment(const process_options& opts) {
            std::vector<std::string> env;
            for (char** e = environ; e && *e; ++e) {
                std::string_view entry{*e};
                auto name = entry.substr(0, entry.find('='));
                bool overridden = false;
                for (const auto& [k, v] : opts.env)
                    if (k == name) overridden = true;
                if (!overridden) env.emplace_back(entry);
            }
            for (const auto& [k, v] : opts.env) env.push_back(k + "=" + v);
            return env;
        }

    }  // namespace

    std::string shell_quote(std::string_view s) {
        std::string out = "'";
        for (char c : s) {
            if (c == '\'') out += "'\\''";
            else
                out += c;
        }
        out += '\'';
        return out;
    }

    process_result run_shell(const std::string& command, const process_options& opts) {
        process_result res;
        const auto start = clock::now();

        // Everything the child touches is prepared before fork.
        auto env_strings = build_environment(opts);
        std::vector<char*> envp;
        for (auto& s : env_strings) envp.push_back(s.data());
        envp.push_back(nullptr);
        std::string cwd = opts.cwd.string();
        const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};

        int fds[2];
        if (::pipe2(fds, O_CLOEXEC) != 0) {
            res.spawn_failed = true;
            res.output = std::string{"pipe: "} + std::strerror(errno);
            return res;
        }

        pid_t pid = ::fork();
        if (pid < 0) {
            ::close(fds[0]);
            ::close(fds[1]);
            res.spawn_failed = true;
            res.output = std::string{"fork: "} + std::strerror(errno);
            return res;
        }
        if (pid == 0) {
            ::setpgid(0, 0);
            ::dup2(fds[1], STDOUT_FILENO);
            ::dup2(fds[1], STDERR_FILENO);
            int devnull = ::open("/dev/null", O_RDONLY);
            if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
            if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) ::_exit(126);
            ::execve("/bin/sh", const_cast<char* const*>(argv), envp.data());
            ::_exit(127);
        }
        ::setpgid(pid, pid);  // avoid racing the child's own call
        ::close(fds[1]);

        const auto deadline = start + opts.timeout;
        char buf[8192];
        bool eof = false;
        while (!eof) {
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
            if (remaining <= 0) {
                res.timed_out = true;
                break;
            }
            pollfd p{fds[0], POLLIN, 0};
            int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(remaining, 1000)));
            if (rc < 0) {
                if (errno == EINTR) continue;
                break;
            }
            if (rc == 0) continue;
            ssize_t n = ::read(fds[0], buf, sizeof buf);
            if (n < 0) {
                if (errno == EINTR) continue;
                break;
            }
            if (n == 0) {
                eof = true;
                break;
            }
            auto room = opts.output_cap > res.output.size() ? opts.output_cap - res.output.size() : 0;
            res.output.append(buf, std::min<std::size_t>(room, static_cast<std::size_t>(n)));
        }
        if (res.timed_out) ::kill(-pid, SIGKILL);
        ::close(fds[0]);

        int status = 0;
        while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {}
        if (!eof && !res.timed_out) ::kill(-pid, SIGKILL);
        if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
        else if (WIFSIGNALED(status))
            res.term_signal = WTERMSIG(status);
        if (res.timed_out) res.term_signal = 0;
        res.seconds = std::chrono::duration<double>(clock::now() - start).count();
        return res;
    }

}  // namespace crashfix
