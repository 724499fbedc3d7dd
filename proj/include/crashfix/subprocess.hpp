#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace crashfix {

    struct process_result {
        int exit_code{-1};
        /// Signal that terminated the child, 0 if it exited normally.
        int term_signal{};
        bool timed_out{};
        bool spawn_failed{};
        /// stdout and stderr interleaved, truncated to the output cap.
        std::string output{};
        double seconds{};

        bool ok() const noexcept { return !spawn_failed && !timed_out && term_signal == 0 && exit_code == 0; }
    };

    struct process_options {
        std::filesystem::path cwd{};
        std::chrono::milliseconds timeout{std::chrono::seconds{30}};
        /// Added to (or overriding) the inherited environment.
        std::vector<std::pair<std::string, std::string>> env{};
        std::size_t output_cap{4u << 20};
    };

    /// Runs `command` through /bin/sh in its own process group. On timeout the whole group is
    /// killed. Safe to call from several threads at once.
    process_result run_shell(const std::string& command, const process_options& opts);

    /// Wraps `s` in single quotes for /bin/sh.
    std::string shell_quote(std::string_view s);

}  // namespace crashfix
