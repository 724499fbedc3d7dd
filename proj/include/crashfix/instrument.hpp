#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crashfix {

    inline constexpr std::string_view trace_helper_header_name = "crashfix_trace.h";
    inline constexpr std::string_view trace_log_env = "CRASHFIX_TRACE_LOG";

    struct function_definition {
        std::string name{};
        std::size_t body_open{};  // offset of the opening brace
    };

    /// Brace-depth scan for file-scope function definitions: an identifier and parameter list
    /// directly followed by `{`. Comments, string/char literals and preprocessor lines are
    /// skipped. K&R definitions and macro-style definitions throw error{instrumentation_failed}.
    std::vector<function_definition> find_function_definitions(std::string_view source, std::string_view path);

    /// Returns `source` with a trace call injected as the first statement of every function
    /// body and the helper header included at the top. Line numbers are preserved via `#line`.
    std::string instrument_source(std::string_view source, std::string_view rel_path, std::string_view include_spelling);

    /// Text of the injected helper header. The log path can be overridden at run time through
    /// the CRASHFIX_TRACE_LOG environment variable.
    std::string trace_helper_header(const std::filesystem::path& default_log_path);

    /// Copies `workspace` into `destination` (which must not exist or be empty), instruments
    /// every candidate file there and drops the helper header at the destination root.
    void instrument_c_sources(const std::filesystem::path& workspace,
                              std::span<const std::string> candidates,
                              const std::filesystem::path& log_path,
                              const std::filesystem::path& destination);

}  // namespace crashfix
