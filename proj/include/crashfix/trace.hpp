#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace crashfix {

    /// One function-entry event. `seq` is the global order index assigned at parse time.
    struct trace_record {
        std::int64_t pid{};
        std::size_t seq{};
        std::string file{};
        std::string func{};

        bool operator==(const trace_record&) const = default;
    };

    struct trace {
        std::vector<trace_record> records{};
        std::string source_note{};
    };

    /// Parses the canonical `<pid> <file> <func>` line format. Blank lines and lines whose
    /// first non-space character is `#` are skipped; seq is the 0-based data-line index.
    /// Throws error{malformed_line} with the 1-based physical line number.
    trace parse_trace(std::string_view text);

    /// Inverse of parse_trace: one record per line, single-space separated.
    std::string serialize_trace(const trace& t);

    trace filter_by_pid(const trace& t, std::int64_t pid);

}  // namespace crashfix
