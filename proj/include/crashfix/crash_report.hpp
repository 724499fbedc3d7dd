#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crashfix {

    struct stack_frame {
        std::string func{};
        std::optional<std::string> file{};

        bool operator==(const stack_frame&) const = default;
    };

    /// Sanitizer-style crash report. Frames are ordered most-recent-first.
    struct crash_report {
        std::string bug_type{};
        std::vector<stack_frame> frames{};
        std::string raw_text{};

        bool operator==(const crash_report&) const = default;
    };

    /// Parses a crash report from free text.
    ///
    /// The bug type is taken from the first line that looks like a detector banner
    /// (`BUG:`, `ERROR: AddressSanitizer:`, `WARNING:`, `KASAN:`, `kernel BUG`, `UBSAN:`,
    /// `HARNESS: CRASH`), falling back to the first non-blank line.
    ///
    /// Frames come from the first stack-dump block found:
    ///   - a line `Call Trace:` or `backtrace:` followed by indented lines of the form
    ///     `[<addr>] ? func+0x1f/0x80 path/to/file.c:123` (address, `?`, offsets and file optional);
    ///   - or AddressSanitizer frames `#N 0xADDR in func path/file.c:L:C`.
    /// The block ends at the first blank or non-indented line.
    crash_report parse_crash_report(std::string_view text);

    /// Extracts a process id mentioned in the report (`pid 3062`, `PID: 3062`), if any.
    std::optional<std::int64_t> report_pid(std::string_view text);

}  // namespace crashfix
