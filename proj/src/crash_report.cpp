#include "crashfix/crash_report.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <regex>

namespace crashfix {

    namespace {

        std::vector<std::string_view> split_lines(std::string_view text) {
            std::vector<std::string_view> lines;
            std::size_t pos = 0;
            while (pos < text.size()) {
                auto nl = text.find('\n', pos);
                if (nl == std::string_view::npos) nl = text.size();
                auto line = text.substr(pos, nl - pos);
                if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
                lines.push_back(line);
                pos = nl + 1;
            }
            return lines;
        }

        std::string_view ltrim(std::string_view s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
            return s;
        }

        std::string_view trim(std::string_view s) {
            s = ltrim(s);
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
            return s;
        }

        std::string_view next_token(std::string_view& s) {
            s = ltrim(s);
            auto end = s.find_first_of(" \t");
            auto tok = s.substr(0, end);
            s = end == std::string_view::npos ? std::string_view{} : s.substr(end);
            return tok;
        }

        bool is_indented(std::string_view line) { return !line.empty() && (line[0] == ' ' || line[0] == '\t'); }

        bool looks_like_path(std::string_view tok) {
            return tok.find('/') != std::string_view::npos || tok.find(".c") != std::string_view::npos ||
                   tok.find(".h") != std::string_view::npos;
        }

        std::string strip_line_suffix(std::string_view file) {
            // drop trailing `:123` or `:123:4`
            while (true) {
                auto colon = file.rfind(':');
                if (colon == std::string_view::npos) break;
                auto tail = file.substr(colon + 1);
                if (tail.empty() || !std::all_of(tail.begin(), tail.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
                    break;
                file = file.substr(0, colon);
            }
            return std::string{file};
        }

        std::optional<stack_frame> parse_kernel_frame(std::string_view line) {
            auto rest = ltrim(line);
            if (rest.starts_with("[<")) {
                auto close = rest.find(']');
                if (close == std::string_view::npos) return std::nullopt;
                rest = ltrim(rest.substr(close + 1));
            }
            if (rest.starts_with("? ")) return std::nullopt;
            auto func_tok = next_token(rest);
            if (func_tok.empty() || func_tok.front() == '<') return std::nullopt;
            auto plus = func_tok.find('+');
            auto func = func_tok.substr(0, plus);
            if (func.ends_with("()")) func.remove_suffix(2);
            if (func.empty()) return std::nullopt;
            if (!std::all_of(func.begin(), func.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
                }))
                return std::nullopt;

            stack_frame f{std::string{func}, std::nullopt};
            auto file_tok = next_token(rest);
            if (!file_tok.empty() && looks_like_path(file_tok)) f.file = strip_line_suffix(file_tok);
            return f;
        }

        const std::regex& asan_frame_re() {
            static const std::regex re{R"(^\s*#\d+\s+0x[0-9a-fA-F]+\s+in\s+(\S+)(?:\s+(\S+))?)"};
            return re;
        }

        constexpr std::array banner_prefixes{
                std::string_view{"BUG:"},
                std::string_view{"ERROR: AddressSanitizer:"},
                std::string_view{"ERROR: LeakSanitizer:"},
                std::string_view{"KASAN:"},
                std::string_view{"UBSAN:"},
                std::string_view{"WARNING:"},
                std::string_view{"kernel BUG"},
                std::string_view{"general protection fault"},
                std::string_view{"HARNESS: CRASH"},
        };

    }  // namespace

    crash_report parse_crash_report(std::string_view text) {
        crash_report report;
        report.raw_text = std::string{text};
        auto lines = split_lines(text);

        for (auto line : lines) {
            auto t = trim(line);
            // Sanitizers prefix their banner with "==<pid>==".
            if (t.starts_with("==")) {
                auto close = t.find("==", 2);
                if (close != std::string_view::npos) t.remove_prefix(close + 2);
            }
            for (auto prefix : banner_prefixes) {
                if (t.starts_with(prefix)) {
                    report.bug_type = std::string{t};
                    break;
                }
            }
            if (!report.bug_type.empty()) break;
        }
        if (report.bug_type.empty()) {
            for (auto line : lines) {
                if (auto t = trim(line); !t.empty()) {
                    report.bug_type = std::string{t};
                    break;
                }
            }
        }

        for (std::size_t i = 0; i < lines.size() && report.frames.empty(); ++i) {
            auto t = trim(lines[i]);
            if (t == "Call Trace:" || t == "backtrace:") {
                for (std::size_t j = i + 1; j < lines.size(); ++j) {
                    if (!is_indented(lines[j]) || trim(lines[j]).empty()) break;
                    if (auto f = parse_kernel_frame(lines[j])) report.frames.push_back(std::move(*f));
                }
                continue;
            }
            std::cmatch m;
            if (std::regex_search(lines[i].data(), lines[i].data() + lines[i].size(), m, asan_frame_re())) {
                for (std::size_t j = i; j < lines.size(); ++j) {
                    std::cmatch fm;
                    if (!std::regex_search(lines[j].data(), lines[j].data() + lines[j].size(), fm, asan_frame_re()))
                        break;
                    stack_frame f{fm[1].str(), std::nullopt};
                    if (fm[2].matched) f.file = strip_line_suffix(fm[2].str());
                    report.frames.push_back(std::move(f));
                }
            }
        }
        return report;
    }

    std::optional<std::int64_t> report_pid(std::string_view text) {
        static const std::regex re{R"((?:\bpid\s+|\bPID:\s*)(\d+))"};
        std::cmatch m;
        if (!std::regex_search(text.data(), text.data() + text.size(), m, re)) return std::nullopt;
        std::int64_t pid{};
        auto s = m[1].str();
        std::from_chars(s.data(), s.data() + s.size(), pid);
        return pid;
    }

}  // namespace crashfix
