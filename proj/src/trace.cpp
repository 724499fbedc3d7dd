#include "crashfix/trace.hpp"

#include "crashfix/error.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace crashfix {

    namespace {

        bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

        std::vector<std::string_view> split_fields(std::string_view line) {
            std::vector<std::string_view> out;
            std::size_t i = 0;
            while (i < line.size()) {
                while (i < line.size() && is_space(line[i])) ++i;
                if (i >= line.size()) break;
                auto start = i;
                while (i < line.size() && !is_space(line[i])) ++i;
                out.push_back(line.substr(start, i - start));
            }
            return out;
        }

        bool parse_pid(std::string_view s, std::int64_t& out) {
            if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
                return false;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            return ec == std::errc{} && ptr == s.data() + s.size();
        }

    }  // namespace

    trace parse_trace(std::string_view text) {
        trace out;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            ++line_no;

            auto fields = split_fields(line);
            if (!fields.empty() && fields.front().front() != '#') {
                std::int64_t pid{};
                if (fields.size() != 3 || !parse_pid(fields[0], pid)) {
                    throw error{errc::malformed_line,
                                "trace line " + std::to_string(line_no) + ": expected `<pid> <file> <func>`",
                                error_detail{.line_no = line_no}};
                }
                out.records.push_back(trace_record{
                        .pid = pid,
                        .seq = out.records.size(),
                        .file = std::string{fields[1]},
                        .func = std::string{fields[2]}});
            }

            if (nl == std::string_view::npos) break;
            pos = nl + 1;
        }
        return out;
    }

    std::string serialize_trace(const trace& t) {
        std::ostringstream os;
        for (const auto& r : t.records)
            os << r.pid << ' ' << r.file << ' ' << r.func << '\n';
        return os.str();
    }

    trace filter_by_pid(const trace& t, std::int64_t pid) {
        trace out;
        out.source_note = t.source_note;
        std::copy_if(t.records.begin(), t.records.end(), std::back_inserter(out.records), [pid](const auto& r) {
            return r.pid == pid;
        });
        return out;
    }

}  // namespace crashfix
