#include "crashfix/agent.hpp"

#include "crashfix/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>

namespace crashfix {

    namespace detail {
        // Generated from templates/<version>/*.txt at configure time.
        std::string_view embedded_template(std::string_view name);
    }  // namespace detail

    namespace {

        using substitutions = std::map<std::string, std::string, std::less<>>;

        // Single pass, so substituted text is never rescanned for placeholders.
        std::string fill(std::string_view templ, const substitutions& subs) {
            std::string out;
            out.reserve(templ.size() * 2);
            std::size_t pos = 0;
            while (pos < templ.size()) {
                auto open = templ.find("{{", pos);
                if (open == std::string_view::npos) break;
                auto close = templ.find("}}", open + 2);
                if (close == std::string_view::npos) break;
                out.append(templ.substr(pos, open - pos));
                auto key = templ.substr(open + 2, close - open - 2);
                if (auto it = subs.find(key); it != subs.end()) out += it->second;
                else
                    out.append(templ.substr(open, close + 2 - open));
                pos = close + 2;
            }
            out.append(templ.substr(pos));
            return out;
        }

        std::string_view trim(std::string_view s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
            return s;
        }

        std::string render_code(const repair_context& ctx) {
            std::string out;
            for (const auto& [path, contents] : ctx.candidate_files) {
                out += "[start of " + path + "]\n";
                out += contents;
                if (!contents.empty() && contents.back() != '\n') out += '\n';
                out += "[end of " + path + "]\n";
            }
            return out;
        }

        substitutions context_substitutions(const repair_context& ctx) {
            substitutions s;
            s["CRASH_TEXT"] = std::string{trim(ctx.report.raw_text)};
            s["CODE"] = render_code(ctx);
            if (ctx.trace) {
                s["EXECUTION"] = "<execution>\nCall Stack (from earliest to most recent):\n\n" +
                                 render_execution(*ctx.trace) + "</execution>\n\n";
                s["EXAMPLE_EXECUTION"] = std::string{template_text("example_execution")};
                s["EXECUTION_NOTE"] = std::string{template_text("execution_note")};
            }
            else {
                s["EXECUTION"] = "";
                s["EXAMPLE_EXECUTION"] = "";
                s["EXECUTION_NOTE"] = "";
            }
            return s;
        }

        // Strips the newline that separates a tag line from its content.
        std::string_view strip_tag_newlines(std::string_view s) {
            if (s.starts_with("\r\n")) s.remove_prefix(2);
            else if (s.starts_with('\n'))
                s.remove_prefix(1);
            if (s.ends_with("\r\n")) s.remove_suffix(2);
            else if (s.ends_with('\n'))
                s.remove_suffix(1);
            return s;
        }

        bool is_modification_header(std::string_view line) {
            auto t = line;
            while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
            return t.starts_with("// Modification");
        }

    }  // namespace

    std::string_view template_text(std::string_view name) { return detail::embedded_template(name); }

    std::string render_execution(const minimized_trace& t) {
        std::string out;
        for (const auto& r : t.records) out += r.func + "()\n";
        return out;
    }

    std::string assemble_hypothesis_prompt(const repair_context& ctx) {
        return fill(template_text("hypothesis"), context_substitutions(ctx));
    }

    std::string assemble_patch_prompt(const repair_context& ctx, std::string_view hypothesis_text) {
        auto subs = context_substitutions(ctx);
        subs["SOLUTION"] = std::string{trim(hypothesis_text)};
        return fill(template_text("patch"), subs);
    }

    std::string assemble_hypothesis_selection_prompt(const repair_context& ctx, std::span<const hypothesis> candidates) {
        auto subs = context_substitutions(ctx);
        std::string list;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            list += "<hypothesis id=\"" + std::to_string(i + 1) + "\">\n";
            list += trim(candidates[i].text);
            list += "\n</hypothesis>\n";
        }
        subs["CANDIDATES"] = list;
        subs["COUNT"] = std::to_string(candidates.size());
        return fill(template_text("select_hypothesis"), subs);
    }

    std::string assemble_patch_selection_prompt(const repair_context& ctx,
                                                std::string_view hypothesis_text,
                                                std::span<const patch> candidates) {
        auto subs = context_substitutions(ctx);
        subs["SOLUTION"] = std::string{trim(hypothesis_text)};
        std::string list;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            patch body = candidates[i];
            body.solution_text.clear();
            list += "<patch id=\"" + std::to_string(i + 1) + "\">\n";
            list += render_modifications(body);
            list += "</patch>\n";
        }
        subs["CANDIDATES"] = list;
        subs["COUNT"] = std::to_string(candidates.size());
        return fill(template_text("select_patch"), subs);
    }

    std::string parse_solution(std::string_view response) {
        constexpr std::string_view open_tag = "<solution>";
        constexpr std::string_view close_tag = "</solution>";
        auto open = response.find(open_tag);
        if (open == std::string_view::npos) {
            if (response.find(close_tag) != std::string_view::npos)
                throw error{errc::unbalanced_tags, "`</solution>` without opening tag", error_detail{.tag = "solution"}};
            throw error{errc::missing_solution_tag, "response has no <solution> tag", error_detail{.tag = "solution"}};
        }
        auto close = response.find(close_tag, open + open_tag.size());
        if (close == std::string_view::npos)
            throw error{errc::unbalanced_tags, "`<solution>` is never closed", error_detail{.tag = "solution"}};
        auto inner = trim(response.substr(open + open_tag.size(), close - open - open_tag.size()));
        if (inner.empty())
            throw error{errc::missing_solution_tag, "empty <solution> block", error_detail{.tag = "solution"}};
        return std::string{inner};
    }

    patch parse_modifications(std::string_view response) {
        // Split into lines, remembering where every `// Modification` header starts and ends.
        std::vector<std::pair<std::size_t, std::size_t>> headers;  // (line start, next line start)
        std::size_t pos = 0;
        while (pos < response.size()) {
            auto nl = response.find('\n', pos);
            auto next = nl == std::string_view::npos ? response.size() : nl + 1;
            if (is_modification_header(response.substr(pos, next - pos))) headers.emplace_back(pos, next);
            pos = next;
        }
        if (headers.empty()) throw error{errc::no_modifications, "response has no `// Modification` block"};

        patch out;
        auto preamble = response.substr(0, headers.front().first);
        if (preamble.find("<solution>") != std::string_view::npos || preamble.find("</solution>") != std::string_view::npos)
            out.solution_text = parse_solution(preamble);

        static constexpr std::array<std::string_view, 4> tags{"reason", "file", "original", "patched"};
        for (std::size_t b = 0; b < headers.size(); ++b) {
            auto end = b + 1 < headers.size() ? headers[b + 1].first : response.size();
            auto block = response.substr(headers[b].second, end - headers[b].second);
            const auto block_no = b + 1;

            std::array<std::string_view, 4> inner{};
            std::size_t cursor = 0;
            for (std::size_t t = 0; t < tags.size(); ++t) {
                auto open_tag = "<" + std::string{tags[t]} + ">";
                auto close_tag = "</" + std::string{tags[t]} + ">";
                auto open = block.find(open_tag, cursor);
                if (open == std::string_view::npos) {
                    if (block.find(close_tag, cursor) != std::string_view::npos)
                        throw error{errc::unbalanced_tags,
                                    "modification " + std::to_string(block_no) + ": `" + close_tag + "` without opening tag",
                                    error_detail{.block_no = block_no, .tag = std::string{tags[t]}}};
                    throw error{errc::missing_tag,
                                "modification " + std::to_string(block_no) + ": missing <" + std::string{tags[t]} + ">",
                                error_detail{.block_no = block_no, .tag = std::string{tags[t]}}};
                }
                auto close = block.find(close_tag, open + open_tag.size());
                if (close == std::string_view::npos)
                    throw error{errc::unbalanced_tags,
                                "modification " + std::to_string(block_no) + ": `" + open_tag + "` is never closed",
                                error_detail{.block_no = block_no, .tag = std::string{tags[t]}}};
                inner[t] = block.substr(open + open_tag.size(), close - open - open_tag.size());
                cursor = close + close_tag.size();
            }

            edit e{
                    .file = std::string{trim(inner[1])},
                    .original = std::string{strip_tag_newlines(inner[2])},
                    .replaced = std::string{strip_tag_newlines(inner[3])},
                    .reason = std::string{trim(inner[0])}};
            if (e.file.empty())
                throw error{errc::missing_tag, "modification " + std::to_string(block_no) + ": empty <file>",
                            error_detail{.block_no = block_no, .tag = "file"}};
            if (e.original.empty())
                throw error{errc::missing_tag, "modification " + std::to_string(block_no) + ": empty <original>",
                            error_detail{.block_no = block_no, .tag = "original"}};
            out.edits.push_back(std::move(e));
        }
        return out;
    }

    std::string render_modifications(const patch& p) {
        std::string out;
        if (!p.solution_text.empty()) out += "<solution>\n" + p.solution_text + "\n</solution>\n\n";
        out += "```\n";
        for (std::size_t i = 0; i < p.edits.size(); ++i) {
            const auto& e = p.edits[i];
            if (i) out += '\n';
            out += "// Modification " + std::to_string(i + 1) + "\n";
            out += "<reason>\n" + e.reason + "\n</reason>\n";
            out += "<file>\n" + e.file + "\n</file>\n";
            out += "<original>\n" + e.original + "\n</original>\n";
            out += "<patched>\n" + e.replaced + "\n</patched>\n";
        }
        out += "```\n";
        return out;
    }

    std::size_t parse_choice(std::string_view response, std::size_t count) {
        constexpr std::string_view open_tag = "<choice>";
        constexpr std::string_view close_tag = "</choice>";
        auto open = response.rfind(open_tag);
        if (open == std::string_view::npos) throw error{errc::invalid_choice, "response has no <choice> tag"};
        auto close = response.find(close_tag, open);
        if (close == std::string_view::npos) throw error{errc::invalid_choice, "`<choice>` is never closed"};
        auto inner = trim(response.substr(open + open_tag.size(), close - open - open_tag.size()));
        std::size_t k = 0;
        auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), k);
        if (ec != std::errc{} || ptr != inner.data() + inner.size() || k < 1 || k > count)
            throw error{errc::invalid_choice,
                        "choice `" + std::string{inner} + "` is not in [1, " + std::to_string(count) + "]",
                        error_detail{.count = count}};
        return k - 1;
    }

}  // namespace crashfix
