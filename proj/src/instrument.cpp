#include "crashfix/instrument.hpp"

#include "crashfix/error.hpp"
#include "crashfix/fs_util.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace fs = std::filesystem;

namespace crashfix {

    namespace {

        enum class token_kind { ident, literal, number, punct };

        struct token {
            token_kind kind{};
            std::size_t pos{};
            std::string_view text{};
        };

        bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
        bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

        // Lexes enough of C to track braces: comments, literals and preprocessor lines are
        // consumed without producing punctuation.
        std::vector<token> lex(std::string_view src, std::string_view path) {
            std::vector<token> out;
            std::size_t i = 0;
            bool line_start = true;
            auto fail = [&](std::string_view why) {
                throw error{errc::instrumentation_failed,
                            std::string{path} + ": " + std::string{why},
                            error_detail{.path = std::string{path}}};
            };
            while (i < src.size()) {
                char c = src[i];
                if (c == '\n') {
                    line_start = true;
                    ++i;
                    continue;
                }
                if (std::isspace(static_cast<unsigned char>(c))) {
                    ++i;
                    continue;
                }
                if (c == '#' && line_start) {
                    while (i < src.size() && src[i] != '\n') {
                        if (src[i] == '\\' && i + 1 < src.size() && src[i + 1] == '\n') ++i;
                        ++i;
                    }
                    continue;
                }
                line_start = false;
                if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
                    while (i < src.size() && src[i] != '\n') ++i;
                    continue;
                }
                if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
                    auto end = src.find("*/", i + 2);
                    if (end == std::string_view::npos) fail("unterminated block comment");
                    i = end + 2;
                    continue;
                }
                if (c == '"' || c == '\'') {
                    auto start = i++;
                    while (i < src.size() && src[i] != c) {
                        if (src[i] == '\\') ++i;
                        else if (src[i] == '\n')
                            fail("unterminated literal");
                        ++i;
                    }
                    if (i >= src.size()) fail("unterminated literal");
                    ++i;
                    out.push_back({token_kind::literal, start, src.substr(start, i - start)});
                    continue;
                }
                if (ident_start(c)) {
                    auto start = i;
                    while (i < src.size() && ident_char(src[i])) ++i;
                    out.push_back({token_kind::ident, start, src.substr(start, i - start)});
                    continue;
                }
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    auto start = i;
                    while (i < src.size() && (ident_char(src[i]) || src[i] == '.')) ++i;
                    out.push_back({token_kind::number, start, src.substr(start, i - start)});
                    continue;
                }
                out.push_back({token_kind::punct, i, src.substr(i, 1)});
                ++i;
            }
            return out;
        }

        bool is_punct(const token& t, char c) { return t.kind == token_kind::punct && t.text[0] == c; }

        bool looks_like_macro(std::string_view name) {
            bool has_alpha = false;
            for (char c : name) {
                if (std::islower(static_cast<unsigned char>(c))) return false;
                if (std::isupper(static_cast<unsigned char>(c))) has_alpha = true;
            }
            return has_alpha && name.size() > 1;
        }

        std::string c_string_literal(std::string_view s) {
            std::string out = "\"";
            for (char c : s) {
                if (c == '\\' || c == '"') out += '\\';
                out += c;
            }
            out += '"';
            return out;
        }

    }  // namespace

    std::vector<function_definition> find_function_definitions(std::string_view source, std::string_view path) {
        auto tokens = lex(source, path);
        auto fail = [&](std::string_view why, std::size_t pos) {
            auto line = 1 + std::count(source.begin(), source.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
            throw error{errc::instrumentation_failed,
                        std::string{path} + ":" + std::to_string(line) + ": " + std::string{why},
                        error_detail{.path = std::string{path}}};
        };

        std::vector<function_definition> defs;
        int depth = 0;
        std::size_t decl_begin = 0;  // first token of the current file-scope declaration

        for (std::size_t k = 0; k < tokens.size(); ++k) {
            const auto& t = tokens[k];
            if (is_punct(t, '{')) {
                if (depth == 0) {
                    if (decl_begin == k) fail("block at file scope without a declarator (K&R definition?)", t.pos);
                    const auto& prev = tokens[k - 1];
                    if (is_punct(prev, ')')) {
                        std::size_t j = k - 1;
                        int parens = 0;
                        for (;; --j) {
                            if (is_punct(tokens[j], ')')) ++parens;
                            else if (is_punct(tokens[j], '('))
                                --parens;
                            if (parens == 0 || j == decl_begin) break;
                        }
                        if (parens != 0) fail("unbalanced parameter list", t.pos);
                        if (j == decl_begin || tokens[j - 1].kind != token_kind::ident)
                            fail("unsupported function declarator", t.pos);
                        const auto& name = tokens[j - 1];
                        if (name.text.starts_with("__attribute__") || name.text == "__declspec")
                            fail("attribute directly before function body", t.pos);
                        if (j - 1 == decl_begin || looks_like_macro(name.text))
                            fail("function-like macro definition `" + std::string{name.text} + "`", t.pos);
                        defs.push_back({std::string{name.text}, t.pos});
                    }
                }
                ++depth;
            }
            else if (is_punct(t, '}')) {
                if (depth == 0) fail("unbalanced closing brace", t.pos);
                --depth;
                if (depth == 0) decl_begin = k + 1;
            }
            else if (depth == 0 && is_punct(t, ';')) {
                decl_begin = k + 1;
            }
        }
        if (depth != 0) fail("unbalanced braces at end of file", source.size());
        return defs;
    }

    std::string instrument_source(std::string_view source, std::string_view rel_path, std::string_view include_spelling) {
        auto defs = find_function_definitions(source, rel_path);

        std::string out;
        out.reserve(source.size() + defs.size() * 64 + 64);
        out += "#include \"";
        out += include_spelling;
        out += "\"\n#line 1\n";

        std::size_t cursor = 0;
        for (const auto& d : defs) {
            out.append(source.substr(cursor, d.body_open + 1 - cursor));
            out += " crashfix_trace_enter(";
            out += c_string_literal(rel_path);
            out += ", ";
            out += c_string_literal(d.name);
            out += ");";
            cursor = d.body_open + 1;
        }
        out.append(source.substr(cursor));
        return out;
    }

    std::string trace_helper_header(const fs::path& default_log_path) {
        std::string h;
        h += "#ifndef CRASHFIX_TRACE_H\n#define CRASHFIX_TRACE_H\n";
        h += "#include <fcntl.h>\n#include <stdio.h>\n#include <stdlib.h>\n#include <unistd.h>\n\n";
        h += "static inline void crashfix_trace_enter(const char *file, const char *func) {\n";
        h += "    const char *path = getenv(\"";
        h += trace_log_env;
        h += "\");\n";
        h += "    if (!path || !*path) path = " + c_string_literal(default_log_path.string()) + ";\n";
        h += "    int fd = open(path, O_WRONLY | O_CREAT | O_APPEND, 0644);\n";
        h += "    if (fd < 0) return;\n";
        h += "    char line[512];\n";
        h += "    int n = snprintf(line, sizeof line, \"%ld %s %s\\n\", (long)getpid(), file, func);\n";
        h += "    if (n > 0) {\n";
        h += "        if ((size_t)n >= sizeof line) n = (int)sizeof line - 1;\n";
        h += "        ssize_t w = write(fd, line, (size_t)n);\n";
        h += "        (void)w;\n";
        h += "    }\n";
        h += "    close(fd);\n";
        h += "}\n\n#endif\n";
        return h;
    }

    void instrument_c_sources(const fs::path& workspace,
                              std::span<const std::string> candidates,
                              const fs::path& log_path,
                              const fs::path& destination) {
        for (const auto& c : candidates) {
            if (!is_safe_relative(c) || !fs::is_regular_file(workspace / c))
                throw error{errc::candidate_missing, "candidate not found: " + c, error_detail{.path = c}};
        }
        if (fs::exists(destination) && !fs::is_empty(destination))
            throw error{errc::instrumentation_failed,
                        "destination is not empty: " + destination.string(),
                        error_detail{.path = destination.string()}};

        // Instrument in memory first so a failure leaves no half-written copy behind.
        std::vector<std::pair<std::string, std::string>> rewritten;
        std::set<std::string> seen;
        for (const auto& c : candidates) {
            if (!seen.insert(c).second) continue;
            auto rel_dir = fs::path{c}.parent_path();
            auto include = (fs::path{std::string{trace_helper_header_name}}.lexically_relative(rel_dir)).generic_string();
            if (rel_dir.empty()) include = std::string{trace_helper_header_name};
            rewritten.emplace_back(c, instrument_source(read_file(workspace / c), c, include));
        }

        fs::create_directories(destination);
        fs::copy(workspace, destination, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
        for (const auto& [rel, text] : rewritten)
            write_file(destination / rel, text);
        write_file(destination / trace_helper_header_name, trace_helper_header(log_path));
    }

}  // namespace crashfix
