#include "crashfix/patch.hpp"

#include "crashfix/error.hpp"
#include "crashfix/fs_util.hpp"
#include "crashfix/hash.hpp"

#include <algorithm>
#include <set>

namespace fs = std::filesystem;

namespace crashfix {

    namespace {

        struct normalized_text {
            std::string text{};
            std::vector<std::size_t> origin{};  // origin[i] = offset in the raw text of text[i]
        };

        normalized_text normalize(std::string_view raw) {
            normalized_text out;
            out.text.reserve(raw.size());
            out.origin.reserve(raw.size());
            std::size_t pos = 0;
            while (pos <= raw.size()) {
                auto nl = raw.find('\n', pos);
                auto end = nl == std::string_view::npos ? raw.size() : nl;
                auto content_end = end;
                while (content_end > pos &&
                       (raw[content_end - 1] == ' ' || raw[content_end - 1] == '\t' || raw[content_end - 1] == '\r'))
                    --content_end;
                for (auto i = pos; i < content_end; ++i) {
                    out.text += raw[i];
                    out.origin.push_back(i);
                }
                if (nl == std::string_view::npos) break;
                out.text += '\n';
                out.origin.push_back(nl);
                pos = nl + 1;
            }
            return out;
        }

        std::vector<std::size_t> find_all(std::string_view hay, std::string_view needle) {
            std::vector<std::size_t> hits;
            if (needle.empty()) return hits;
            for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + 1))
                hits.push_back(p);
            return hits;
        }

        void validate_edit(const edit& e, std::size_t index) {
            if (e.file.empty() || !is_safe_relative(e.file))
                throw error{errc::invalid_patch,
                            "edit " + std::to_string(index + 1) + ": invalid file path `" + e.file + "`",
                            error_detail{.path = e.file}};
            if (normalize(e.original).text.find_first_not_of('\n') == std::string::npos)
                throw error{errc::invalid_patch,
                            "edit " + std::to_string(index + 1) + ": original snippet is blank",
                            error_detail{.path = e.file}};
        }

        // ---- line diff ------------------------------------------------------------------

        std::vector<std::string_view> split_keep_newlines(std::string_view text) {
            std::vector<std::string_view> lines;
            std::size_t pos = 0;
            while (pos < text.size()) {
                auto nl = text.find('\n', pos);
                auto end = nl == std::string_view::npos ? text.size() : nl + 1;
                lines.push_back(text.substr(pos, end - pos));
                pos = end;
            }
            return lines;
        }

        enum class op_kind { keep, remove, insert };

        struct diff_op {
            op_kind kind{};
            std::size_t a{};  // index into old lines (keep/remove)
            std::size_t b{};  // index into new lines (keep/insert)
        };

        // Myers' O(ND) shortest edit script.
        std::vector<diff_op> diff_lines(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b) {
            const auto n = static_cast<long>(a.size());
            const auto m = static_cast<long>(b.size());

            long prefix = 0;
            while (prefix < n && prefix < m && a[prefix] == b[prefix]) ++prefix;
            long suffix = 0;
            while (suffix < n - prefix && suffix < m - prefix && a[n - 1 - suffix] == b[m - 1 - suffix]) ++suffix;

            const long an = n - prefix - suffix;
            const long bm = m - prefix - suffix;
            auto A = [&](long i) { return a[prefix + i]; };
            auto B = [&](long j) { return b[prefix + j]; };

            const long max = an + bm;
            const long off = max + 1;
            std::vector<long> v(2 * max + 3, 0);
            std::vector<std::vector<long>> history;
            bool done = max == 0;
            for (long d = 0; d <= max && !done; ++d) {
                history.push_back(v);
                for (long k = -d; k <= d; k += 2) {
                    long x = (k == -d || (k != d && v[off + k - 1] < v[off + k + 1])) ? v[off + k + 1] : v[off + k - 1] + 1;
                    long y = x - k;
                    while (x < an && y < bm && A(x) == B(y)) ++x, ++y;
                    v[off + k] = x;
                    if (x >= an && y >= bm) {
                        done = true;
                        break;
                    }
                }
            }

            std::vector<diff_op> middle;
            long x = an, y = bm;
            for (long d = static_cast<long>(history.size()) - 1; d >= 0; --d) {
                const auto& hv = history[static_cast<std::size_t>(d)];
                long k = x - y;
                long prev_k = (k == -d || (k != d && hv[off + k - 1] < hv[off + k + 1])) ? k + 1 : k - 1;
                long prev_x = hv[off + prev_k];
                long prev_y = prev_x - prev_k;
                while (x > prev_x && y > prev_y) {
                    --x, --y;
                    middle.push_back({op_kind::keep, static_cast<std::size_t>(prefix + x), static_cast<std::size_t>(prefix + y)});
                }
                if (d > 0) {
                    if (x == prev_x) middle.push_back({op_kind::insert, 0, static_cast<std::size_t>(prefix + y - 1)});
                    else
                        middle.push_back({op_kind::remove, static_cast<std::size_t>(prefix + x - 1), 0});
                }
                x = prev_x;
                y = prev_y;
            }
            std::reverse(middle.begin(), middle.end());

            std::vector<diff_op> ops;
            ops.reserve(static_cast<std::size_t>(prefix + suffix) + middle.size());
            for (long i = 0; i < prefix; ++i) ops.push_back({op_kind::keep, static_cast<std::size_t>(i), static_cast<std::size_t>(i)});
            ops.insert(ops.end(), middle.begin(), middle.end());
            for (long i = 0; i < suffix; ++i)
                ops.push_back({op_kind::keep, static_cast<std::size_t>(n - suffix + i), static_cast<std::size_t>(m - suffix + i)});
            return ops;
        }

        void emit_line(std::string& out, char marker, std::string_view line) {
            out += marker;
            out += line;
            if (line.empty() || line.back() != '\n') out += "\n\\ No newline at end of file\n";
        }

        std::string range(std::size_t start, std::size_t len) {
            // start is the 0-based index of the first line; empty ranges name the line before
            auto first = len == 0 ? start : start + 1;
            if (len == 1) return std::to_string(first);
            return std::to_string(first) + "," + std::to_string(len);
        }

    }  // namespace

    source_tree source_tree::load(const fs::path& dir) {
        source_tree t;
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            t.files.emplace(entry.path().lexically_relative(dir).generic_string(), read_file(entry.path()));
        }
        return t;
    }

    void source_tree::write_to(const fs::path& dir) const {
        for (const auto& [rel, contents] : files) write_file(dir / rel, contents);
    }

    std::size_t count_matches(std::string_view text, std::string_view snippet) {
        return find_all(normalize(text).text, normalize(snippet).text).size();
    }

    std::string apply_edit_to_text(std::string_view text, const edit& e) {
        auto hay = normalize(text);
        auto needle = normalize(e.original).text;
        auto hits = find_all(hay.text, needle);
        if (hits.empty())
            throw error{errc::no_match, "original snippet not found in " + e.file, error_detail{.path = e.file}};
        if (hits.size() > 1)
            throw error{errc::ambiguous_match,
                        "original snippet occurs " + std::to_string(hits.size()) + " times in " + e.file,
                        error_detail{.count = hits.size(), .path = e.file}};
        if (e.original == e.replaced) return std::string{text};

        const auto begin = hay.origin[hits.front()];
        const auto end = hay.origin[hits.front() + needle.size() - 1] + 1;
        std::string out;
        out.reserve(text.size() - (end - begin) + e.replaced.size());
        out.append(text.substr(0, begin));
        out.append(e.replaced);
        out.append(text.substr(end));
        return out;
    }

    source_tree apply_edit(const source_tree& tree, const edit& e) {
        validate_edit(e, 0);
        auto it = tree.files.find(e.file);
        if (it == tree.files.end())
            throw error{errc::file_missing, "no such file: " + e.file, error_detail{.path = e.file}};
        source_tree out = tree;
        out.files[e.file] = apply_edit_to_text(it->second, e);
        return out;
    }

    patch_result apply_patch(const source_tree& tree, const patch& p) {
        if (p.edits.empty()) throw error{errc::invalid_patch, "patch has no edits"};
        for (std::size_t i = 0; i < p.edits.size(); ++i) validate_edit(p.edits[i], i);

        patch_result result{tree, {}};
        for (const auto& e : p.edits) {
            auto it = result.tree.files.find(e.file);
            if (it == result.tree.files.end())
                throw error{errc::file_missing, "no such file: " + e.file, error_detail{.path = e.file}};
            it->second = apply_edit_to_text(it->second, e);
        }

        for (const auto& f : modified_files(p))
            result.diff += unified_diff_file(f, tree.files.at(f), result.tree.files.at(f));
        return result;
    }

    std::string apply_patch_in_place(const fs::path& dir, const patch& p) {
        source_tree partial;
        for (const auto& f : modified_files(p)) {
            if (!is_safe_relative(f))
                throw error{errc::invalid_patch, "invalid file path `" + f + "`", error_detail{.path = f}};
            if (!fs::is_regular_file(dir / f))
                throw error{errc::file_missing, "no such file: " + f, error_detail{.path = f}};
            partial.files.emplace(f, read_file(dir / f));
        }
        auto result = apply_patch(partial, p);
        for (const auto& [rel, contents] : result.tree.files)
            if (partial.files.at(rel) != contents) write_file(dir / rel, contents);
        return result.diff;
    }

    std::vector<std::string> modified_files(const patch& p) {
        std::vector<std::string> out;
        std::set<std::string_view> seen;
        for (const auto& e : p.edits)
            if (seen.insert(e.file).second) out.push_back(e.file);
        return out;
    }

    std::string unified_diff_file(std::string_view path, std::string_view before, std::string_view after, int context) {
        if (before == after) return {};
        auto a = split_keep_newlines(before);
        auto b = split_keep_newlines(after);
        auto ops = diff_lines(a, b);
        const auto ctx = static_cast<std::size_t>(std::max(context, 0));

        std::string out;
        out += "--- a/";
        out += path;
        out += "\n+++ b/";
        out += path;
        out += '\n';

        std::size_t i = 0;
        while (i < ops.size()) {
            while (i < ops.size() && ops[i].kind == op_kind::keep) ++i;
            if (i == ops.size()) break;

            // Extend the hunk while the gap between changes is at most 2*ctx lines.
            std::size_t start = i >= ctx ? i - ctx : 0;
            std::size_t end = i;
            while (true) {
                while (end < ops.size() && ops[end].kind != op_kind::keep) ++end;
                std::size_t gap = end;
                while (gap < ops.size() && ops[gap].kind == op_kind::keep) ++gap;
                if (gap < ops.size() && gap - end <= 2 * ctx) {
                    end = gap;
                    continue;
                }
                end = std::min(ops.size(), end + ctx);
                break;
            }

            // Line position of the hunk on each side, also meaningful when a side is empty.
            std::size_t a_start = 0, b_start = 0, a_len = 0, b_len = 0;
            for (std::size_t k = 0; k < start; ++k) {
                if (ops[k].kind != op_kind::insert) ++a_start;
                if (ops[k].kind != op_kind::remove) ++b_start;
            }
            std::string body;
            for (std::size_t k = start; k < end; ++k) {
                switch (ops[k].kind) {
                    case op_kind::keep:
                        emit_line(body, ' ', a[ops[k].a]);
                        ++a_len, ++b_len;
                        break;
                    case op_kind::remove:
                        emit_line(body, '-', a[ops[k].a]);
                        ++a_len;
                        break;
                    case op_kind::insert:
                        emit_line(body, '+', b[ops[k].b]);
                        ++b_len;
                        break;
                }
            }
            out += "@@ -" + range(a_start, a_len) + " +" + range(b_start, b_len) + " @@\n";
            out += body;
            i = end;
        }
        return out;
    }

    std::string unified_diff(const source_tree& before, const source_tree& after, int context) {
        std::set<std::string> paths;
        for (const auto& [p, _] : before.files) paths.insert(p);
        for (const auto& [p, _] : after.files) paths.insert(p);
        std::string out;
        for (const auto& p : paths) {
            auto bi = before.files.find(p);
            auto ai = after.files.find(p);
            std::string_view bt = bi == before.files.end() ? std::string_view{} : std::string_view{bi->second};
            std::string_view at = ai == after.files.end() ? std::string_view{} : std::string_view{ai->second};
            out += unified_diff_file(p, bt, at, context);
        }
        return out;
    }

    std::string patch_fingerprint(const patch& p) {
        std::string canon;
        for (const auto& e : p.edits) {
            for (const auto* field : {&e.file, &e.original, &e.replaced}) {
                canon += std::to_string(field->size());
                canon += ':';
                canon += *field;
            }
            canon += ';';
        }
        return sha256_hex(canon);
    }

}  // namespace crashfix
