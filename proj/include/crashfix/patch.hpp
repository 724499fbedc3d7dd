#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace crashfix {

    /// A replace-based code modification: `original` must occur exactly once in `file`.
    struct edit {
        std::string file{};
        std::string original{};
        std::string replaced{};
        std::string reason{};

        bool operator==(const edit&) const = default;
    };

    struct patch {
        std::string solution_text{};
        std::vector<edit> edits{};

        bool operator==(const patch&) const = default;
    };

    /// In-memory snapshot of a workspace: relative path (generic separators) -> file bytes.
    struct source_tree {
        std::map<std::string, std::string> files{};

        static source_tree load(const std::filesystem::path& dir);
        /// Writes every file below `dir`, creating directories as needed.
        void write_to(const std::filesystem::path& dir) const;

        bool operator==(const source_tree&) const = default;
    };

    /// Number of (possibly overlapping) occurrences of `snippet` in `text`, comparing after
    /// normalizing line endings to `\n` and stripping trailing whitespace from every line.
    std::size_t count_matches(std::string_view text, std::string_view snippet);

    /// Replaces the single normalized occurrence of `e.original` in `text` by `e.replaced`,
    /// leaving every other byte untouched. Throws error{no_match} or error{ambiguous_match}.
    std::string apply_edit_to_text(std::string_view text, const edit& e);

    /// Throws error{file_missing}, error{no_match}, error{ambiguous_match}.
    source_tree apply_edit(const source_tree& tree, const edit& e);

    struct patch_result {
        source_tree tree{};
        std::string diff{};
    };

    /// Applies the edits in order (later edits see earlier results). All-or-nothing: the
    /// input is never modified and the first failing edit propagates its error.
    /// An empty edit list throws error{invalid_patch}.
    patch_result apply_patch(const source_tree& tree, const patch& p);

    /// Applies `p` to files under `dir`. On failure no file is touched.
    std::string apply_patch_in_place(const std::filesystem::path& dir, const patch& p);

    /// Distinct edit files in first-occurrence order.
    std::vector<std::string> modified_files(const patch& p);

    /// Unified diff (`---/+++/@@`, 3 context lines) of every file that differs between the
    /// two trees, in path order. Empty when the trees are identical.
    std::string unified_diff(const source_tree& before, const source_tree& after, int context = 3);

    /// Unified diff of a single file; empty when the contents are equal.
    std::string unified_diff_file(std::string_view path, std::string_view before, std::string_view after, int context = 3);

    /// Stable content hash of the edits (file, original, replaced); reasons and the
    /// solution text are not part of the fingerprint.
    std::string patch_fingerprint(const patch& p);

}  // namespace crashfix
