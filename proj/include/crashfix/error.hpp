#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crashfix {

    enum class errc {
        malformed_line,
        candidate_missing,
        instrumentation_failed,
        no_anchor,
        empty_trace,
        file_missing,
        no_match,
        ambiguous_match,
        invalid_patch,
        missing_solution_tag,
        unbalanced_tags,
        no_modifications,
        missing_tag,
        invalid_choice,
        backend_unavailable,
        baseline_build_failed,
        harness_error,
        unknown_patch,
        config_error,
    };

    std::string_view to_string(errc code);

    /// Extra payload attached to an error. Which fields are meaningful depends on the code:
    /// `line_no` for malformed_line, `count` for ambiguous_match, `block_no`/`tag` for
    /// missing_tag, `path` for file and candidate errors.
    struct error_detail {
        std::size_t line_no{};
        std::size_t count{};
        std::size_t block_no{};
        std::string tag{};
        std::string path{};
    };

    class error : public std::runtime_error {
      public:
        error(errc code, std::string message, error_detail detail = {});

        errc code() const noexcept { return code_; }
        const error_detail& detail() const noexcept { return detail_; }

      private:
        errc code_;
        error_detail detail_;
    };

}  // namespace crashfix
