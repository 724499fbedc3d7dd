#include "crashfix/error.hpp"

namespace crashfix {

    std::string_view to_string(errc code) {
        switch (code) {
            case errc::malformed_line:
                return "malformed_line";
            case errc::candidate_missing:
                return "candidate_missing";
            case errc::instrumentation_failed:
                return "instrumentation_failed";
            case errc::no_anchor:
                return "no_anchor";
            case errc::empty_trace:
                return "empty_trace";
            case errc::file_missing:
                return "file_missing";
            case errc::no_match:
                return "no_match";
            case errc::ambiguous_match:
                return "ambiguous_match";
            case errc::invalid_patch:
                return "invalid_patch";
            case errc::missing_solution_tag:
                return "missing_solution_tag";
            case errc::unbalanced_tags:
                return "unbalanced_tags";
            case errc::no_modifications:
                return "no_modifications";
            case errc::missing_tag:
                return "missing_tag";
            case errc::invalid_choice:
                return "invalid_choice";
            case errc::backend_unavailable:
                return "backend_unavailable";
            case errc::baseline_build_failed:
                return "baseline_build_failed";
            case errc::harness_error:
                return "harness_error";
            case errc::unknown_patch:
                return "unknown_patch";
            case errc::config_error:
                return "config_error";
        }
        return "unknown";
    }

    error::error(errc code, std::string message, error_detail detail)
        : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

}  // namespace crashfix
