#pragma once

#include "crashfix/crash_report.hpp"
#include "crashfix/trace.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crashfix {

    struct minimizer_config {
        std::size_t max_records{200};
        std::size_t max_period{8};
        std::size_t min_repeats{2};

        /// Throws error{config_error} when an invariant is violated.
        void validate() const;
    };

    /// Inclusive index range into a (pid-filtered) trace, plus the indices that matched a frame.
    struct anchor_span {
        std::size_t first{};
        std::size_t last{};
        std::vector<std::size_t> matched{};

        std::size_t size() const noexcept { return last - first + 1; }
        bool operator==(const anchor_span&) const = default;
    };

    struct minimized_trace {
        std::vector<trace_record> records{};
        /// Inclusive span of the anchor inside `records`.
        std::size_t anchor_first{};
        std::size_t anchor_last{};
        std::string candidate_file{};
        std::int64_t pid{};
        /// Records contributed by each expansion direction.
        std::size_t backward_added{};
        std::size_t forward_added{};

        bool operator==(const minimized_trace&) const = default;
    };

    /// Scans `filtered` from its end toward its start matching, innermost frame first, the
    /// report frames that belong to `candidate_file`. Frames without a traced occurrence are
    /// skipped. The latest occurrence consistent with frame order wins.
    /// Throws error{no_anchor} when nothing matches.
    anchor_span anchor(const trace& filtered, const crash_report& report, std::string_view candidate_file);

    /// Grows `span` backward to completion, then forward, one record at a time. A direction
    /// stops at the trace boundary, when the record budget would be exceeded, or when the
    /// names it has added end in `min_repeats` identical blocks of some period
    /// `k <= max_period`; in that case the final block of k names is dropped.
    /// A span longer than the budget is clipped to its most recent `max_records` records.
    minimized_trace expand(const trace& filtered, const anchor_span& span, const minimizer_config& cfg);

    /// filter_by_pid -> anchor -> expand. Throws error{empty_trace} when no record has `pid`.
    minimized_trace minimize(const trace& t,
                             const crash_report& report,
                             std::string_view candidate_file,
                             std::int64_t pid,
                             const minimizer_config& cfg = {});

    /// Length of the shortest period `k <= max_period` such that `names` ends with
    /// `min_repeats` identical consecutive blocks of length k, or 0 if there is none.
    std::size_t trailing_repeat_period(std::span<const std::string_view> names, const minimizer_config& cfg);

    // ---- Complete Intersection Score -------------------------------------------------------

    /// 1 iff every edited function name occurs among the minimized records; an empty set scores 1.
    int score_cis(const minimized_trace& minimized, const std::set<std::string>& edited_funcs);
    int score_cis(std::span<const trace_record> records, const std::set<std::string>& edited_funcs);

    struct cis_entry {
        std::string bug_id{};
        int score{};
    };

    struct cis_report {
        std::vector<cis_entry> per_bug{};
        int total{};
    };

    cis_report corpus_cis(std::vector<cis_entry> scores);

    /// The five nested record sets used to attribute CIS gains to each minimization step.
    enum class cis_stage { stack_matched, anchored, backward, forward, full_pid };

    inline constexpr std::array<cis_stage, 5> all_cis_stages{
            cis_stage::stack_matched, cis_stage::anchored, cis_stage::backward, cis_stage::forward, cis_stage::full_pid};

    std::string_view to_string(cis_stage s);
    /// Throws error{config_error} on an unknown name.
    cis_stage parse_cis_stage(std::string_view name);

    /// Records of the pid-filtered trace that make up the given stage. Stages before full_pid
    /// are empty when anchoring fails.
    std::vector<trace_record> stage_records(const trace& t,
                                            const crash_report& report,
                                            std::string_view candidate_file,
                                            std::int64_t pid,
                                            cis_stage stage,
                                            const minimizer_config& cfg = {});

}  // namespace crashfix
