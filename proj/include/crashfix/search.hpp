#pragma once

#include "crashfix/agent.hpp"
#include "crashfix/harness.hpp"

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace crashfix {

    struct forest_config {
        int num_trees{1};
        int max_depth{3};
        int branching{2};
        /// Restarts from hypothesis generation when no patch survives the compile filter.
        int restarts{2};
        int n_hyp{3};
        int n_patch{5};
        std::uint64_t seed{0};
        bool parallel_trees{true};
        bool parallel_siblings{false};
        /// Stop starting nodes in every tree once any tree resolves. Off by default so that
        /// per-tree accounting does not depend on timing.
        bool stop_forest_on_success{false};

        /// Throws error{config_error}.
        void validate() const;
        /// Upper bound on executed cycles for one tree: sum of B^i for i < D.
        std::size_t tree_budget() const;
    };

    struct cycle_state {
        std::shared_ptr<const source_tree> codebase{};
        /// Content hash of `codebase`.
        std::string codebase_ref{};
        crash_report report{};
        int depth{1};
        int tree_id{};
        int node_id{};
        std::optional<int> parent_id{};
    };

    enum class outcome_kind { resolved, crash_persists, no_compilable_patch, harness_error };
    std::string_view to_string(outcome_kind k);

    struct cycle_timings {
        double hypothesis_s{};
        double patch_s{};
        double compile_check_s{};
        double build_s{};
        double reproduce_s{};
        double total_s{};
    };

    /// One pass from hypothesis generation to the compile filter.
    struct cycle_attempt {
        std::vector<int> hypothesis_ids{};
        int selected_hypothesis{};
        std::size_t patches_generated{};
        std::size_t patches_compiled{};
        std::string note{};
    };

    struct cycle_outcome {
        outcome_kind kind{outcome_kind::no_compilable_patch};
        std::optional<patch> applied{};
        std::string fingerprint{};
        /// Diff of this cycle's patch against the node's input codebase.
        std::string diff{};
        std::string hypothesis{};
        /// Post-patch codebase; set for resolved and crash_persists.
        std::shared_ptr<const source_tree> codebase{};
        crash_report report{};
        std::string detail{};
        std::vector<cycle_attempt> attempts{};
        std::size_t files_recompiled{};
        int harness_retries{};
        call_stats calls{};
        std::vector<std::string> warnings{};
        cycle_timings timings{};
    };

    /// Services shared by every cycle of a run. All of them must accept concurrent calls.
    struct search_deps {
        text_backend& backend;
        harness& builder;
        std::string bug_id{};
        std::vector<std::string> candidate_files{};
        /// Minimized execution trace; prompts carry no execution block when absent.
        std::optional<minimized_trace> trace{};
        agent_settings agent{};
    };

    cycle_outcome run_cycle(const cycle_state& state, const search_deps& deps, const forest_config& cfg);

    struct node_record {
        int tree_id{};
        int node_id{};
        std::optional<int> parent_id{};
        int depth{};
        std::string codebase_ref{};
        cycle_outcome outcome{};
    };

    struct tree_result {
        int tree_id{};
        bool resolved{};
        std::vector<node_record> nodes{};
        std::optional<int> winning_node{};
        /// Cumulative diff of the winning node's codebase against the bundle baseline.
        std::string winning_diff{};
        call_stats calls{};
        double seconds{};
    };

    /// Breadth-first expansion: a node whose crash persists at depth d < D spawns B children
    /// that inherit its patched codebase and fresh report. Once a node resolves, no further
    /// node of the tree starts. `halt` (optional) stops the tree from outside.
    tree_result run_tree(const cycle_state& root, const search_deps& deps, const forest_config& cfg,
                         std::atomic<bool>* halt = nullptr);

    struct forest_result {
        std::string bug_id{};
        bool resolved{};
        std::vector<tree_result> trees{};
        call_stats calls{};
        std::size_t cycles{};
        double seconds{};
    };

    /// num_trees independent trees over the same root state with distinct tree ids.
    forest_result run_forest(const source_tree& baseline, const crash_report& report, const search_deps& deps,
                             const forest_config& cfg);

    // ---- report ------------------------------------------------------------------------------

    /// Everything that is not a search result but belongs in the report.
    struct report_context {
        forest_config config{};
        std::string backend{};
        bool execution_trace{};
        std::optional<minimized_trace> trace{};
        /// Free-form timings of the surrounding campaign (cache warm-up etc.).
        nlohmann::json extra_timing = nlohmann::json::object();
    };

    /// JSON report. Every wall-clock value lives under the top-level "timing" key; the rest
    /// is a pure function of the inputs.
    nlohmann::json forest_report(const forest_result& r, const report_context& ctx);

    /// Human-readable summary rendered from a report alone.
    std::string render_summary(const nlohmann::json& report);

}  // namespace crashfix
