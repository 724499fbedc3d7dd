#pragma once

#include "crashfix/backend.hpp"
#include "crashfix/crash_report.hpp"
#include "crashfix/minimizer.hpp"
#include "crashfix/patch.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crashfix {

    inline constexpr std::string_view prompt_template_version = "v1";

    struct repair_context {
        std::string bug_id{};
        crash_report report{};
        /// (relative path, exact file contents), in localization order.
        std::vector<std::pair<std::string, std::string>> candidate_files{};
        std::optional<minimized_trace> trace{};
    };

    struct hypothesis {
        std::string text{};
        int id{};
        double temperature{};
        std::string backend{};
        /// Soft check: the text carries a fenced code block longer than the configured limit.
        bool long_code_warning{};
    };

    // ---- prompts ---------------------------------------------------------------------------

    /// Raw text of a versioned template asset (e.g. "hypothesis", "patch").
    std::string_view template_text(std::string_view name);

    std::string assemble_hypothesis_prompt(const repair_context& ctx);
    std::string assemble_patch_prompt(const repair_context& ctx, std::string_view hypothesis_text);
    std::string assemble_hypothesis_selection_prompt(const repair_context& ctx, std::span<const hypothesis> candidates);
    std::string assemble_patch_selection_prompt(const repair_context& ctx,
                                                std::string_view hypothesis_text,
                                                std::span<const patch> candidates);

    /// The execution block body: one `func()` per line, earliest first.
    std::string render_execution(const minimized_trace& t);

    // ---- response parsing ------------------------------------------------------------------

    /// Inner text of the first `<solution>...</solution>` pair, trimmed.
    /// Throws error{missing_solution_tag} or error{unbalanced_tags}.
    std::string parse_solution(std::string_view response);

    /// Parses the `// Modification N` grammar. Snippet text between `<original>`/`<patched>`
    /// tags is kept byte-for-byte apart from the single newline that follows the opening tag
    /// and the one that precedes the closing tag.
    /// Throws error{no_modifications}, error{missing_tag}, error{unbalanced_tags}.
    patch parse_modifications(std::string_view response);

    /// Renders a patch in the `// Modification N` grammar; parse_modifications inverts it.
    std::string render_modifications(const patch& p);

    /// The 1-based k of `<choice>k</choice>` converted to a 0-based index.
    /// Throws error{invalid_choice} when missing or not in [1, count].
    std::size_t parse_choice(std::string_view response, std::size_t count);

    // ---- generation and selection ------------------------------------------------------------

    struct agent_settings {
        double gen_temperature{0.8};
        double select_temperature{0.2};
        int max_retries{1};
        std::size_t long_code_lines{20};
        std::uint64_t seed{0};
    };

    struct selection {
        std::size_t index{};
        bool backend_called{};
        bool fell_back{};
    };

    /// Runs the generation and selection steps of one debug cycle against a backend. Call keys
    /// carry (bug_id, stage, tree_id, node_depth, per-stage call index); all backend traffic is
    /// accounted in stats().
    class agent {
      public:
        agent(text_backend& backend, agent_settings settings, std::string bug_id, int tree_id, int node_depth,
              int node_id = 0);

        /// n calls at gen_temperature. Unparseable replies are retried up to max_retries times
        /// and then dropped. Throws error{backend_unavailable} when every call failed at the
        /// backend.
        std::vector<hypothesis> generate_hypotheses(const repair_context& ctx, int n);

        /// Self-reflection over the candidates. A single candidate is chosen without a call; an
        /// invalid answer after all retries falls back to index 0 with a warning.
        selection select_hypothesis(const repair_context& ctx, std::span<const hypothesis> candidates);

        std::vector<patch> generate_patches(const repair_context& ctx, const hypothesis& h, int n);

        /// Self-consistency selection of the compile-filtered patches against `h`.
        selection select_patch(const repair_context& ctx, const hypothesis& h, std::span<const patch> candidates);

        const call_stats& stats() const noexcept { return stats_; }
        const std::vector<std::string>& warnings() const noexcept { return warnings_; }

      private:
        struct reply {
            std::optional<std::string> text{};
        };

        reply call(std::string_view stage_name, const std::string& prompt, double temperature);

        template <typename Parse>
        auto generate(std::string_view stage_name, const std::string& prompt, int n, Parse parse)
                -> std::vector<decltype(parse(std::string_view{}))>;

        selection select(std::string_view stage_name, const std::string& prompt, std::size_t count);

        text_backend& backend_;
        agent_settings settings_;
        std::string bug_id_;
        int tree_id_;
        int node_depth_;
        int node_id_;
        std::vector<std::pair<std::string, int>> call_counters_{};
        call_stats stats_{};
        std::vector<std::string> warnings_{};
        int next_hypothesis_id_{1};
    };

}  // namespace crashfix
