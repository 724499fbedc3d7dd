#pragma once

#include "crashfix/backend.hpp"
#include "crashfix/minimizer.hpp"
#include "crashfix/search.hpp"

#include <filesystem>
#include <optional>

#include <json.hpp>

namespace crashfix {

    /// Everything one `crashfix run` needs. Loaded from a JSON file whose relative paths are
    /// resolved against the file's directory:
    /// {
    ///   "bundle": "bundles/toy_null",
    ///   "out": "out/toy_null",
    ///   "use_execution_trace": true,
    ///   "cache_dir": null,
    ///   "forest":    {"num_trees": 1, "max_depth": 3, "branching": 2, "restarts": 2,
    ///                 "n_hyp": 3, "n_patch": 5, "seed": 0, "parallel_trees": true,
    ///                 "parallel_siblings": false, "stop_forest_on_success": false},
    ///   "backend":   {"kind": "scripted", "fixture": "transcript.json", "endpoint": "",
    ///                 "model": "", "credential_env": "CRASHFIX_API_KEY",
    ///                 "gen_temperature": 0.8, "select_temperature": 0.2,
    ///                 "max_retries": 1, "timeout_s": 120},
    ///   "minimizer": {"max_records": 200, "max_period": 8, "min_repeats": 2},
    ///   "agent":     {"long_code_lines": 20}
    /// }
    /// Every key is optional except "bundle"; unknown keys are rejected.
    struct run_config {
        std::filesystem::path bundle{};
        std::filesystem::path out_dir{"crashfix-out"};
        bool use_execution_trace{true};
        std::optional<std::filesystem::path> cache_dir{};
        forest_config forest{};
        backend_config backend{};
        minimizer_config minimizer{};
        std::size_t long_code_lines{20};

        /// Throws error{config_error}.
        static run_config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
        static run_config from_file(const std::filesystem::path& p);

        /// Throws error{config_error}.
        void validate() const;
    };

    struct campaign_result {
        forest_result forest{};
        std::optional<minimized_trace> trace{};
        nlohmann::json report{};
        std::vector<std::string> notes{};
    };

    /// warm cache -> (optional) instrumented baseline run and minimization -> forest search ->
    /// `forest_report.json`, `summary.txt` and, when collected, `trace.min.txt` in out_dir.
    /// `backend` overrides the configured one when given.
    campaign_result run_campaign(const run_config& cfg, text_backend* backend = nullptr);

    /// pid of the crashing process: from the report text, else the last traced record.
    std::optional<std::int64_t> infer_pid(const trace& t, std::string_view report_text);

}  // namespace crashfix
