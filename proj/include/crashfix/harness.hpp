#pragma once

#include "crashfix/crash_report.hpp"
#include "crashfix/fs_util.hpp"
#include "crashfix/patch.hpp"
#include "crashfix/trace.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

namespace crashfix {

    struct crash_pattern {
        std::string name{};
        std::string regex{};
    };

    /// Sanitizer banners plus the harness sentinel.
    std::vector<crash_pattern> default_crash_patterns();

    /// Line the harness appends to reproducer output when the process died from a signal.
    inline constexpr std::string_view harness_sentinel_prefix = "HARNESS: CRASH";

    /// Shell command templates. Placeholders are replaced by shell-quoted values:
    ///   compile        {file} {object} {workspace}      run in the workspace
    ///   compile_check  same as compile; defaults to compile
    ///   link           {objects} {binary} {workspace}
    ///   reproduce      {binary} {workspace} {trace_log}  run in the workspace
    struct command_set {
        std::string compile{};
        std::string compile_check{};
        std::string link{};
        std::string reproduce{};
    };

    /// A bug bundle as described by its manifest (`bundle.json`):
    /// {
    ///   "bug_id": "toy_null",
    ///   "workspace": "src",                     // relative to the manifest
    ///   "localization_candidates": ["list.c"],  // relative to the workspace
    ///   "report": "report.txt",                 // crash report of the unpatched program
    ///   "sources": ["main.c", "list.c"],        // optional; default: every *.c in the workspace
    ///   "crash_patterns": ["^BUG: ", {"name": "abort", "regex": "Aborted"}],  // optional
    ///   "reproduce_timeout_s": 30,              // optional
    ///   "commands": {"compile": ..., "compile_check": ..., "link": ..., "reproduce": ...}
    /// }
    struct bug_bundle {
        std::string bug_id{};
        std::filesystem::path root{};
        std::filesystem::path workspace{};
        std::vector<std::string> localization_candidates{};
        std::vector<std::string> sources{};
        crash_report report{};
        command_set commands{};
        std::vector<crash_pattern> crash_patterns{};
        std::chrono::milliseconds reproduce_timeout{std::chrono::seconds{30}};

        /// Accepts the manifest file or the directory holding `bundle.json`.
        /// Throws error{config_error} or error{candidate_missing}.
        static bug_bundle load(const std::filesystem::path& manifest_or_dir);
    };

    struct file_log {
        std::string file{};
        std::string log{};
    };

    struct compile_check_result {
        bool pass{};
        std::vector<std::string> checked{};
        std::vector<file_log> failures{};
        double seconds{};
    };

    /// Output of an incremental build. Owns its scratch directory.
    struct build_artifact {
        bool ok{};
        std::filesystem::path binary{};
        std::filesystem::path workspace{};
        std::vector<std::string> recompiled{};
        std::string log{};
        std::string fingerprint{};
        double seconds{};
        std::shared_ptr<void> scratch{};

        std::size_t files_recompiled() const noexcept { return recompiled.size(); }
    };

    enum class reproduce_status { resolved, crashed, harness_error };
    std::string_view to_string(reproduce_status s);

    struct reproduce_outcome {
        reproduce_status status{reproduce_status::resolved};
        crash_report report{};
        std::string output{};
        std::string detail{};
        bool timed_out{};
        double seconds{};
    };

    /// Compile-check, build and reproduce services. Implementations accept concurrent calls.
    class harness {
      public:
        virtual ~harness() = default;

        /// Source tree of the unpatched bundle; the root state of every debug tree.
        virtual const source_tree& baseline() const = 0;

        /// Compiles only the files the patch modifies, against `base` with `p` applied. No link.
        /// A patch that does not apply fails with the application error as its log.
        virtual compile_check_result check_compile(const source_tree& base, const patch& p) = 0;

        /// Builds `base` with `p` applied, recompiling only sources whose content differs from
        /// the cached baseline. Failures are reported through `ok` and `log`.
        virtual build_artifact build(const source_tree& base, const patch& p) = 0;

        virtual reproduce_outcome reproduce(const build_artifact& artifact) = 0;
    };

    struct cache_entry {
        std::string hash{};
        std::filesystem::path object{};
    };

    /// Warm build cache of one bundle: a pristine copy of the workspace, one object per
    /// source, content hashes of every tracked file and the baseline binary.
    struct cache_handle {
        std::string bug_id{};
        std::filesystem::path dir{};
        std::filesystem::path workspace{};
        std::map<std::string, cache_entry> objects{};
        /// Hashes of tracked non-source files (headers).
        std::map<std::string, std::string> headers{};
        std::filesystem::path baseline_binary{};
        source_tree tree{};
    };

    /// Runs real compiler and reproducer commands in private scratch directories.
    class local_harness final : public harness {
      public:
        /// Performs warm_cache. `cache_root` defaults to a temporary directory removed with the
        /// harness. Throws error{baseline_build_failed} with the build log.
        explicit local_harness(bug_bundle bundle, std::optional<std::filesystem::path> cache_root = std::nullopt);
        ~local_harness() override;

        const bug_bundle& bundle() const noexcept { return bundle_; }
        const cache_handle& cache() const noexcept { return cache_; }
        const source_tree& baseline() const override { return cache_.tree; }

        compile_check_result check_compile(const source_tree& base, const patch& p) override;
        build_artifact build(const source_tree& base, const patch& p) override;
        reproduce_outcome reproduce(const build_artifact& artifact) override;

        /// Artifact for the cached baseline binary.
        build_artifact baseline_artifact() const;

        /// Instruments the localization candidates, builds and runs the reproducer once and
        /// returns the collected function-entry trace. Throws error{harness_error}.
        trace collect_trace();

        /// Classifies reproducer output against the bundle's crash patterns.
        reproduce_outcome classify(std::string output, int term_signal, bool timed_out) const;

      private:
        std::string sanitize(std::string text, const std::filesystem::path& scratch) const;
        std::shared_ptr<void> new_scratch(std::string_view kind, std::filesystem::path& out);
        /// Compiles `sources` of the tree under `src` into `obj`; returns false with the log of
        /// the first failure.
        bool compile_all(const std::filesystem::path& src, const std::filesystem::path& obj,
                         const std::vector<std::string>& sources, const std::string& command_template,
                         std::string& log, const std::filesystem::path& scratch) const;
        bool link(const std::vector<std::filesystem::path>& objects, const std::filesystem::path& binary,
                  const std::filesystem::path& workspace, std::string& log, const std::filesystem::path& scratch) const;

        bug_bundle bundle_;
        std::unique_ptr<temp_dir> owned_cache_{};
        std::vector<std::regex> compiled_patterns_{};
        cache_handle cache_{};
        std::mutex scratch_mutex_{};
        std::uint64_t scratch_counter_{};
    };

    struct simulated_entry {
        bool compiles{true};
        bool builds{true};
        reproduce_status outcome{reproduce_status::crashed};
        std::string report{};
    };

    /// Test double: outcomes are looked up by patch fingerprint.
    ///
    /// Fixture:
    ///   { "default": {"compiles": true, "builds": true, "outcome": "crashed", "report": "..."},
    ///     "patches": { "<fingerprint>": { ... } } }
    /// `outcome` is one of "resolved", "crashed", "harness_error". Without a default, an
    /// unknown fingerprint throws error{unknown_patch}.
    class simulated_harness final : public harness {
      public:
        simulated_harness(source_tree baseline, std::map<std::string, simulated_entry> entries,
                          std::optional<simulated_entry> fallback);

        static simulated_harness from_json(source_tree baseline, const nlohmann::json& j);

        const source_tree& baseline() const override { return baseline_; }
        compile_check_result check_compile(const source_tree& base, const patch& p) override;
        build_artifact build(const source_tree& base, const patch& p) override;
        reproduce_outcome reproduce(const build_artifact& artifact) override;

      private:
        const simulated_entry& entry_for(const std::string& fingerprint) const;

        source_tree baseline_;
        std::map<std::string, simulated_entry> entries_;
        std::optional<simulated_entry> fallback_;
    };

}  // namespace crashfix
