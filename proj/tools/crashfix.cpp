#include "crashfix/agent.hpp"
#include "crashfix/campaign.hpp"
#include "crashfix/error.hpp"
#include "crashfix/fs_util.hpp"
#include "crashfix/harness.hpp"
#include "crashfix/minimizer.hpp"
#include "crashfix/patch.hpp"
#include "crashfix/search.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace crashfix;

namespace {

    constexpr int exit_ok = 0;
    constexpr int exit_task_failure = 1;
    constexpr int exit_usage = 2;

    int exit_code_for(errc code) {
        switch (code) {
            case errc::config_error:
            case errc::candidate_missing:
            case errc::baseline_build_failed:
                return exit_usage;
            default:
                return exit_task_failure;
        }
    }

    void emit(const std::optional<fs::path>& out, const std::string& text) {
        if (out) write_file(*out, text);
        else
            std::cout << text;
    }

    struct run_options {
        std::optional<fs::path> config{};
        std::optional<fs::path> bundle{};
        std::optional<int> trees{}, depth{}, branching{}, restarts{};
        std::optional<std::uint64_t> seed{};
        bool no_exec_trace{false};
        std::optional<std::string> backend{};
        std::optional<fs::path> fixture{};
        std::optional<fs::path> out{};
        std::optional<fs::path> cache_dir{};
        bool quiet{false};
    };

    int cmd_run(const run_options& o) {
        run_config cfg = o.config ? run_config::from_file(*o.config) : run_config{};
        if (o.bundle) cfg.bundle = *o.bundle;
        if (o.trees) cfg.forest.num_trees = *o.trees;
        if (o.depth) cfg.forest.max_depth = *o.depth;
        if (o.branching) cfg.forest.branching = *o.branching;
        if (o.restarts) cfg.forest.restarts = *o.restarts;
        if (o.seed) cfg.forest.seed = *o.seed;
        if (o.no_exec_trace) cfg.use_execution_trace = false;
        if (o.backend) cfg.backend.kind = *o.backend == "http" ? backend_kind::http : backend_kind::scripted;
        if (o.fixture) cfg.backend.fixture = *o.fixture;
        if (o.out) cfg.out_dir = *o.out;
        if (o.cache_dir) cfg.cache_dir = *o.cache_dir;

        auto result = run_campaign(cfg);
        if (!o.quiet) std::cout << render_summary(result.report);
        std::cout << "report: " << (cfg.out_dir / "forest_report.json").string() << "\n";
        return result.forest.resolved ? exit_ok : exit_task_failure;
    }

    struct minimize_options {
        fs::path trace{}, report{};
        std::string candidate{};
        std::optional<std::int64_t> pid{};
        minimizer_config cfg{};
        std::optional<fs::path> out{};
    };

    int cmd_minimize(const minimize_options& o) {
        auto t = parse_trace(read_file(o.trace));
        auto report_text = read_file(o.report);
        auto pid = o.pid ? o.pid : infer_pid(t, report_text);
        if (!pid) throw error{errc::empty_trace, "trace has no records and the report names no pid"};
        auto m = minimize(t, parse_crash_report(report_text), o.candidate, *pid, o.cfg);
        trace out{m.records, {}};
        emit(o.out, serialize_trace(out));
        std::cerr << "minimized " << filter_by_pid(t, *pid).records.size() << " records of pid " << *pid << " to "
                  << m.records.size() << " (anchor " << m.anchor_last - m.anchor_first + 1 << ", backward "
                  << m.backward_added << ", forward " << m.forward_added << ")\n";
        return exit_ok;
    }

    // Manifest:
    // { "minimizer": {...}, "bugs": [ { "bug_id", "trace", "report", "candidate",
    //   "pid" (optional), "edited_functions": [...] } ] }
    int cmd_cis(const fs::path& manifest, const std::vector<std::string>& stage_names, const std::optional<fs::path>& out) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(manifest));
        } catch (const std::exception& e) {
            throw error{errc::config_error, "cannot load CIS manifest: " + std::string{e.what()}};
        }
        const auto base = fs::absolute(manifest).parent_path();
        std::vector<cis_stage> stages;
        for (const auto& s : stage_names) stages.push_back(parse_cis_stage(s));
        if (stages.empty()) stages.assign(all_cis_stages.begin(), all_cis_stages.end());

        minimizer_config mcfg;
        std::map<cis_stage, std::vector<cis_entry>> scores;
        try {
            if (j.contains("minimizer")) {
                const auto& m = j.at("minimizer");
                mcfg.max_records = m.value("max_records", mcfg.max_records);
                mcfg.max_period = m.value("max_period", mcfg.max_period);
                mcfg.min_repeats = m.value("min_repeats", mcfg.min_repeats);
            }
            mcfg.validate();
            for (const auto& bug : j.value("bugs", nlohmann::json::array())) {
                auto id = bug.at("bug_id").get<std::string>();
                auto t = parse_trace(read_file(base / bug.at("trace").get<std::string>()));
                auto report_text = read_file(base / bug.at("report").get<std::string>());
                auto report = parse_crash_report(report_text);
                auto candidate = bug.at("candidate").get<std::string>();
                auto edited = bug.at("edited_functions").get<std::set<std::string>>();
                std::optional<std::int64_t> pid;
                if (bug.contains("pid")) pid = bug.at("pid").get<std::int64_t>();
                else
                    pid = infer_pid(t, report_text);
                for (auto s : stages) {
                    auto recs = pid ? stage_records(t, report, candidate, *pid, s, mcfg) : std::vector<trace_record>{};
                    scores[s].push_back({id, score_cis(recs, edited)});
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw error{errc::config_error, "invalid CIS manifest: " + std::string{e.what()}};
        }

        nlohmann::json report = nlohmann::json::object();
        for (auto s : stages) {
            auto r = corpus_cis(scores[s]);
            nlohmann::json per_bug = nlohmann::json::array();
            for (const auto& e : r.per_bug) per_bug.push_back({{"bug_id", e.bug_id}, {"score", e.score}});
            report[std::string{to_string(s)}] = {{"total", r.total}, {"per_bug", per_bug}};
        }
        emit(out, report.dump(2) + "\n");
        return exit_ok;
    }

    int cmd_apply(const fs::path& workspace, const fs::path& patch_file, bool dry_run) {
        if (!fs::is_directory(workspace))
            throw error{errc::config_error, "workspace is not a directory: " + workspace.string()};
        auto p = parse_modifications(read_file(patch_file));
        std::string diff = dry_run ? apply_patch(source_tree::load(workspace), p).diff : apply_patch_in_place(workspace, p);
        std::cout << diff;
        return exit_ok;
    }

    int cmd_check_compile(const fs::path& bundle_path, const fs::path& patch_file) {
        auto p = parse_modifications(read_file(patch_file));
        local_harness h{bug_bundle::load(bundle_path)};
        auto res = h.check_compile(h.baseline(), p);
        for (const auto& f : res.checked) {
            bool failed = false;
            for (const auto& fl : res.failures) failed = failed || fl.file == f;
            std::cout << (failed ? "FAIL " : "PASS ") << f << "\n";
        }
        for (const auto& fl : res.failures) {
            if (std::find(res.checked.begin(), res.checked.end(), fl.file) == res.checked.end())
                std::cout << "FAIL " << (fl.file.empty() ? "<patch>" : fl.file) << "\n";
            std::cout << fl.log << (fl.log.ends_with('\n') ? "" : "\n");
        }
        return res.pass ? exit_ok : exit_task_failure;
    }

    int cmd_summarize(const fs::path& report_file) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(report_file));
        } catch (const std::exception& e) {
            throw error{errc::config_error, "cannot load report: " + std::string{e.what()}};
        }
        std::cout << render_summary(j);
        return j.value("resolved", false) ? exit_ok : exit_task_failure;
    }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crashfix: crash repair with execution-trace-guided debug search"};
    app.require_subcommand(1);

    run_options ro;
    auto* run = app.add_subcommand("run", "Run a repair campaign on one bug bundle");
    run->add_option("--config", ro.config, "JSON run config")->check(CLI::ExistingFile);
    run->add_option("--bundle", ro.bundle, "Bundle directory or manifest");
    run->add_option("--trees", ro.trees, "Number of trees")->check(CLI::PositiveNumber);
    run->add_option("--depth", ro.depth, "Maximum tree depth")->check(CLI::PositiveNumber);
    run->add_option("--branching", ro.branching, "Children per node")->check(CLI::PositiveNumber);
    run->add_option("--restarts", ro.restarts, "Hypothesis restarts per cycle")->check(CLI::NonNegativeNumber);
    run->add_option("--seed", ro.seed, "Sampling seed");
    run->add_flag("--no-exec-trace", ro.no_exec_trace, "Do not collect or prompt with an execution trace");
    run->add_option("--backend", ro.backend, "Backend kind")->check(CLI::IsMember({"http", "scripted"}));
    run->add_option("--fixture", ro.fixture, "Scripted backend transcript");
    run->add_option("--out", ro.out, "Output directory");
    run->add_option("--cache-dir", ro.cache_dir, "Keep the build cache here");
    run->add_flag("--quiet", ro.quiet, "Only print the report path");

    minimize_options mo;
    auto* min = app.add_subcommand("minimize", "Minimize an execution trace around a crash");
    min->add_option("--trace", mo.trace, "Trace file (<pid> <file> <func> per line)")->required()->check(CLI::ExistingFile);
    min->add_option("--report", mo.report, "Crash report")->required()->check(CLI::ExistingFile);
    min->add_option("--candidate", mo.candidate, "Candidate source file")->required();
    min->add_option("--pid", mo.pid, "Crashing pid (default: from the report, else the last record)");
    min->add_option("--max-records", mo.cfg.max_records, "Record budget");
    min->add_option("--max-period", mo.cfg.max_period, "Longest repeat period checked");
    min->add_option("--min-repeats", mo.cfg.min_repeats, "Repeats that stop expansion");
    min->add_option("--out", mo.out, "Output file (default: stdout)");

    fs::path cis_manifest;
    std::vector<std::string> cis_stages;
    std::optional<fs::path> cis_out;
    auto* cis = app.add_subcommand("cis", "Complete Intersection Score over a corpus");
    cis->add_option("manifest", cis_manifest, "CIS manifest")->required()->check(CLI::ExistingFile);
    cis->add_option("--stage", cis_stages, "stack, anchor, backward, forward or full (repeatable; default all)");
    cis->add_option("--out", cis_out, "Output file (default: stdout)");

    fs::path apply_ws, apply_patch_file;
    bool dry_run = false;
    auto* apply = app.add_subcommand("apply", "Apply a `// Modification` patch to a directory and print the diff");
    apply->add_option("workspace", apply_ws, "Directory to patch")->required();
    apply->add_option("patch", apply_patch_file, "Patch file")->required()->check(CLI::ExistingFile);
    apply->add_flag("--dry-run", dry_run, "Print the diff without writing");

    fs::path cc_bundle, cc_patch;
    auto* cc = app.add_subcommand("check-compile", "Compile only the files a patch modifies");
    cc->add_option("bundle", cc_bundle, "Bundle directory or manifest")->required();
    cc->add_option("patch", cc_patch, "Patch file")->required()->check(CLI::ExistingFile);

    fs::path summary_report;
    auto* summarize = app.add_subcommand("summarize", "Render a forest report as text");
    summarize->add_option("report", summary_report, "forest_report.json")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*run) return cmd_run(ro);
        if (*min) return cmd_minimize(mo);
        if (*cis) return cmd_cis(cis_manifest, cis_stages, cis_out);
        if (*apply) return cmd_apply(apply_ws, apply_patch_file, dry_run);
        if (*cc) return cmd_check_compile(cc_bundle, cc_patch);
        if (*summarize) return cmd_summarize(summary_report);
    } catch (const error& e) {
        std::cerr << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}
