#include "crashfix/campaign.hpp"

#include "crashfix/error.hpp"
#include "crashfix/fs_util.hpp"
#include "crashfix/harness.hpp"

#include <chrono>
#include <set>

namespace fs = std::filesystem;

namespace crashfix {

    namespace {

        void check_keys(const nlohmann::json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
            if (!j.is_object()) throw error{errc::config_error, std::string{where} + " must be an object"};
            for (const auto& [key, value] : j.items()) {
                bool known = false;
                for (auto a : allowed) known = known || key == a;
                if (!known) throw error{errc::config_error, "unknown key `" + key + "` in " + std::string{where}};
            }
        }

        template <typename T>
        void read_into(const nlohmann::json& j, const char* key, T& target) {
            if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
        }

        fs::path resolve(const fs::path& base, const std::string& p) {
            fs::path path{p};
            return (path.is_absolute() ? path : base / path).lexically_normal();
        }

    }  // namespace

    run_config run_config::from_json(const nlohmann::json& j, const fs::path& base_dir) {
        run_config cfg;
        try {
            check_keys(j, "config",
                       {"bundle", "out", "use_execution_trace", "cache_dir", "forest", "backend", "minimizer", "agent"});
            if (j.contains("bundle")) cfg.bundle = resolve(base_dir, j.at("bundle").get<std::string>());
            if (j.contains("out")) cfg.out_dir = resolve(base_dir, j.at("out").get<std::string>());
            read_into(j, "use_execution_trace", cfg.use_execution_trace);
            if (j.contains("cache_dir") && !j.at("cache_dir").is_null())
                cfg.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());

            if (j.contains("forest")) {
                const auto& f = j.at("forest");
                check_keys(f, "forest",
                           {"num_trees", "max_depth", "branching", "restarts", "n_hyp", "n_patch", "seed",
                            "parallel_trees", "parallel_siblings", "stop_forest_on_success"});
                read_into(f, "num_trees", cfg.forest.num_trees);
                read_into(f, "max_depth", cfg.forest.max_depth);
                read_into(f, "branching", cfg.forest.branching);
                read_into(f, "restarts", cfg.forest.restarts);
                read_into(f, "n_hyp", cfg.forest.n_hyp);
                read_into(f, "n_patch", cfg.forest.n_patch);
                read_into(f, "seed", cfg.forest.seed);
                read_into(f, "parallel_trees", cfg.forest.parallel_trees);
                read_into(f, "parallel_siblings", cfg.forest.parallel_siblings);
                read_into(f, "stop_forest_on_success", cfg.forest.stop_forest_on_success);
            }
            if (j.contains("backend")) {
                const auto& b = j.at("backend");
                check_keys(b, "backend",
                           {"kind", "fixture", "endpoint", "model", "credential_env", "gen_temperature",
                            "select_temperature", "max_retries", "timeout_s"});
                if (b.contains("kind")) {
                    auto kind = b.at("kind").get<std::string>();
                    if (kind == "scripted") cfg.backend.kind = backend_kind::scripted;
                    else if (kind == "http")
                        cfg.backend.kind = backend_kind::http;
                    else
                        throw error{errc::config_error, "unknown backend kind: " + kind};
                }
                if (b.contains("fixture")) cfg.backend.fixture = resolve(base_dir, b.at("fixture").get<std::string>());
                read_into(b, "endpoint", cfg.backend.endpoint);
                read_into(b, "model", cfg.backend.model);
                read_into(b, "credential_env", cfg.backend.credential_env);
                read_into(b, "gen_temperature", cfg.backend.gen_temperature);
                read_into(b, "select_temperature", cfg.backend.select_temperature);
                read_into(b, "max_retries", cfg.backend.max_retries);
                read_into(b, "timeout_s", cfg.backend.timeout_seconds);
            }
            if (j.contains("minimizer")) {
                const auto& m = j.at("minimizer");
                check_keys(m, "minimizer", {"max_records", "max_period", "min_repeats"});
                read_into(m, "max_records", cfg.minimizer.max_records);
                read_into(m, "max_period", cfg.minimizer.max_period);
                read_into(m, "min_repeats", cfg.minimizer.min_repeats);
            }
            if (j.contains("agent")) {
                const auto& a = j.at("agent");
                check_keys(a, "agent", {"long_code_lines"});
                read_into(a, "long_code_lines", cfg.long_code_lines);
            }
        } catch (const nlohmann::json::exception& e) {
            throw error{errc::config_error, std::string{"invalid run config: "} + e.what()};
        }
        return cfg;
    }

    run_config run_config::from_file(const fs::path& p) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(p));
        } catch (const std::exception& e) {
            throw error{errc::config_error, "cannot load config " + p.string() + ": " + e.what(),
                        error_detail{.path = p.string()}};
        }
        return from_json(j, fs::absolute(p).parent_path());
    }

    void run_config::validate() const {
        if (bundle.empty()) throw error{errc::config_error, "no bundle given"};
        if (!fs::exists(bundle))
            throw error{errc::config_error, "bundle not found: " + bundle.string(), error_detail{.path = bundle.string()}};
        if (out_dir.empty()) throw error{errc::config_error, "no output directory given"};
        forest.validate();
        backend.validate();
        minimizer.validate();
    }

    std::optional<std::int64_t> infer_pid(const trace& t, std::string_view report_text) {
        if (auto pid = report_pid(report_text)) return pid;
        if (!t.records.empty()) return t.records.back().pid;
        return std::nullopt;
    }

    campaign_result run_campaign(const run_config& cfg, text_backend* backend) {
        using clock = std::chrono::steady_clock;
        cfg.validate();
        campaign_result out;
        nlohmann::json timing = nlohmann::json::object();

        std::unique_ptr<text_backend> owned;
        if (!backend) {
            owned = make_backend(cfg.backend);
            backend = owned.get();
        }

        auto bundle = bug_bundle::load(cfg.bundle);
        auto t0 = clock::now();
        local_harness harness{bundle, cfg.cache_dir};
        timing["warm_cache_s"] = std::chrono::duration<double>(clock::now() - t0).count();

        if (cfg.use_execution_trace) {
            t0 = clock::now();
            auto full = harness.collect_trace();
            auto pid = infer_pid(full, bundle.report.raw_text);
            for (const auto& candidate : bundle.localization_candidates) {
                if (!pid) break;
                try {
                    out.trace = minimize(full, bundle.report, candidate, *pid, cfg.minimizer);
                    break;
                } catch (const error& e) {
                    out.notes.push_back("minimize " + candidate + ": " + e.what());
                }
            }
            if (!out.trace) out.notes.push_back("no execution trace could be anchored; prompts omit it");
            timing["trace_s"] = std::chrono::duration<double>(clock::now() - t0).count();
        }

        search_deps deps{
                .backend = *backend,
                .builder = harness,
                .bug_id = bundle.bug_id,
                .candidate_files = bundle.localization_candidates,
                .trace = out.trace,
                .agent = agent_settings{
                        .gen_temperature = cfg.backend.gen_temperature,
                        .select_temperature = cfg.backend.select_temperature,
                        .max_retries = cfg.backend.max_retries,
                        .long_code_lines = cfg.long_code_lines,
                        .seed = cfg.forest.seed}};
        out.forest = run_forest(harness.baseline(), bundle.report, deps, cfg.forest);

        report_context rctx{
                .config = cfg.forest,
                .backend = backend->name(),
                .execution_trace = cfg.use_execution_trace,
                .trace = out.trace,
                .extra_timing = timing};
        out.report = forest_report(out.forest, rctx);
        out.report["notes"] = out.notes;

        fs::create_directories(cfg.out_dir);
        write_file(cfg.out_dir / "forest_report.json", out.report.dump(2) + "\n");
        write_file(cfg.out_dir / "summary.txt", render_summary(out.report));
        if (out.trace) {
            trace min{out.trace->records, {}};
            write_file(cfg.out_dir / "trace.min.txt", serialize_trace(min));
        }
        return out;
    }

}  // namespace crashfix
