#include "crashfix/harness.hpp"

#include "crashfix/error.hpp"
#include "crashfix/hash.hpp"
#include "crashfix/instrument.hpp"
#include "crashfix/subprocess.hpp"

#include <algorithm>
#include <csignal>
#include <cstring>
#include <sstream>

namespace fs = std::filesystem;

namespace crashfix {

    namespace {

        constexpr std::chrono::seconds compile_timeout{120};
        constexpr std::string_view sentinel_pattern_name = "signal";

        using clock = std::chrono::steady_clock;

        double seconds_since(clock::time_point start) {
            return std::chrono::duration<double>(clock::now() - start).count();
        }

        std::string substitute(std::string templ, const std::vector<std::pair<std::string, std::string>>& values) {
            for (const auto& [key, value] : values) {
                const std::string placeholder = "{" + key + "}";
                std::size_t pos = 0;
                while ((pos = templ.find(placeholder, pos)) != std::string::npos) {
                    templ.replace(pos, placeholder.size(), value);
                    pos += value.size();
                }
            }
            return templ;
        }

        void replace_all(std::string& text, const std::string& from, std::string_view to) {
            if (from.empty()) return;
            std::size_t pos = 0;
            while ((pos = text.find(from, pos)) != std::string::npos) {
                text.replace(pos, from.size(), to);
                pos += to.size();
            }
        }

        bool is_c_source(std::string_view rel) { return rel.ends_with(".c"); }
        bool is_header(std::string_view rel) { return rel.ends_with(".h"); }

        fs::path object_path(const fs::path& obj_dir, const std::string& rel) { return obj_dir / (rel + ".o"); }

        std::string signal_name(int sig) {
            const char* desc = ::sigabbrev_np(sig);
            return desc ? std::string{"SIG"} + desc : "signal " + std::to_string(sig);
        }

        // `sh -c` reports a child killed by signal N as exit status 128+N.
        int effective_signal(const process_result& r) {
            if (r.term_signal) return r.term_signal;
            if (r.exit_code > 128 && r.exit_code < 128 + 32) return r.exit_code - 128;
            return 0;
        }

        template <typename T>
        T field_or(const nlohmann::json& j, const char* key, T fallback) {
            if (!j.contains(key) || j.at(key).is_null()) return fallback;
            return j.at(key).get<T>();
        }

    }  // namespace

    std::vector<crash_pattern> default_crash_patterns() {
        return {
                {"BUG", "^\\s*BUG: "},
                {"AddressSanitizer", "ERROR: AddressSanitizer"},
                {"KASAN", "KASAN: "},
                {"UBSAN", "UBSAN: |runtime error: "},
                {"kernel BUG", "kernel BUG at"},
                {"WARNING", "^\\s*WARNING: .* at "},
                {std::string{sentinel_pattern_name}, "^HARNESS: CRASH"},
        };
    }

    std::string_view to_string(reproduce_status s) {
        switch (s) {
            case reproduce_status::resolved: return "resolved";
            case reproduce_status::crashed: return "crashed";
            case reproduce_status::harness_error: return "harness_error";
        }
        return "unknown";
    }

    // ---- bundle ------------------------------------------------------------------------------

    bug_bundle bug_bundle::load(const fs::path& manifest_or_dir) {
        fs::path manifest = fs::is_directory(manifest_or_dir) ? manifest_or_dir / "bundle.json" : manifest_or_dir;
        if (!fs::exists(manifest))
            throw error{errc::config_error, "bundle manifest not found: " + manifest.string(),
                        error_detail{.path = manifest.string()}};

        bug_bundle b;
        b.root = fs::absolute(manifest).parent_path();
        try {
            auto j = nlohmann::json::parse(read_file(manifest));
            b.bug_id = j.at("bug_id").get<std::string>();
            b.workspace = b.root / j.at("workspace").get<std::string>();
            b.localization_candidates = j.at("localization_candidates").get<std::vector<std::string>>();
            b.sources = field_or<std::vector<std::string>>(j, "sources", {});
            const auto& cmds = j.at("commands");
            b.commands.compile = cmds.at("compile").get<std::string>();
            b.commands.compile_check = field_or<std::string>(cmds, "compile_check", b.commands.compile);
            b.commands.link = cmds.at("link").get<std::string>();
            b.commands.reproduce = cmds.at("reproduce").get<std::string>();
            if (j.contains("crash_patterns")) {
                for (const auto& p : j.at("crash_patterns")) {
                    if (p.is_string()) b.crash_patterns.push_back({p.get<std::string>(), p.get<std::string>()});
                    else
                        b.crash_patterns.push_back({p.at("name").get<std::string>(), p.at("regex").get<std::string>()});
                }
            }
            b.reproduce_timeout = std::chrono::milliseconds{
                    static_cast<long long>(field_or<double>(j, "reproduce_timeout_s", 30.0) * 1000.0)};
            auto report_path = b.root / j.at("report").get<std::string>();
            b.report = parse_crash_report(read_file(report_path));
        } catch (const nlohmann::json::exception& e) {
            throw error{errc::config_error, "invalid bundle manifest " + manifest.string() + ": " + e.what(),
                        error_detail{.path = manifest.string()}};
        } catch (const std::runtime_error& e) {
            if (dynamic_cast<const error*>(&e)) throw;
            throw error{errc::config_error, e.what(), error_detail{.path = manifest.string()}};
        }

        if (b.crash_patterns.empty()) b.crash_patterns = default_crash_patterns();
        if (!fs::is_directory(b.workspace))
            throw error{errc::config_error, "bundle workspace is not a directory: " + b.workspace.string(),
                        error_detail{.path = b.workspace.string()}};
        if (b.localization_candidates.empty())
            throw error{errc::config_error, "bundle lists no localization candidates"};
        for (const auto& c : b.localization_candidates) {
            if (!is_safe_relative(c) || !fs::is_regular_file(b.workspace / c))
                throw error{errc::candidate_missing, "localization candidate not in workspace: " + c,
                            error_detail{.path = c}};
        }
        if (b.sources.empty()) {
            for (const auto& entry : fs::recursive_directory_iterator(b.workspace)) {
                auto rel = entry.path().lexically_relative(b.workspace).generic_string();
                if (entry.is_regular_file() && is_c_source(rel)) b.sources.push_back(rel);
            }
            std::sort(b.sources.begin(), b.sources.end());
        }
        for (const auto& s : b.sources)
            if (!is_safe_relative(s) || !fs::is_regular_file(b.workspace / s))
                throw error{errc::config_error, "bundle source missing: " + s, error_detail{.path = s}};
        return b;
    }

    // ---- local harness -------------------------------------------------------------------------

    local_harness::local_harness(bug_bundle bundle, std::optional<fs::path> cache_root) : bundle_(std::move(bundle)) {
        bool has_sentinel = false;
        for (const auto& p : bundle_.crash_patterns) {
            try {
                compiled_patterns_.emplace_back(p.regex, std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                throw error{errc::config_error, "bad crash pattern `" + p.regex + "`: " + e.what()};
            }
            has_sentinel = has_sentinel || p.name == sentinel_pattern_name;
        }
        // Death by signal always counts as a crash, whatever the bundle's own patterns say.
        if (!has_sentinel) {
            bundle_.crash_patterns.push_back({std::string{sentinel_pattern_name}, "^HARNESS: CRASH"});
            compiled_patterns_.emplace_back("^HARNESS: CRASH", std::regex::ECMAScript);
        }

        if (cache_root) {
            cache_.dir = *cache_root / bundle_.bug_id;
            fs::remove_all(cache_.dir);
            fs::create_directories(cache_.dir);
        }
        else {
            owned_cache_ = std::make_unique<temp_dir>("crashfix-cache");
            cache_.dir = owned_cache_->path();
        }
        cache_.bug_id = bundle_.bug_id;
        cache_.workspace = cache_.dir / "src";
        fs::copy(bundle_.workspace, cache_.workspace, fs::copy_options::recursive);
        cache_.tree = source_tree::load(cache_.workspace);

        for (const auto& [rel, contents] : cache_.tree.files)
            if (is_header(rel)) cache_.headers[rel] = sha256_hex(contents);

        std::string log;
        if (!compile_all(cache_.workspace, cache_.dir / "obj", bundle_.sources, bundle_.commands.compile, log, {}))
            throw error{errc::baseline_build_failed, "baseline build failed:\n" + log};
        std::vector<fs::path> objects;
        for (const auto& s : bundle_.sources) {
            auto obj = object_path(cache_.dir / "obj", s);
            cache_.objects[s] = cache_entry{sha256_hex(cache_.tree.files.at(s)), obj};
            objects.push_back(obj);
        }
        cache_.baseline_binary = cache_.dir / "bin" / bundle_.bug_id;
        fs::create_directories(cache_.baseline_binary.parent_path());
        if (!link(objects, cache_.baseline_binary, cache_.workspace, log, {}))
            throw error{errc::baseline_build_failed, "baseline link failed:\n" + log};
    }

    local_harness::~local_harness() = default;

    std::shared_ptr<void> local_harness::new_scratch(std::string_view kind, fs::path& out) {
        std::uint64_t n;
        {
            std::lock_guard lock{scratch_mutex_};
            n = scratch_counter_++;
        }
        out = cache_.dir / "scratch" / (std::string{kind} + "-" + std::to_string(n));
        fs::remove_all(out);
        fs::create_directories(out);
        auto path = new fs::path(out);
        return std::shared_ptr<void>(path, [](void* p) {
            auto* dir = static_cast<fs::path*>(p);
            std::error_code ec;
            fs::remove_all(*dir, ec);
            delete dir;
        });
    }

    std::string local_harness::sanitize(std::string text, const fs::path& scratch) const {
        if (!scratch.empty()) replace_all(text, scratch.string(), "<scratch>");
        replace_all(text, cache_.dir.string(), "<cache>");
        return text;
    }

    bool local_harness::compile_all(const fs::path& src, const fs::path& obj, const std::vector<std::string>& sources,
                                    const std::string& command_template, std::string& log,
                                    const fs::path& scratch) const {
        for (const auto& rel : sources) {
            auto object = object_path(obj, rel);
            fs::create_directories(object.parent_path());
            auto cmd = substitute(command_template, {{"file", shell_quote(rel)},
                                                     {"object", shell_quote(object.string())},
                                                     {"workspace", shell_quote(src.string())}});
            auto r = run_shell(cmd, process_options{.cwd = src, .timeout = compile_timeout});
            if (!r.ok()) {
                log = sanitize(rel + ":\n" + r.output, scratch);
                return false;
            }
        }
        return true;
    }

    bool local_harness::link(const std::vector<fs::path>& objects, const fs::path& binary, const fs::path& workspace,
                             std::string& log, const fs::path& scratch) const {
        std::string list;
        for (const auto& o : objects) {
            if (!list.empty()) list += ' ';
            list += shell_quote(o.string());
        }
        auto cmd = substitute(bundle_.commands.link, {{"objects", list},
                                                      {"binary", shell_quote(binary.string())},
                                                      {"workspace", shell_quote(workspace.string())}});
        auto r = run_shell(cmd, process_options{.cwd = workspace, .timeout = compile_timeout});
        if (!r.ok()) {
            log = sanitize("link:\n" + r.output, scratch);
            return false;
        }
        return true;
    }

    compile_check_result local_harness::check_compile(const source_tree& base, const patch& p) {
        const auto start = clock::now();
        compile_check_result res;
        source_tree after;
        try {
            after = apply_patch(base, p).tree;
        } catch (const error& e) {
            res.failures.push_back({e.detail().path, e.what()});
            res.seconds = seconds_since(start);
            return res;
        }

        auto modified = modified_files(p);
        std::vector<std::string> to_check;
        bool header_touched = std::any_of(modified.begin(), modified.end(), [](const auto& f) { return !is_c_source(f); });
        if (header_touched) to_check = bundle_.sources;
        for (const auto& f : modified)
            if (is_c_source(f) && std::find(to_check.begin(), to_check.end(), f) == to_check.end()) to_check.push_back(f);

        fs::path scratch;
        auto guard = new_scratch("check", scratch);
        after.write_to(scratch / "src");
        for (const auto& rel : to_check) {
            res.checked.push_back(rel);
            std::string log;
            if (!compile_all(scratch / "src", scratch / "obj", {rel}, bundle_.commands.compile_check, log, scratch))
                res.failures.push_back({rel, log});
        }
        res.pass = res.failures.empty();
        res.seconds = seconds_since(start);
        return res;
    }

    build_artifact local_harness::build(const source_tree& base, const patch& p) {
        const auto start = clock::now();
        build_artifact art;
        art.fingerprint = patch_fingerprint(p);
        source_tree after = base;
        if (!p.edits.empty()) {
            try {
                after = apply_patch(base, p).tree;
            } catch (const error& e) {
                art.log = e.what();
                art.seconds = seconds_since(start);
                return art;
            }
        }

        bool headers_changed = false;
        std::map<std::string, std::string> after_headers;
        for (const auto& [rel, contents] : after.files)
            if (is_header(rel)) after_headers[rel] = sha256_hex(contents);
        headers_changed = after_headers != cache_.headers;

        std::vector<std::string> changed;
        for (const auto& s : bundle_.sources) {
            auto it = after.files.find(s);
            if (it == after.files.end()) {
                art.log = "source removed by patch: " + s;
                art.seconds = seconds_since(start);
                return art;
            }
            if (headers_changed || sha256_hex(it->second) != cache_.objects.at(s).hash) changed.push_back(s);
        }

        fs::path scratch;
        art.scratch = new_scratch("build", scratch);
        art.workspace = scratch / "src";
        after.write_to(art.workspace);
        art.recompiled = changed;

        if (changed.empty()) {
            art.binary = cache_.baseline_binary;
            art.ok = true;
            art.seconds = seconds_since(start);
            return art;
        }

        if (!compile_all(art.workspace, scratch / "obj", changed, bundle_.commands.compile, art.log, scratch)) {
            art.seconds = seconds_since(start);
            return art;
        }
        std::vector<fs::path> objects;
        for (const auto& s : bundle_.sources) {
            bool rebuilt = std::find(changed.begin(), changed.end(), s) != changed.end();
            objects.push_back(rebuilt ? object_path(scratch / "obj", s) : cache_.objects.at(s).object);
        }
        art.binary = scratch / "bin" / bundle_.bug_id;
        fs::create_directories(art.binary.parent_path());
        art.ok = link(objects, art.binary, art.workspace, art.log, scratch);
        art.seconds = seconds_since(start);
        return art;
    }

    build_artifact local_harness::baseline_artifact() const {
        build_artifact art;
        art.ok = true;
        art.binary = cache_.baseline_binary;
        art.workspace = cache_.workspace;
        return art;
    }

    reproduce_outcome local_harness::classify(std::string output, int term_signal, bool timed_out) const {
        reproduce_outcome out;
        out.timed_out = timed_out;
        if (term_signal && !timed_out) {
            if (!output.empty() && output.back() != '\n') output += '\n';
            output += std::string{harness_sentinel_prefix} + " terminated by signal " + std::to_string(term_signal) +
                      " (" + signal_name(term_signal) + ")\n";
        }

        std::size_t pos = 0;
        while (pos < output.size()) {
            auto nl = output.find('\n', pos);
            auto end = nl == std::string::npos ? output.size() : nl;
            const std::string line = output.substr(pos, end - pos);
            for (std::size_t i = 0; i < compiled_patterns_.size(); ++i) {
                if (!std::regex_search(line, compiled_patterns_[i])) continue;
                out.status = reproduce_status::crashed;
                out.report = parse_crash_report(std::string_view{output}.substr(pos));
                out.report.bug_type = bundle_.crash_patterns[i].name;
                out.output = std::move(output);
                return out;
            }
            pos = end + 1;
        }
        out.status = reproduce_status::resolved;
        out.output = std::move(output);
        return out;
    }

    reproduce_outcome local_harness::reproduce(const build_artifact& artifact) {
        const auto start = clock::now();
        if (!artifact.ok || artifact.binary.empty()) {
            reproduce_outcome out;
            out.status = reproduce_status::harness_error;
            out.detail = "artifact was not built";
            return out;
        }
        fs::path scratch;
        auto guard = new_scratch("run", scratch);
        auto trace_log = scratch / "trace.log";
        auto cmd = substitute(bundle_.commands.reproduce, {{"binary", shell_quote(artifact.binary.string())},
                                                           {"workspace", shell_quote(artifact.workspace.string())},
                                                           {"trace_log", shell_quote(trace_log.string())}});
        auto r = run_shell(cmd, process_options{.cwd = artifact.workspace,
                                                .timeout = bundle_.reproduce_timeout,
                                                .env = {{std::string{trace_log_env}, trace_log.string()}}});
        reproduce_outcome out;
        if (r.spawn_failed || (!r.term_signal && (r.exit_code == 127 || r.exit_code == 126))) {
            out.status = reproduce_status::harness_error;
            out.detail = sanitize(r.spawn_failed ? r.output : "reproduce command could not run (exit " +
                                                                      std::to_string(r.exit_code) + "): " + r.output,
                                  scratch);
            if (!artifact.workspace.empty()) replace_all(out.detail, artifact.workspace.string(), "<workspace>");
        }
        else {
            auto text = sanitize(std::move(r.output), scratch);
            if (!artifact.workspace.empty()) replace_all(text, artifact.workspace.string(), "<workspace>");
            out = classify(std::move(text), effective_signal(r), r.timed_out);
        }
        out.seconds = seconds_since(start);
        return out;
    }

    trace local_harness::collect_trace() {
        fs::path scratch;
        auto guard = new_scratch("trace", scratch);
        auto src = scratch / "src";
        auto log_path = scratch / "trace.log";
        instrument_c_sources(cache_.workspace, bundle_.localization_candidates, log_path, src);

        std::string log;
        if (!compile_all(src, scratch / "obj", bundle_.sources, bundle_.commands.compile, log, scratch))
            throw error{errc::harness_error, "instrumented build failed:\n" + log};
        std::vector<fs::path> objects;
        for (const auto& s : bundle_.sources) objects.push_back(object_path(scratch / "obj", s));
        auto binary = scratch / "bin" / bundle_.bug_id;
        fs::create_directories(binary.parent_path());
        if (!link(objects, binary, src, log, scratch))
            throw error{errc::harness_error, "instrumented link failed:\n" + log};

        auto cmd = substitute(bundle_.commands.reproduce, {{"binary", shell_quote(binary.string())},
                                                           {"workspace", shell_quote(src.string())},
                                                           {"trace_log", shell_quote(log_path.string())}});
        auto r = run_shell(cmd, process_options{.cwd = src,
                                                .timeout = bundle_.reproduce_timeout,
                                                .env = {{std::string{trace_log_env}, log_path.string()}}});
        if (r.spawn_failed || (!r.term_signal && (r.exit_code == 127 || r.exit_code == 126)))
            throw error{errc::harness_error, "instrumented reproducer could not run: " + sanitize(r.output, scratch)};
        if (!fs::exists(log_path)) throw error{errc::harness_error, "instrumented reproducer wrote no trace"};
        auto t = parse_trace(read_file(log_path));
        t.source_note = "instrumented run of " + bundle_.bug_id;
        return t;
    }

    // ---- simulated harness ---------------------------------------------------------------------

    simulated_harness::simulated_harness(source_tree baseline, std::map<std::string, simulated_entry> entries,
                                         std::optional<simulated_entry> fallback)
        : baseline_(std::move(baseline)), entries_(std::move(entries)), fallback_(std::move(fallback)) {}

    simulated_harness simulated_harness::from_json(source_tree baseline, const nlohmann::json& j) {
        auto parse_entry = [](const nlohmann::json& e) {
            simulated_entry out;
            out.compiles = field_or<bool>(e, "compiles", true);
            out.builds = field_or<bool>(e, "builds", true);
            auto outcome = field_or<std::string>(e, "outcome", "crashed");
            if (outcome == "resolved") out.outcome = reproduce_status::resolved;
            else if (outcome == "crashed")
                out.outcome = reproduce_status::crashed;
            else if (outcome == "harness_error")
                out.outcome = reproduce_status::harness_error;
            else
                throw error{errc::config_error, "unknown simulated outcome: " + outcome};
            out.report = field_or<std::string>(e, "report", "BUG: simulated crash\n");
            return out;
        };
        try {
            std::map<std::string, simulated_entry> entries;
            if (j.contains("patches"))
                for (const auto& [fp, e] : j.at("patches").items()) entries[fp] = parse_entry(e);
            std::optional<simulated_entry> fallback;
            if (j.contains("default") && !j.at("default").is_null()) fallback = parse_entry(j.at("default"));
            return simulated_harness{std::move(baseline), std::move(entries), std::move(fallback)};
        } catch (const nlohmann::json::exception& e) {
            throw error{errc::config_error, std::string{"invalid simulated harness fixture: "} + e.what()};
        }
    }

    const simulated_entry& simulated_harness::entry_for(const std::string& fingerprint) const {
        if (auto it = entries_.find(fingerprint); it != entries_.end()) return it->second;
        if (fallback_) return *fallback_;
        throw error{errc::unknown_patch, "no simulated outcome for patch " + fingerprint};
    }

    compile_check_result simulated_harness::check_compile(const source_tree& base, const patch& p) {
        compile_check_result res;
        try {
            apply_patch(base, p);
        } catch (const error& e) {
            res.failures.push_back({e.detail().path, e.what()});
            return res;
        }
        res.checked = modified_files(p);
        if (!entry_for(patch_fingerprint(p)).compiles)
            for (const auto& f : res.checked) res.failures.push_back({f, "simulated compile failure"});
        res.pass = res.failures.empty();
        return res;
    }

    build_artifact simulated_harness::build(const source_tree&, const patch& p) {
        build_artifact art;
        art.fingerprint = patch_fingerprint(p);
        art.ok = entry_for(art.fingerprint).builds;
        art.recompiled = modified_files(p);
        if (!art.ok) art.log = "simulated build failure";
        return art;
    }

    reproduce_outcome simulated_harness::reproduce(const build_artifact& artifact) {
        const auto& e = entry_for(artifact.fingerprint);
        reproduce_outcome out;
        out.status = e.outcome;
        if (e.outcome == reproduce_status::crashed) {
            out.output = e.report;
            out.report = parse_crash_report(e.report);
        }
        else if (e.outcome == reproduce_status::harness_error)
            out.detail = "simulated harness error";
        return out;
    }

}  // namespace crashfix
