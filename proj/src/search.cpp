#include "crashfix/search.hpp"

#include "crashfix/error.hpp"
#include "crashfix/hash.hpp"

#include <chrono>
#include <ctime>
#include <future>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace crashfix {

    namespace {

        using clock = std::chrono::steady_clock;

        double seconds_since(clock::time_point start) {
            return std::chrono::duration<double>(clock::now() - start).count();
        }

        std::string tree_hash(const source_tree& t) {
            std::string buf;
            for (const auto& [path, contents] : t.files) {
                buf += std::to_string(path.size()) + ':' + path;
                buf += std::to_string(contents.size()) + ':' + contents;
            }
            return sha256_hex(buf);
        }

        std::vector<std::pair<std::string, std::string>> candidate_contents(const source_tree& tree,
                                                                             const std::vector<std::string>& files) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& f : files) {
                auto it = tree.files.find(f);
                out.emplace_back(f, it == tree.files.end() ? std::string{} : it->second);
            }
            return out;
        }

        nlohmann::json to_json(const call_stats& s) {
            return {{"calls", s.calls},
                    {"failed_calls", s.failed_calls},
                    {"prompt_chars", s.prompt_chars},
                    {"response_chars", s.response_chars}};
        }

        std::string utc_timestamp() {
            auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            std::tm tm{};
            ::gmtime_r(&now, &tm);
            std::ostringstream os;
            os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
            return os.str();
        }

    }  // namespace

    void forest_config::validate() const {
        if (num_trees < 1) throw error{errc::config_error, "num_trees must be >= 1"};
        if (max_depth < 1) throw error{errc::config_error, "max_depth must be >= 1"};
        if (branching < 1) throw error{errc::config_error, "branching must be >= 1"};
        if (restarts < 0) throw error{errc::config_error, "restarts must be >= 0"};
        if (n_hyp < 1 || n_patch < 1) throw error{errc::config_error, "n_hyp and n_patch must be >= 1"};
    }

    std::size_t forest_config::tree_budget() const {
        std::size_t total = 0, level = 1;
        for (int d = 0; d < max_depth; ++d) {
            total += level;
            level *= static_cast<std::size_t>(branching);
        }
        return total;
    }

    std::string_view to_string(outcome_kind k) {
        switch (k) {
            case outcome_kind::resolved: return "resolved";
            case outcome_kind::crash_persists: return "crash_persists";
            case outcome_kind::no_compilable_patch: return "no_compilable_patch";
            case outcome_kind::harness_error: return "harness_error";
        }
        return "unknown";
    }

    cycle_outcome run_cycle(const cycle_state& state, const search_deps& deps, const forest_config& cfg) {
        const auto start = clock::now();
        cycle_outcome out;
        agent a{deps.backend, deps.agent, deps.bug_id, state.tree_id, state.depth, state.node_id};
        repair_context ctx{
                .bug_id = deps.bug_id,
                .report = state.report,
                .candidate_files = candidate_contents(*state.codebase, deps.candidate_files),
                .trace = deps.trace};

        auto finish = [&](outcome_kind kind) {
            out.kind = kind;
            out.calls = a.stats();
            out.warnings = a.warnings();
            out.timings.total_s = seconds_since(start);
            return out;
        };

        try {
            for (int attempt = 0; attempt <= cfg.restarts; ++attempt) {
                cycle_attempt rec;
                auto t0 = clock::now();
                auto hyps = a.generate_hypotheses(ctx, cfg.n_hyp);
                for (const auto& h : hyps) rec.hypothesis_ids.push_back(h.id);
                if (hyps.empty()) {
                    out.timings.hypothesis_s += seconds_since(t0);
                    rec.note = "no parseable hypothesis";
                    out.attempts.push_back(std::move(rec));
                    continue;
                }
                const auto& h = hyps[a.select_hypothesis(ctx, hyps).index];
                rec.selected_hypothesis = h.id;
                out.timings.hypothesis_s += seconds_since(t0);

                t0 = clock::now();
                auto patches = a.generate_patches(ctx, h, cfg.n_patch);
                out.timings.patch_s += seconds_since(t0);
                rec.patches_generated = patches.size();

                // Identical samples are checked once.
                t0 = clock::now();
                std::vector<patch> survivors;
                std::set<std::string> seen;
                for (const auto& p : patches) {
                    if (!seen.insert(patch_fingerprint(p)).second) continue;
                    if (deps.builder.check_compile(*state.codebase, p).pass) survivors.push_back(p);
                }
                out.timings.compile_check_s += seconds_since(t0);
                rec.patches_compiled = survivors.size();
                if (survivors.empty()) {
                    rec.note = "no patch passed the compile check";
                    out.attempts.push_back(std::move(rec));
                    continue;
                }

                t0 = clock::now();
                const patch chosen = survivors[a.select_patch(ctx, h, survivors).index];
                out.timings.patch_s += seconds_since(t0);
                auto applied = apply_patch(*state.codebase, chosen);

                bool build_failed = false;
                for (int tries = 0;; ++tries) {
                    t0 = clock::now();
                    auto art = deps.builder.build(*state.codebase, chosen);
                    out.timings.build_s += seconds_since(t0);
                    if (!art.ok) {
                        rec.note = "build failed after a passing compile check: " + art.log;
                        build_failed = true;
                        break;
                    }
                    t0 = clock::now();
                    auto rep = deps.builder.reproduce(art);
                    out.timings.reproduce_s += seconds_since(t0);
                    if (rep.status == reproduce_status::harness_error) {
                        if (tries == 0) {
                            ++out.harness_retries;
                            continue;
                        }
                        out.attempts.push_back(std::move(rec));
                        out.detail = rep.detail;
                        return finish(outcome_kind::harness_error);
                    }

                    out.attempts.push_back(std::move(rec));
                    out.applied = chosen;
                    out.fingerprint = patch_fingerprint(chosen);
                    out.diff = std::move(applied.diff);
                    out.hypothesis = h.text;
                    out.codebase = std::make_shared<const source_tree>(std::move(applied.tree));
                    out.files_recompiled = art.files_recompiled();
                    if (rep.status == reproduce_status::resolved) {
                        out.detail = rep.timed_out ? "reproducer timed out without crashing" : "reproducer exited cleanly";
                        return finish(outcome_kind::resolved);
                    }
                    out.report = std::move(rep.report);
                    out.detail = out.report.bug_type;
                    return finish(outcome_kind::crash_persists);
                }
                if (build_failed) out.attempts.push_back(std::move(rec));
            }
        } catch (const error& e) {
            out.detail = std::string{to_string(e.code())} + ": " + e.what();
            return finish(outcome_kind::harness_error);
        } catch (const std::exception& e) {
            out.detail = e.what();
            return finish(outcome_kind::harness_error);
        }
        out.detail = "no compilable patch after " + std::to_string(cfg.restarts) + " restart(s)";
        return finish(outcome_kind::no_compilable_patch);
    }

    tree_result run_tree(const cycle_state& root, const search_deps& deps, const forest_config& cfg,
                         std::atomic<bool>* halt) {
        const auto start = clock::now();
        tree_result res;
        res.tree_id = root.tree_id;
        int next_id = root.node_id + 1;
        std::vector<cycle_state> level{root};
        auto halted = [&] { return res.resolved || (halt && halt->load()); };

        while (!level.empty() && !halted()) {
            std::vector<std::optional<cycle_outcome>> outcomes(level.size());
            if (cfg.parallel_siblings && level.size() > 1) {
                std::vector<std::future<cycle_outcome>> running;
                for (const auto& s : level)
                    running.push_back(std::async(std::launch::async, [&deps, &cfg, s] { return run_cycle(s, deps, cfg); }));
                for (std::size_t i = 0; i < running.size(); ++i) outcomes[i] = running[i].get();
            }
            else {
                for (std::size_t i = 0; i < level.size(); ++i) {
                    if (i > 0 && outcomes[i - 1] && outcomes[i - 1]->kind == outcome_kind::resolved) break;
                    if (halt && halt->load()) break;
                    outcomes[i] = run_cycle(level[i], deps, cfg);
                }
            }

            std::vector<cycle_state> next;
            for (std::size_t i = 0; i < level.size(); ++i) {
                if (!outcomes[i]) continue;
                const auto& s = level[i];
                auto& o = *outcomes[i];
                res.calls += o.calls;
                if (o.kind == outcome_kind::resolved && !res.resolved) {
                    res.resolved = true;
                    res.winning_node = s.node_id;
                }
                if (o.kind == outcome_kind::crash_persists && s.depth < cfg.max_depth) {
                    for (int b = 0; b < cfg.branching; ++b)
                        next.push_back(cycle_state{
                                .codebase = o.codebase,
                                .codebase_ref = tree_hash(*o.codebase),
                                .report = o.report,
                                .depth = s.depth + 1,
                                .tree_id = s.tree_id,
                                .node_id = next_id++,
                                .parent_id = s.node_id});
                }
                res.nodes.push_back(node_record{s.tree_id, s.node_id, s.parent_id, s.depth, s.codebase_ref, std::move(o)});
            }
            level = std::move(next);
        }

        if (res.winning_node) {
            for (const auto& n : res.nodes)
                if (n.node_id == *res.winning_node)
                    res.winning_diff = unified_diff(*root.codebase, *n.outcome.codebase);
        }
        res.seconds = seconds_since(start);
        return res;
    }

    forest_result run_forest(const source_tree& baseline, const crash_report& report, const search_deps& deps,
                             const forest_config& cfg) {
        cfg.validate();
        const auto start = clock::now();
        auto codebase = std::make_shared<const source_tree>(baseline);
        const auto ref = tree_hash(baseline);
        std::atomic<bool> forest_halt{false};
        std::atomic<bool>* halt = cfg.stop_forest_on_success ? &forest_halt : nullptr;

        auto run_one = [&](int tree_id) {
            cycle_state root{.codebase = codebase, .codebase_ref = ref, .report = report, .depth = 1, .tree_id = tree_id};
            auto r = run_tree(root, deps, cfg, halt);
            if (r.resolved) forest_halt = true;
            return r;
        };

        forest_result res;
        res.bug_id = deps.bug_id;
        if (cfg.parallel_trees && cfg.num_trees > 1) {
            std::vector<std::future<tree_result>> running;
            for (int t = 0; t < cfg.num_trees; ++t) running.push_back(std::async(std::launch::async, run_one, t));
            for (auto& f : running) res.trees.push_back(f.get());
        }
        else {
            for (int t = 0; t < cfg.num_trees; ++t) res.trees.push_back(run_one(t));
        }
        for (const auto& t : res.trees) {
            res.resolved = res.resolved || t.resolved;
            res.calls += t.calls;
            res.cycles += t.nodes.size();
        }
        res.seconds = seconds_since(start);
        return res;
    }

    nlohmann::json forest_report(const forest_result& r, const report_context& ctx) {
        using nlohmann::json;
        const auto& cfg = ctx.config;
        json report;
        report["bug_id"] = r.bug_id;
        report["resolved"] = r.resolved;
        report["cycles"] = r.cycles;
        report["calls"] = to_json(r.calls);
        report["backend"] = ctx.backend;
        report["prompt_template_version"] = prompt_template_version;
        report["config"] = {{"num_trees", cfg.num_trees},
                            {"max_depth", cfg.max_depth},
                            {"branching", cfg.branching},
                            {"restarts", cfg.restarts},
                            {"n_hyp", cfg.n_hyp},
                            {"n_patch", cfg.n_patch},
                            {"seed", cfg.seed},
                            {"parallel_trees", cfg.parallel_trees},
                            {"parallel_siblings", cfg.parallel_siblings},
                            {"stop_forest_on_success", cfg.stop_forest_on_success}};
        report["budget"] = {{"per_tree", cfg.tree_budget()},
                            {"forest", cfg.tree_budget() * static_cast<std::size_t>(cfg.num_trees)}};

        json exec{{"enabled", ctx.execution_trace}, {"in_prompts", ctx.execution_trace && ctx.trace.has_value()}};
        if (ctx.trace) {
            json funcs = json::array();
            for (const auto& rec : ctx.trace->records) funcs.push_back(rec.func);
            exec["candidate_file"] = ctx.trace->candidate_file;
            exec["records"] = ctx.trace->records.size();
            exec["anchor"] = {ctx.trace->anchor_first, ctx.trace->anchor_last};
            exec["backward_added"] = ctx.trace->backward_added;
            exec["forward_added"] = ctx.trace->forward_added;
            exec["functions"] = funcs;
        }
        report["execution_trace"] = exec;

        json trees = json::array();
        json winning = json::array();
        json tree_timing = json::array();
        for (const auto& t : r.trees) {
            json nodes = json::array();
            json node_timing = json::array();
            for (const auto& n : t.nodes) {
                const auto& o = n.outcome;
                json attempts = json::array();
                for (const auto& a : o.attempts)
                    attempts.push_back({{"hypothesis_ids", a.hypothesis_ids},
                                        {"selected_hypothesis", a.selected_hypothesis},
                                        {"patches_generated", a.patches_generated},
                                        {"patches_compiled", a.patches_compiled},
                                        {"note", a.note}});
                json frames = json::array();
                for (const auto& f : o.report.frames) frames.push_back(f.func);
                nodes.push_back({{"tree_id", n.tree_id},
                                 {"node_id", n.node_id},
                                 {"parent_id", n.parent_id ? json(*n.parent_id) : json(nullptr)},
                                 {"depth", n.depth},
                                 {"codebase_ref", n.codebase_ref},
                                 {"outcome", to_string(o.kind)},
                                 {"detail", o.detail},
                                 {"hypothesis", o.hypothesis},
                                 {"patch_fingerprint", o.fingerprint},
                                 {"diff", o.diff},
                                 {"files_recompiled", o.files_recompiled},
                                 {"harness_retries", o.harness_retries},
                                 {"attempts", attempts},
                                 {"report", {{"bug_type", o.report.bug_type}, {"frames", frames}}},
                                 {"calls", to_json(o.calls)},
                                 {"warnings", o.warnings}});
                node_timing.push_back({{"node_id", n.node_id},
                                       {"hypothesis_s", o.timings.hypothesis_s},
                                       {"patch_s", o.timings.patch_s},
                                       {"compile_check_s", o.timings.compile_check_s},
                                       {"build_s", o.timings.build_s},
                                       {"reproduce_s", o.timings.reproduce_s},
                                       {"total_s", o.timings.total_s}});
            }
            trees.push_back({{"tree_id", t.tree_id},
                             {"resolved", t.resolved},
                             {"cycles", t.nodes.size()},
                             {"winning_node", t.winning_node ? json(*t.winning_node) : json(nullptr)},
                             {"winning_diff", t.winning_diff},
                             {"calls", to_json(t.calls)},
                             {"nodes", nodes}});
            if (t.winning_node)
                winning.push_back({{"tree_id", t.tree_id}, {"node_id", *t.winning_node}, {"diff", t.winning_diff}});
            tree_timing.push_back({{"tree_id", t.tree_id}, {"seconds", t.seconds}, {"nodes", node_timing}});
        }
        report["trees"] = trees;
        report["winning_diffs"] = winning;

        json timing = ctx.extra_timing.is_object() ? ctx.extra_timing : json::object();
        timing["generated_at"] = utc_timestamp();
        timing["forest_s"] = r.seconds;
        timing["trees"] = tree_timing;
        report["timing"] = timing;
        return report;
    }

    std::string render_summary(const nlohmann::json& report) {
        std::ostringstream os;
        try {
            const auto& calls = report.at("calls");
            os << "bug " << report.at("bug_id").get<std::string>() << ": "
               << (report.at("resolved").get<bool>() ? "RESOLVED" : "NOT RESOLVED") << "\n";
            os << "cycles: " << report.at("cycles").get<std::size_t>() << " of "
               << report.at("budget").at("forest").get<std::size_t>() << " budgeted, backend calls: "
               << calls.at("calls").get<std::uint64_t>() << " (" << calls.at("failed_calls").get<std::uint64_t>()
               << " failed)\n";
            os << "execution trace in prompts: "
               << (report.at("execution_trace").at("in_prompts").get<bool>() ? "yes" : "no") << "\n";
            for (const auto& t : report.at("trees")) {
                os << "tree " << t.at("tree_id").get<int>() << ": ";
                if (t.at("resolved").get<bool>()) os << "resolved at node " << t.at("winning_node").get<int>();
                else
                    os << "not resolved";
                os << " after " << t.at("cycles").get<std::size_t>() << " cycle(s)\n";
                for (const auto& n : t.at("nodes")) {
                    os << "  node " << n.at("node_id").get<int>() << " depth " << n.at("depth").get<int>() << ": "
                       << n.at("outcome").get<std::string>();
                    auto detail = n.at("detail").get<std::string>();
                    if (!detail.empty()) os << " (" << detail.substr(0, detail.find('\n')) << ")";
                    os << "\n";
                }
            }
            for (const auto& w : report.at("winning_diffs")) {
                os << "\nwinning diff (tree " << w.at("tree_id").get<int>() << ", node " << w.at("node_id").get<int>()
                   << "):\n"
                   << w.at("diff").get<std::string>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw error{errc::config_error, std::string{"malformed report: "} + e.what()};
        }
        return os.str();
    }

}  // namespace crashfix
