#include "crashfix/minimizer.hpp"

#include "crashfix/error.hpp"

#include <algorithm>

namespace crashfix {

    namespace {

        std::string_view normalize_path(std::string_view p) {
            while (p.starts_with("./")) p.remove_prefix(2);
            return p;
        }

        bool same_file(std::string_view a, std::string_view b) {
            a = normalize_path(a);
            b = normalize_path(b);
            if (a == b) return true;
            auto suffix_of = [](std::string_view longer, std::string_view shorter) {
                return longer.size() > shorter.size() && longer.ends_with(shorter) &&
                       longer[longer.size() - shorter.size() - 1] == '/';
            };
            return suffix_of(a, b) || suffix_of(b, a);
        }

        bool record_in_file(const trace_record& r, std::string_view candidate) { return same_file(r.file, candidate); }

        // Report frames that belong to the candidate file, in report order.
        std::vector<std::string_view> candidate_frames(const trace& filtered,
                                                       const crash_report& report,
                                                       std::string_view candidate) {
            std::vector<std::string_view> out;
            for (const auto& f : report.frames) {
                if (f.func.empty()) continue;
                bool belongs = false;
                if (f.file) belongs = same_file(*f.file, candidate);
                else
                    belongs = std::any_of(filtered.records.begin(), filtered.records.end(), [&](const auto& r) {
                        return r.func == f.func && record_in_file(r, candidate);
                    });
                if (belongs) out.push_back(f.func);
            }
            return out;
        }

        enum class direction { backward, forward };

        anchor_span clip_to_budget(anchor_span span, std::size_t max_records) {
            if (span.size() <= max_records) return span;
            span.first = span.last + 1 - max_records;
            std::erase_if(span.matched, [&](std::size_t i) { return i < span.first; });
            return span;
        }

    }  // namespace

    void minimizer_config::validate() const {
        if (max_records < 1) throw error{errc::config_error, "max_records must be >= 1"};
        if (max_period < 1) throw error{errc::config_error, "max_period must be >= 1"};
        if (min_repeats < 2) throw error{errc::config_error, "min_repeats must be >= 2"};
    }

    anchor_span anchor(const trace& filtered, const crash_report& report, std::string_view candidate_file) {
        auto frames = candidate_frames(filtered, report, candidate_file);
        anchor_span span;
        std::size_t bound = filtered.records.size();
        for (auto func : frames) {
            for (std::size_t i = bound; i-- > 0;) {
                const auto& r = filtered.records[i];
                if (r.func == func && record_in_file(r, candidate_file)) {
                    span.matched.push_back(i);
                    bound = i;
                    break;
                }
            }
        }
        if (span.matched.empty())
            throw error{errc::no_anchor,
                        "no stack frame from " + std::string{candidate_file} + " occurs in the trace",
                        error_detail{.path = std::string{candidate_file}}};
        span.last = span.matched.front();
        span.first = span.matched.back();
        return span;
    }

    std::size_t trailing_repeat_period(std::span<const std::string_view> names, const minimizer_config& cfg) {
        const auto n = names.size();
        for (std::size_t k = 1; k <= cfg.max_period; ++k) {
            if (k * cfg.min_repeats > n) break;
            bool repeats = true;
            const auto last_block = n - k;
            for (std::size_t rep = 1; rep < cfg.min_repeats && repeats; ++rep) {
                const auto block = n - (rep + 1) * k;
                for (std::size_t o = 0; o < k; ++o) {
                    if (names[block + o] != names[last_block + o]) {
                        repeats = false;
                        break;
                    }
                }
            }
            if (repeats) return k;
        }
        return 0;
    }

    minimized_trace expand(const trace& filtered, const anchor_span& span, const minimizer_config& cfg) {
        cfg.validate();
        const auto& recs = filtered.records;
        if (recs.empty() || span.first > span.last || span.last >= recs.size())
            throw error{errc::config_error, "anchor span out of range"};

        const auto clipped = clip_to_budget(span, cfg.max_records);
        std::size_t lo = clipped.first;
        std::size_t hi = clipped.last;
        const std::size_t anchor_lo = lo;
        const std::size_t anchor_hi = hi;

        auto grow = [&](direction dir) {
            std::vector<std::string_view> added;
            while (true) {
                if (dir == direction::backward ? lo == 0 : hi + 1 >= recs.size()) break;
                if (hi - lo + 1 + 1 > cfg.max_records) break;
                added.push_back(recs[dir == direction::backward ? lo - 1 : hi + 1].func);
                if (auto k = trailing_repeat_period(added, cfg); k != 0) {
                    // The k-1 names of the final block already taken are given back.
                    if (dir == direction::backward) lo += k - 1;
                    else
                        hi -= k - 1;
                    break;
                }
                if (dir == direction::backward) --lo;
                else
                    ++hi;
            }
        };

        grow(direction::backward);
        const std::size_t backward_added = anchor_lo - lo;
        grow(direction::forward);

        minimized_trace out;
        out.records.assign(recs.begin() + static_cast<std::ptrdiff_t>(lo), recs.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
        out.anchor_first = anchor_lo - lo;
        out.anchor_last = anchor_hi - lo;
        out.backward_added = backward_added;
        out.forward_added = hi - anchor_hi;
        out.pid = recs[lo].pid;
        return out;
    }

    minimized_trace minimize(const trace& t,
                             const crash_report& report,
                             std::string_view candidate_file,
                             std::int64_t pid,
                             const minimizer_config& cfg) {
        cfg.validate();
        auto filtered = filter_by_pid(t, pid);
        if (filtered.records.empty())
            throw error{errc::empty_trace, "no trace records for pid " + std::to_string(pid)};
        auto span = anchor(filtered, report, candidate_file);
        auto out = expand(filtered, span, cfg);
        out.candidate_file = std::string{candidate_file};
        out.pid = pid;
        return out;
    }

    int score_cis(std::span<const trace_record> records, const std::set<std::string>& edited_funcs) {
        for (const auto& f : edited_funcs) {
            if (std::none_of(records.begin(), records.end(), [&](const auto& r) { return r.func == f; })) return 0;
        }
        return 1;
    }

    int score_cis(const minimized_trace& minimized, const std::set<std::string>& edited_funcs) {
        return score_cis(std::span<const trace_record>{minimized.records}, edited_funcs);
    }

    cis_report corpus_cis(std::vector<cis_entry> scores) {
        cis_report out;
        out.per_bug = std::move(scores);
        for (const auto& e : out.per_bug) out.total += e.score;
        return out;
    }

    std::string_view to_string(cis_stage s) {
        switch (s) {
            case cis_stage::stack_matched:
                return "stack";
            case cis_stage::anchored:
                return "anchor";
            case cis_stage::backward:
                return "backward";
            case cis_stage::forward:
                return "forward";
            case cis_stage::full_pid:
                return "full";
        }
        return "unknown";
    }

    cis_stage parse_cis_stage(std::string_view name) {
        for (auto s : all_cis_stages)
            if (to_string(s) == name) return s;
        throw error{errc::config_error, "unknown CIS stage `" + std::string{name} + "`"};
    }

    std::vector<trace_record> stage_records(const trace& t,
                                            const crash_report& report,
                                            std::string_view candidate_file,
                                            std::int64_t pid,
                                            cis_stage stage,
                                            const minimizer_config& cfg) {
        auto filtered = filter_by_pid(t, pid);
        if (stage == cis_stage::full_pid) return filtered.records;
        if (filtered.records.empty()) return {};

        anchor_span span;
        try {
            span = clip_to_budget(anchor(filtered, report, candidate_file), cfg.max_records);
        } catch (const error& e) {
            if (e.code() == errc::no_anchor) return {};
            throw;
        }

        if (stage == cis_stage::stack_matched) {
            std::vector<trace_record> out;
            for (auto it = span.matched.rbegin(); it != span.matched.rend(); ++it) out.push_back(filtered.records[*it]);
            return out;
        }
        auto slice = [&](std::size_t lo, std::size_t hi) {
            return std::vector<trace_record>(filtered.records.begin() + static_cast<std::ptrdiff_t>(lo),
                                             filtered.records.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
        };
        if (stage == cis_stage::anchored) return slice(span.first, span.last);

        auto full = expand(filtered, span, cfg);
        auto records = std::move(full.records);
        if (stage == cis_stage::backward) records.resize(full.anchor_last + 1);
        return records;
    }

}  // namespace crashfix
