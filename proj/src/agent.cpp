#include "crashfix/agent.hpp"

#include "crashfix/error.hpp"

#include <algorithm>
#include <functional>

namespace crashfix {

    namespace {

        // Longest fenced code block in `text`, in lines.
        std::size_t longest_fenced_block(std::string_view text) {
            std::size_t longest = 0, current = 0;
            bool inside = false;
            std::size_t pos = 0;
            while (pos <= text.size()) {
                auto nl = text.find('\n', pos);
                auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
                auto t = line;
                while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
                if (t.starts_with("```")) {
                    if (inside) longest = std::max(longest, current);
                    inside = !inside;
                    current = 0;
                }
                else if (inside)
                    ++current;
                if (nl == std::string_view::npos) break;
                pos = nl + 1;
            }
            return longest;
        }

        std::uint64_t call_seed(std::uint64_t base, const call_key& k) {
            auto h = std::hash<std::string>{}(k.bug_id + '/' + k.stage + '/' + std::to_string(k.tree_id) + '/' +
                                               std::to_string(k.node_depth) + '/' + std::to_string(k.call_index) + '/' +
                                               std::to_string(k.node_id));
            return base ^ static_cast<std::uint64_t>(h);
        }

    }  // namespace

    agent::agent(text_backend& backend, agent_settings settings, std::string bug_id, int tree_id, int node_depth,
                 int node_id)
        : backend_(backend),
          settings_(settings),
          bug_id_(std::move(bug_id)),
          tree_id_(tree_id),
          node_depth_(node_depth),
          node_id_(node_id) {}

    agent::reply agent::call(std::string_view stage_name, const std::string& prompt, double temperature) {
        int index = 0;
        auto it = std::find_if(call_counters_.begin(), call_counters_.end(),
                               [&](const auto& c) { return c.first == stage_name; });
        if (it == call_counters_.end()) call_counters_.emplace_back(std::string{stage_name}, 1);
        else
            index = it->second++;

        generation_request req{
                .prompt = prompt,
                .temperature = temperature,
                .key = call_key{bug_id_, std::string{stage_name}, tree_id_, node_depth_, index, node_id_}};
        req.seed = call_seed(settings_.seed, req.key);

        ++stats_.calls;
        stats_.prompt_chars += prompt.size();
        try {
            auto text = backend_.complete(req);
            stats_.response_chars += text.size();
            return reply{std::move(text)};
        } catch (const error& e) {
            ++stats_.failed_calls;
            warnings_.push_back(std::string{stage_name} + " call " + std::to_string(index) + ": " + e.what());
            return reply{};
        }
    }

    template <typename Parse>
    auto agent::generate(std::string_view stage_name, const std::string& prompt, int n, Parse parse)
            -> std::vector<decltype(parse(std::string_view{}))> {
        std::vector<decltype(parse(std::string_view{}))> out;
        bool any_answer = false;
        for (int i = 0; i < n; ++i) {
            for (int attempt = 0; attempt <= settings_.max_retries; ++attempt) {
                auto r = call(stage_name, prompt, settings_.gen_temperature);
                if (!r.text) continue;
                any_answer = true;
                try {
                    out.push_back(parse(*r.text));
                    break;
                } catch (const error& e) {
                    warnings_.push_back(std::string{stage_name} + ": unparseable response (" + e.what() + ")");
                }
            }
        }
        if (n > 0 && !any_answer)
            throw error{errc::backend_unavailable, "every " + std::string{stage_name} + " call failed"};
        return out;
    }

    std::vector<hypothesis> agent::generate_hypotheses(const repair_context& ctx, int n) {
        auto prompt = assemble_hypothesis_prompt(ctx);
        auto out = generate(stage::hypothesis, prompt, n, [&](std::string_view text) {
            hypothesis h{
                    .text = parse_solution(text),
                    .id = 0,
                    .temperature = settings_.gen_temperature,
                    .backend = backend_.name()};
            h.long_code_warning = longest_fenced_block(h.text) > settings_.long_code_lines;
            return h;
        });
        for (auto& h : out) h.id = next_hypothesis_id_++;
        return out;
    }

    std::vector<patch> agent::generate_patches(const repair_context& ctx, const hypothesis& h, int n) {
        auto prompt = assemble_patch_prompt(ctx, h.text);
        return generate(stage::patch, prompt, n, [](std::string_view text) { return parse_modifications(text); });
    }

    selection agent::select(std::string_view stage_name, const std::string& prompt, std::size_t count) {
        selection s{};
        for (int attempt = 0; attempt <= settings_.max_retries; ++attempt) {
            auto r = call(stage_name, prompt, settings_.select_temperature);
            s.backend_called = true;
            if (!r.text) continue;
            try {
                s.index = parse_choice(*r.text, count);
                return s;
            } catch (const error& e) {
                warnings_.push_back(std::string{stage_name} + ": " + e.what());
            }
        }
        warnings_.push_back(std::string{stage_name} + ": falling back to the first candidate");
        s.index = 0;
        s.fell_back = true;
        return s;
    }

    selection agent::select_hypothesis(const repair_context& ctx, std::span<const hypothesis> candidates) {
        if (candidates.empty()) throw error{errc::invalid_choice, "no hypotheses to select from"};
        if (candidates.size() == 1) return selection{};
        return select(stage::hypothesis_select, assemble_hypothesis_selection_prompt(ctx, candidates), candidates.size());
    }

    selection agent::select_patch(const repair_context& ctx, const hypothesis& h, std::span<const patch> candidates) {
        if (candidates.empty()) throw error{errc::invalid_choice, "no patches to select from"};
        if (candidates.size() == 1) return selection{};
        return select(stage::patch_select, assemble_patch_selection_prompt(ctx, h.text, candidates), candidates.size());
    }

}  // namespace crashfix
