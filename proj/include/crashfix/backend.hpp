#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace crashfix {

    namespace stage {
        inline constexpr std::string_view hypothesis = "hypothesis";
        inline constexpr std::string_view hypothesis_select = "hypothesis_select";
        inline constexpr std::string_view patch = "patch";
        inline constexpr std::string_view patch_select = "patch_select";
    }  // namespace stage

    /// Identifies one backend call. `call_index` counts calls of one stage within one node,
    /// so the key does not depend on scheduling order. `node_id` only feeds the sampling seed;
    /// scripted rules cannot match on it, so siblings receive the same scripted replies.
    struct call_key {
        std::string bug_id{};
        std::string stage{};
        int tree_id{};
        int node_depth{};
        int call_index{};
        int node_id{};
    };

    struct generation_request {
        std::string prompt{};
        double temperature{};
        std::uint64_t seed{};
        call_key key{};
    };

    /// A text-generation service. Implementations must be safe for concurrent calls and throw
    /// error{backend_unavailable} when no response can be produced.
    class text_backend {
      public:
        virtual ~text_backend() = default;
        virtual std::string complete(const generation_request& request) = 0;
        virtual std::string name() const = 0;
    };

    /// Serves canned responses. Every rule field except `response` is optional; an absent
    /// field matches anything. The matching rule with the most fields set wins, ties go to
    /// the earliest rule.
    ///
    /// Fixture file:
    ///   { "rules": [ { "bug_id": "toy_null", "stage": "patch", "tree_id": 0,
    ///                  "node_depth": 2, "call_index": 1, "response": "..." }, ... ] }
    class scripted_backend final : public text_backend {
      public:
        struct rule {
            std::optional<std::string> bug_id{};
            std::optional<std::string> stage{};
            std::optional<int> tree_id{};
            std::optional<int> node_depth{};
            std::optional<int> call_index{};
            std::string response{};
        };

        scripted_backend() = default;
        explicit scripted_backend(std::vector<rule> rules) : rules_(std::move(rules)) {}

        static scripted_backend from_json(const nlohmann::json& j);
        static scripted_backend from_file(const std::filesystem::path& p);

        void add(rule r) { rules_.push_back(std::move(r)); }
        const std::vector<rule>& rules() const noexcept { return rules_; }

        /// The response for `key`, or nullopt when no rule matches.
        std::optional<std::string> lookup(const call_key& key) const;

        std::string complete(const generation_request& request) override;
        std::string name() const override { return "scripted"; }

      private:
        std::vector<rule> rules_{};
    };

    /// Minimal chat-completion client: POSTs
    ///   {"model", "temperature", "seed", "messages": [{"role": "user", "content": prompt}]}
    /// to `endpoint` with `Authorization: Bearer $<credential_env>` when that variable is set,
    /// and reads `choices[0].message.content` from the reply.
    class http_backend final : public text_backend {
      public:
        http_backend(std::string endpoint, std::string model, std::string credential_env, int timeout_seconds = 120);

        std::string complete(const generation_request& request) override;
        std::string name() const override { return "http:" + model_; }

      private:
        std::string scheme_host_port_{};
        std::string path_{};
        std::string model_{};
        std::string credential_env_{};
        int timeout_seconds_{};
    };

    enum class backend_kind { http, scripted };

    struct backend_config {
        backend_kind kind{backend_kind::scripted};
        std::string endpoint{};
        std::string model{};
        std::string credential_env{"CRASHFIX_API_KEY"};
        std::filesystem::path fixture{};
        double gen_temperature{0.8};
        double select_temperature{0.2};
        int max_retries{1};
        int timeout_seconds{120};

        /// Throws error{config_error}.
        void validate() const;
    };

    std::unique_ptr<text_backend> make_backend(const backend_config& cfg);

    /// Per-run call accounting.
    struct call_stats {
        std::uint64_t calls{};
        std::uint64_t failed_calls{};
        std::uint64_t prompt_chars{};
        std::uint64_t response_chars{};

        call_stats& operator+=(const call_stats& o) {
            calls += o.calls;
            failed_calls += o.failed_calls;
            prompt_chars += o.prompt_chars;
            response_chars += o.response_chars;
            return *this;
        }
        bool operator==(const call_stats&) const = default;
    };

}  // namespace crashfix
