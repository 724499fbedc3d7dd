#include "crashfix/backend.hpp"

#include "crashfix/error.hpp"
#include "crashfix/fs_util.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

namespace crashfix {

    namespace {

        template <typename T>
        std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
            if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
            return j.at(key).get<T>();
        }

    }  // namespace

    scripted_backend scripted_backend::from_json(const nlohmann::json& j) {
        scripted_backend out;
        try {
            for (const auto& r : j.at("rules")) {
                out.add(rule{
                        .bug_id = optional_field<std::string>(r, "bug_id"),
                        .stage = optional_field<std::string>(r, "stage"),
                        .tree_id = optional_field<int>(r, "tree_id"),
                        .node_depth = optional_field<int>(r, "node_depth"),
                        .call_index = optional_field<int>(r, "call_index"),
                        .response = r.at("response").get<std::string>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw error{errc::config_error, std::string{"invalid scripted fixture: "} + e.what()};
        }
        return out;
    }

    scripted_backend scripted_backend::from_file(const std::filesystem::path& p) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(p));
        } catch (const std::exception& e) {
            throw error{errc::config_error, "cannot load scripted fixture " + p.string() + ": " + e.what(),
                        error_detail{.path = p.string()}};
        }
        return from_json(j);
    }

    std::optional<std::string> scripted_backend::lookup(const call_key& key) const {
        const rule* best = nullptr;
        int best_score = -1;
        for (const auto& r : rules_) {
            int score = 0;
            auto check = [&score](const auto& field, const auto& value) {
                if (!field) return true;
                ++score;
                return *field == value;
            };
            if (!check(r.bug_id, key.bug_id) || !check(r.stage, key.stage) || !check(r.tree_id, key.tree_id) ||
                !check(r.node_depth, key.node_depth) || !check(r.call_index, key.call_index))
                continue;
            if (score > best_score) {
                best = &r;
                best_score = score;
            }
        }
        if (!best) return std::nullopt;
        return best->response;
    }

    std::string scripted_backend::complete(const generation_request& request) {
        if (auto r = lookup(request.key)) return *r;
        const auto& k = request.key;
        throw error{errc::backend_unavailable,
                    "no scripted response for (" + k.bug_id + ", " + k.stage + ", tree " + std::to_string(k.tree_id) +
                            ", depth " + std::to_string(k.node_depth) + ", call " + std::to_string(k.call_index) + ")"};
    }

    http_backend::http_backend(std::string endpoint, std::string model, std::string credential_env, int timeout_seconds)
        : model_(std::move(model)), credential_env_(std::move(credential_env)), timeout_seconds_(timeout_seconds) {
        auto scheme_end = endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw error{errc::config_error, "endpoint must be an http(s) URL: " + endpoint};
        auto path_start = endpoint.find('/', scheme_end + 3);
        scheme_host_port_ = endpoint.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
    }

    std::string http_backend::complete(const generation_request& request) {
        nlohmann::json body{
                {"model", model_},
                {"temperature", request.temperature},
                {"seed", request.seed},
                {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})}};

        httplib::Client client{scheme_host_port_};
        client.set_connection_timeout(timeout_seconds_);
        client.set_read_timeout(timeout_seconds_);
        httplib::Headers headers;
        if (const char* key = std::getenv(credential_env_.c_str()); key && *key)
            headers.emplace("Authorization", std::string{"Bearer "} + key);

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res)
            throw error{errc::backend_unavailable, "http backend: " + httplib::to_string(res.error())};
        if (res->status != 200)
            throw error{errc::backend_unavailable, "http backend: status " + std::to_string(res->status)};
        try {
            auto reply = nlohmann::json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw error{errc::backend_unavailable, std::string{"http backend: malformed reply: "} + e.what()};
        }
    }

    void backend_config::validate() const {
        auto temp_ok = [](double t) { return t >= 0.0 && t <= 2.0; };
        if (!temp_ok(gen_temperature) || !temp_ok(select_temperature))
            throw error{errc::config_error, "temperatures must lie in [0, 2]"};
        if (max_retries < 0) throw error{errc::config_error, "max_retries must be >= 0"};
        if (kind == backend_kind::http && (endpoint.empty() || model.empty()))
            throw error{errc::config_error, "http backend needs an endpoint and a model"};
        if (kind == backend_kind::scripted && fixture.empty())
            throw error{errc::config_error, "scripted backend needs a fixture file"};
    }

    std::unique_ptr<text_backend> make_backend(const backend_config& cfg) {
        cfg.validate();
        if (cfg.kind == backend_kind::http)
            return std::make_unique<http_backend>(cfg.endpoint, cfg.model, cfg.credential_env, cfg.timeout_seconds);
        return std::make_unique<scripted_backend>(scripted_backend::from_file(cfg.fixture));
    }

}  // namespace crashfix
