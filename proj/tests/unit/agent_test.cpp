#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "crashfix/agent.hpp"
#include "crashfix/error.hpp"

#include <gtest/gtest.h>

#include <mutex>
#include <thread>

using namespace crashfix;

namespace {

    const std::string good_patch =
            "<solution>\nplan\n</solution>\n```\n// Modification 1\n<reason>\nr\n</reason>\n<file>\na.c\n</file>\n"
            "<original>\nx\n</original>\n<patched>\ny\n</patched>\n```\n";

    repair_context ctx() {
        repair_context c;
        c.bug_id = "bug";
        c.report.raw_text = "BUG: x";
        c.candidate_files = {{"a.c", "x\n"}};
        return c;
    }

    // Records every request and answers from a scripted backend.
    class recording_backend final : public text_backend {
      public:
        explicit recording_backend(scripted_backend inner) : inner_(std::move(inner)) {}
        std::string complete(const generation_request& r) override {
            std::lock_guard lock{mu_};
            requests.push_back(r);
            return inner_.complete(r);
        }
        std::string name() const override { return "recording"; }
        std::vector<generation_request> requests;

      private:
        scripted_backend inner_;
        std::mutex mu_;
    };

    scripted_backend::rule rule_for(std::string stage, std::string response, std::optional<int> index = std::nullopt) {
        scripted_backend::rule r;
        r.stage = std::move(stage);
        r.call_index = index;
        r.response = std::move(response);
        return r;
    }

}  // namespace

TEST(scripted_backend, most_specific_rule_wins) {
    scripted_backend b;
    b.add({.response = "any"});
    b.add({.stage = "patch", .response = "stage"});
    b.add({.stage = "patch", .node_depth = 2, .response = "depth"});
    b.add({.stage = "patch", .tree_id = 0, .response = "tree"});
    call_key k{"bug", "patch", 0, 2, 0, 5};
    EXPECT_EQ(b.lookup(k), "depth");  // tie with "tree" goes to the earlier rule
    k.node_depth = 1;
    EXPECT_EQ(b.lookup(k), "tree");
    k.stage = "hypothesis";
    EXPECT_EQ(b.lookup(k), "any");
    EXPECT_FALSE(scripted_backend{}.lookup(k).has_value());
    EXPECT_THROW(scripted_backend{}.complete({.key = k}), error);
}

TEST(scripted_backend, loads_fixture_json) {
    auto b = scripted_backend::from_json(nlohmann::json::parse(
            R"({"rules":[{"bug_id":"b","stage":"patch","call_index":1,"response":"r1"},{"response":"r0"}]})"));
    ASSERT_EQ(b.rules().size(), 2u);
    EXPECT_EQ(b.lookup({"b", "patch", 0, 1, 1, 0}), "r1");
    EXPECT_EQ(b.lookup({"b", "patch", 0, 1, 0, 0}), "r0");
    EXPECT_THROW(scripted_backend::from_json(nlohmann::json::parse(R"({"rules":[{"stage":1}]})")), error);
}

TEST(agent, hypotheses_get_sequential_ids_and_call_keys) {
    recording_backend b{scripted_backend{{rule_for("hypothesis", "<solution>h</solution>")}}};
    agent a{b, {.seed = 7}, "bug", 2, 3, 9};
    auto hs = a.generate_hypotheses(ctx(), 3);
    ASSERT_EQ(hs.size(), 3u);
    EXPECT_EQ(hs[0].id, 1);
    EXPECT_EQ(hs[2].id, 3);
    EXPECT_EQ(hs[0].text, "h");
    EXPECT_EQ(hs[0].backend, "recording");
    ASSERT_EQ(b.requests.size(), 3u);
    for (int i = 0; i < 3; ++i) {
        const auto& k = b.requests[i].key;
        EXPECT_EQ(k.bug_id, "bug");
        EXPECT_EQ(k.tree_id, 2);
        EXPECT_EQ(k.node_depth, 3);
        EXPECT_EQ(k.node_id, 9);
        EXPECT_EQ(k.call_index, i);
        EXPECT_DOUBLE_EQ(b.requests[i].temperature, 0.8);
    }
    EXPECT_NE(b.requests[0].seed, b.requests[1].seed);
    EXPECT_EQ(a.stats().calls, 3u);
    EXPECT_EQ(a.stats().failed_calls, 0u);
}

TEST(agent, unparseable_replies_are_retried_then_dropped) {
    recording_backend b{scripted_backend{{rule_for("patch", "garbage"), rule_for("patch", good_patch, 1)}}};
    agent a{b, {.max_retries = 1}, "bug", 0, 1};
    auto ps = a.generate_patches(ctx(), hypothesis{.text = "h"}, 2);
    // call 0 garbage, retry call 1 good; call 2 garbage, retry call 3 garbage -> dropped
    ASSERT_EQ(ps.size(), 1u);
    EXPECT_EQ(ps[0].edits[0].replaced, "y");
    EXPECT_EQ(a.stats().calls, 4u);
    EXPECT_FALSE(a.warnings().empty());
}

TEST(agent, backend_failures_are_counted_and_total_failure_throws) {
    recording_backend b{scripted_backend{{rule_for("hypothesis", "<solution>ok</solution>", 1)}}};
    agent a{b, {.max_retries = 1}, "bug", 0, 1};
    auto hs = a.generate_hypotheses(ctx(), 1);
    EXPECT_EQ(hs.size(), 1u);
    EXPECT_EQ(a.stats().calls, 2u);
    EXPECT_EQ(a.stats().failed_calls, 1u);

    recording_backend none{scripted_backend{}};
    agent z{none, {.max_retries = 2}, "bug", 0, 1};
    try {
        z.generate_hypotheses(ctx(), 2);
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::backend_unavailable);
    }
    EXPECT_EQ(z.stats().calls, 6u);
    EXPECT_EQ(z.stats().failed_calls, 6u);
}

TEST(agent, long_code_warning) {
    std::string body = "<solution>\n```\n";
    for (int i = 0; i < 25; ++i) body += "line\n";
    body += "```\n</solution>";
    recording_backend b{scripted_backend{{rule_for("hypothesis", body)}}};
    agent a{b, {}, "bug", 0, 1};
    EXPECT_TRUE(a.generate_hypotheses(ctx(), 1)[0].long_code_warning);
    agent lenient{b, {.long_code_lines = 30}, "bug", 0, 1};
    EXPECT_FALSE(lenient.generate_hypotheses(ctx(), 1)[0].long_code_warning);
}

TEST(agent, selection) {
    std::vector<hypothesis> hs{{.text = "a", .id = 1}, {.text = "b", .id = 2}, {.text = "c", .id = 3}};
    recording_backend b{scripted_backend{{rule_for("hypothesis_select", "<choice>3</choice>")}}};
    agent a{b, {}, "bug", 0, 1};
    auto s = a.select_hypothesis(ctx(), hs);
    EXPECT_EQ(s.index, 2u);
    EXPECT_TRUE(s.backend_called);
    EXPECT_FALSE(s.fell_back);
    EXPECT_DOUBLE_EQ(b.requests.back().temperature, 0.2);

    // A single candidate needs no call.
    auto before = b.requests.size();
    auto single = a.select_hypothesis(ctx(), std::span{hs}.first(1));
    EXPECT_EQ(single.index, 0u);
    EXPECT_FALSE(single.backend_called);
    EXPECT_EQ(b.requests.size(), before);

    recording_backend bad{scripted_backend{{rule_for("patch_select", "<choice>9</choice>")}}};
    agent c{bad, {.max_retries = 2}, "bug", 0, 1};
    std::vector<patch> ps(2);
    auto fb = c.select_patch(ctx(), hs[0], ps);
    EXPECT_EQ(fb.index, 0u);
    EXPECT_TRUE(fb.fell_back);
    EXPECT_EQ(c.stats().calls, 3u);
    EXPECT_THROW(c.select_patch(ctx(), hs[0], {}), error);
}

TEST(http_backend, posts_chat_request_and_reads_reply) {
    httplib::Server server;
    nlohmann::json seen;
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"hello"}}]})", "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    server.Post("/garbage", [](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t{[&] { server.listen_after_bind(); }};
    server.wait_until_ready();

    ::setenv("CRASHFIX_TEST_KEY", "sekrit", 1);
    auto base = "http://127.0.0.1:" + std::to_string(port);
    http_backend b{base + "/v1/chat/completions", "m1", "CRASHFIX_TEST_KEY", 5};
    EXPECT_EQ(b.complete({.prompt = "hi", .temperature = 0.5, .seed = 42}), "hello");
    EXPECT_EQ(seen["model"], "m1");
    EXPECT_EQ(seen["seed"], 42);
    EXPECT_DOUBLE_EQ(seen["temperature"].get<double>(), 0.5);
    EXPECT_EQ(seen["messages"][0]["role"], "user");
    EXPECT_EQ(seen["messages"][0]["content"], "hi");
    EXPECT_EQ(auth, "Bearer sekrit");
    EXPECT_EQ(b.name(), "http:m1");

    http_backend broken{base + "/broken", "m1", "CRASHFIX_TEST_KEY", 5};
    EXPECT_THROW(broken.complete({.prompt = "hi"}), error);
    http_backend garbage{base + "/garbage", "m1", "CRASHFIX_TEST_KEY", 5};
    EXPECT_THROW(garbage.complete({.prompt = "hi"}), error);

    server.stop();
    t.join();
    ::unsetenv("CRASHFIX_TEST_KEY");
}

TEST(backend_config, validation) {
    backend_config c;
    EXPECT_THROW(c.validate(), error);  // scripted without fixture
    c.fixture = "x.json";
    EXPECT_NO_THROW(c.validate());
    c.gen_temperature = 3;
    EXPECT_THROW(c.validate(), error);
    backend_config h{.kind = backend_kind::http};
    EXPECT_THROW(h.validate(), error);
    EXPECT_THROW(http_backend("not a url", "m", "E"), error);
}
