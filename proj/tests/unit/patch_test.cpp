#include "crashfix/error.hpp"
#include "crashfix/fs_util.hpp"
#include "crashfix/patch.hpp"
#include "crashfix/subprocess.hpp"

#include "generators.hpp"
#include "test_paths.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace crashfix;

namespace {

    errc code_of(auto&& fn) {
        try {
            fn();
        } catch (const error& e) {
            return e.code();
        }
        ADD_FAILURE() << "no error thrown";
        return errc::config_error;
    }

    // Applies `diff` to `before` with GNU patch and returns the resulting file.
    std::string apply_with_gnu_patch(const std::string& path, const std::string& before, const std::string& diff) {
        temp_dir dir{"crashfix-gnupatch"};
        write_file(dir.path() / path, before);
        write_file(dir.path() / "change.diff", diff);
        process_options opts;
        opts.cwd = dir.path();
        auto r = run_shell("patch -p1 --quiet --batch < change.diff", opts);
        EXPECT_TRUE(r.ok()) << r.output;
        return read_file(dir.path() / path);
    }

}  // namespace

TEST(patch_match, counts_ignore_trailing_whitespace_and_crlf) {
    EXPECT_EQ(count_matches("a  \r\nb\t\n", "a\nb\n"), 1u);
    EXPECT_EQ(count_matches("x\nx\nx\n", "x\nx"), 2u);
    EXPECT_EQ(count_matches("abc", "zzz"), 0u);
    EXPECT_EQ(count_matches("abc", ""), 0u);
}

TEST(patch_match, replacement_keeps_surrounding_bytes) {
    edit e{"f.c", "b  \nc", "B\nC", ""};
    EXPECT_EQ(apply_edit_to_text("a\r\nb \r\nc\r\nd\r\n", e), "a\r\nB\nC\r\nd\r\n");
    EXPECT_EQ(apply_edit_to_text("head b\nc tail", e), "head B\nC tail");
}

TEST(patch_match, identity_edit_is_a_no_op) {
    edit e{"f.c", "b", "b", ""};
    EXPECT_EQ(apply_edit_to_text("a\nb \nc\n", e), "a\nb \nc\n");
}

TEST(patch_match, no_match_and_ambiguous) {
    source_tree t{{{"f.c", "int x;\nint x;\nint y;\n"}}};
    EXPECT_EQ(code_of([&] { apply_edit(t, {"f.c", "int z;", "", ""}); }), errc::no_match);
    try {
        apply_edit(t, {"f.c", "int x;", "", ""});
        FAIL();
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::ambiguous_match);
        EXPECT_EQ(e.detail().count, 2u);
    }
    EXPECT_EQ(code_of([&] { apply_edit(t, {"g.c", "int y;", "", ""}); }), errc::file_missing);
    EXPECT_EQ(code_of([&] { apply_edit(t, {"../f.c", "int y;", "", ""}); }), errc::invalid_patch);
    EXPECT_EQ(code_of([&] { apply_edit(t, {"f.c", " \n\n", "", ""}); }), errc::invalid_patch);
    EXPECT_EQ(code_of([&] { apply_patch(t, patch{}); }), errc::invalid_patch);
}

TEST(patch_apply, all_or_nothing) {
    source_tree t{{{"a.c", "one\ntwo\n"}, {"b.c", "three\n"}}};
    patch p{"", {{"a.c", "one", "ONE", ""}, {"b.c", "missing", "x", ""}}};
    auto copy = t;
    EXPECT_EQ(code_of([&] { apply_patch(t, p); }), errc::no_match);
    EXPECT_EQ(t, copy);

    temp_dir dir;
    t.write_to(dir.path());
    EXPECT_EQ(code_of([&] { apply_patch_in_place(dir.path(), p); }), errc::no_match);
    EXPECT_EQ(source_tree::load(dir.path()), t);
}

TEST(patch_apply, later_edits_see_earlier_results) {
    source_tree t{{{"a.c", "alpha\nbeta\n"}}};
    patch p{"", {{"a.c", "alpha", "gamma", ""}, {"a.c", "gamma\nbeta", "delta", ""}}};
    auto r = apply_patch(t, p);
    EXPECT_EQ(r.tree.files.at("a.c"), "delta\n");
}

TEST(patch_apply, in_place_writes_only_changed_files) {
    temp_dir dir;
    source_tree t{{{"src/a.c", "x = 1;\n"}, {"src/b.c", "y = 2;\n"}}};
    t.write_to(dir.path());
    auto diff = apply_patch_in_place(dir.path(), {"", {{"src/a.c", "x = 1;", "x = 3;", ""}}});
    EXPECT_EQ(read_file(dir.path() / "src/a.c"), "x = 3;\n");
    EXPECT_EQ(read_file(dir.path() / "src/b.c"), "y = 2;\n");
    EXPECT_EQ(diff, "--- a/src/a.c\n+++ b/src/a.c\n@@ -1 +1 @@\n-x = 1;\n+x = 3;\n");
}

TEST(patch_apply, sample_answer_fixes_calc_sum) {
    auto root = testkit::fixture_dir() / "calc_sum";
    auto ws = source_tree::load(root / "workspace");
    auto expected = source_tree::load(root / "expected");
    patch p;
    p.edits = {
            {"dir_X/dir_Y/script.c",
             "    for (int var=0; var<=max_num; var++) {\n        printf(\"A dummy loop\\n\");\n        sum -= var;\n    }",
             "    for (int var=0; var<=max_num; var++) {\n        printf(\"A dummy loop\\n\");\n        sum += var; /* changed the\n        subtraction to addition */\n    }",
             ""},
            {"dir_X/dir_Y/script.c",
             "    sum -= 3;\n    printf(\"Sum of numbers from 1 to 10 is %d\\n\", sum-1);",
             "    printf(\"Sum of numbers from 1 to 10 is %d\\n\", sum);",
             ""}};
    auto r = apply_patch(ws, p);
    EXPECT_EQ(r.tree, expected);
}

TEST(patch_diff, known_output) {
    EXPECT_EQ(unified_diff_file("f", "a\nb\n", "a\nb\n"), "");
    EXPECT_EQ(unified_diff_file("f", "a\nb\nc\n", "a\nB\nc\n"),
              "--- a/f\n+++ b/f\n@@ -1,3 +1,3 @@\n a\n-b\n+B\n c\n");
    EXPECT_EQ(unified_diff_file("f", "a", "b"),
              "--- a/f\n+++ b/f\n@@ -1 +1 @@\n-a\n\\ No newline at end of file\n+b\n\\ No newline at end of file\n");
    EXPECT_EQ(unified_diff_file("f", "", "x\n"), "--- a/f\n+++ b/f\n@@ -0,0 +1 @@\n+x\n");
}

TEST(patch_diff, gnu_patch_reproduces_random_edits) {
    std::mt19937_64 rng{99};
    for (int i = 0; i < 60; ++i) {
        auto before = testkit::random_text(rng, testkit::uniform(rng, 1, 80));
        std::string after = before;
        // Rewrite a few random lines.
        auto lines = testkit::uniform(rng, 1, 6);
        for (int k = 0; k < lines; ++k) {
            auto pos = static_cast<std::size_t>(testkit::uniform(rng, 0, static_cast<int>(after.size())));
            auto nl = after.find('\n', pos);
            if (nl == std::string::npos) nl = after.size();
            after.insert(nl, testkit::uniform(rng, 0, 1) ? "\nadded line" : " tail");
        }
        if (testkit::uniform(rng, 0, 3) == 0 && !after.empty()) after.erase(0, after.find('\n') + 1);
        auto diff = unified_diff_file("src/f.c", before, after);
        if (before == after) {
            EXPECT_TRUE(diff.empty());
            continue;
        }
        EXPECT_EQ(apply_with_gnu_patch("src/f.c", before, diff), after) << diff;
    }
}

TEST(patch_fingerprint, ignores_reasons_and_solution) {
    patch a{"why", {{"f.c", "x", "y", "reason 1"}}};
    patch b{"other", {{"f.c", "x", "y", "reason 2"}}};
    patch c{"why", {{"f.c", "x", "z", "reason 1"}}};
    patch d{"", {{"f.cx", "", "y", ""}}};
    EXPECT_EQ(patch_fingerprint(a), patch_fingerprint(b));
    EXPECT_NE(patch_fingerprint(a), patch_fingerprint(c));
    EXPECT_NE(patch_fingerprint(a), patch_fingerprint(d));
    EXPECT_EQ(patch_fingerprint(a).size(), 64u);
}

TEST(patch_files, modified_files_first_occurrence_order) {
    patch p{"", {{"b.c", "1", "", ""}, {"a.c", "2", "", ""}, {"b.c", "3", "", ""}}};
    EXPECT_EQ(modified_files(p), (std::vector<std::string>{"b.c", "a.c"}));
}
