#include "gvk/data/manifest.hpp"

#include "test_util.hpp"

namespace gvk {
namespace {

Manifest two_entries() {
    Manifest m;
    m.entries.push_back({"a", "img/a.png", "depth/a.gvkd", {500.0, 500.0, 320.0, 240.0}, Domain::indoor, "nyu",
                         Split::eval});
    m.entries.push_back({"b", "b.png", "b.gvkd", {1000.0, 1010.0, 32.5, 31.5}, Domain::outdoor, "kitti",
                         Split::train});
    return m;
}

TEST(Manifest, JsonlFieldOrder) {
    const auto text = manifest_to_jsonl(two_entries());
    const auto first = text.substr(0, text.find('\n'));
    EXPECT_EQ(first,
              R"({"id":"a","image":"img/a.png","depth":"depth/a.gvkd","fx":500.0,"fy":500.0,"cx":320.0,"cy":240.0,)"
              R"("domain":"indoor","dataset":"nyu","split":"eval"})");
}

TEST(Manifest, RoundTrip) {
    const auto m = two_entries();
    const auto back = manifest_from_jsonl(manifest_to_jsonl(m), "/data");
    EXPECT_EQ(back.entries, m.entries);
    EXPECT_EQ(back.resolve("x.png"), std::filesystem::path("/data/x.png"));
    EXPECT_EQ(back.resolve("/abs/x.png"), std::filesystem::path("/abs/x.png"));
    EXPECT_EQ(back.datasets(), (std::vector<std::string>{"nyu", "kitti"}));
    EXPECT_EQ(back.find("b").dataset, "kitti");
    EXPECT_THROW(back.find("c"), DataError);
}

TEST(Manifest, ParseErrorsNameTheLine) {
    const std::string good = manifest_to_jsonl(two_entries());
    try {
        manifest_from_jsonl(good + "{\"id\": 3}\n");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(manifest_from_jsonl("not json\n"), DataError);
    auto extra = good;
    extra.insert(1, "\"zzz\":1,");
    EXPECT_THROW(manifest_from_jsonl(extra), DataError);
    auto bad_domain = good;
    bad_domain.replace(bad_domain.find("indoor"), 6, "inside");
    EXPECT_THROW(manifest_from_jsonl(bad_domain), DataError);
    EXPECT_TRUE(manifest_from_jsonl("\n  \n").entries.empty());
}

TEST(Manifest, ValidateRules) {
    auto m = two_entries();
    EXPECT_NO_THROW(m.validate());
    m.entries[1].id = "a";
    EXPECT_THROW(m.validate(), DataError);
    m = two_entries();
    m.entries[0].dataset.clear();
    EXPECT_THROW(m.validate(), DataError);
    m = two_entries();
    m.entries[0].intrinsics.fx = -1.0;
    EXPECT_THROW(m.validate(), DataError);
    m = two_entries();
    m.canonical_focal = 1000.0;
    EXPECT_THROW(m.validate(), DataError);  // entry a still has fx = 500
}

TEST(Manifest, Eligibility) {
    EXPECT_TRUE((CameraIntrinsics{1000, 1049, 0, 0}.eligible()));
    EXPECT_FALSE((CameraIntrinsics{1000, 1051, 0, 0}.eligible()));
}

TEST(Manifest, FileIoChecksReferencedFiles) {
    const auto dir = test::temp_dir("manifest");
    save_manifest(dir / "m.jsonl", two_entries());
    EXPECT_THROW(load_manifest(dir / "m.jsonl"), DataError);
    const auto m = load_manifest(dir / "m.jsonl", false);
    EXPECT_EQ(m.base_dir, dir);
    EXPECT_THROW(load_manifest(dir / "none.jsonl"), DataError);
}

TEST(Queries, RoundTripAndValidation) {
    const std::vector<PixelQuery> q{{"a", "nyu", Domain::indoor, 3, 4, 2.5}, {"b", "kitti", Domain::mixed, 0, 9, 40.0}};
    const auto text = queries_to_jsonl(q);
    EXPECT_EQ(text.substr(0, text.find('\n')), R"({"id":"a","dataset":"nyu","domain":"indoor","u":3,"v":4,"gt_depth":2.5})");
    EXPECT_EQ(queries_from_jsonl(text), q);
    EXPECT_THROW(queries_from_jsonl(R"({"id":"a","dataset":"n","domain":"indoor","u":1,"v":1,"gt_depth":0})"),
                 DataError);
    const auto dir = test::temp_dir("queries");
    save_queries(dir / "q.jsonl", q);
    EXPECT_EQ(load_queries(dir / "q.jsonl"), q);
}

TEST(Domain, Names) {
    for (auto d : {Domain::indoor, Domain::outdoor, Domain::mixed}) EXPECT_EQ(parse_domain(to_string(d)), d);
    for (auto s : {Split::train, Split::eval}) EXPECT_EQ(parse_split(to_string(s)), s);
    EXPECT_THROW(parse_split("test"), DataError);
}

}  // namespace
}  // namespace gvk
