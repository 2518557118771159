#include <gtest/gtest.h>

#include <decept/error.hpp>
#include <decept/io.hpp>
#include <filesystem>

#include "fixtures.hpp"

using namespace decept;

TEST(Io, MdpRoundTrip) {
  const auto m = fx::fig2_mdp();
  const auto back = parse_mdp(mdp_to_json(m));
  EXPECT_EQ(back.state_names(), m.state_names());
  EXPECT_EQ(back.initial(), m.initial());
  for (StateIndex s = 0; s < m.num_states(); ++s) {
    ASSERT_EQ(back.num_actions(s), m.num_actions(s));
    for (ActionIndex a = 0; a < m.num_actions(s); ++a) {
      for (StateIndex q = 0; q < m.num_states(); ++q) {
        EXPECT_EQ(back.transition(s, a, q), m.transition(s, a, q));
      }
    }
  }
}

TEST(Io, PolicyRoundTrip) {
  const auto m = fx::fig2_mdp();
  StationaryPolicy p({{0.3, 0.7}, {0.125, 0.875}, {1.0}, {1.0}, {1.0}});
  EXPECT_EQ(parse_policy(m, policy_to_json(m, p)), p);
  // Single-action states may be left out.
  const auto q = parse_policy(m, R"({"1": {"r": 1, "d": 0}, "2": {"r": 0.5, "land": 0.5}})");
  EXPECT_DOUBLE_EQ(q.prob(fx::st(m, "2"), 1), 0.5);
  try {
    parse_policy(m, R"({"1": {"r": 1}})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingField);
  }
  EXPECT_THROW(parse_policy(m, R"({"1": {"r": 0.5}, "2": {"r": 1}})"), Error);
}

TEST(Io, SyntaxErrorsCarryLineAndColumn) {
  try {
    parse_mdp("{\n  \"states\": [\"a\",\n  oops]\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Io, GraphParse) {
  const auto g = parse_delivery_graph(
      R"({"nodes": ["a", "b"], "edges": [["a", "b"]], "agent_targets": ["b"],
          "agents": [{"start": "a", "supervisor_target": "b"}]})");
  EXPECT_EQ(g.num_agents(), 1u);
  EXPECT_EQ(g.edges.size(), 1u);
  EXPECT_THROW(parse_delivery_graph(R"({"nodes": ["a"]})"), Error);
}

TEST(Io, AtomicWrite) {
  const auto dir = std::filesystem::temp_directory_path() / "decept_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "out.txt").string();
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  EXPECT_EQ(read_file(path), "second");
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  std::filesystem::remove_all(dir);
  try {
    read_file(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Io, Fnv1a) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
