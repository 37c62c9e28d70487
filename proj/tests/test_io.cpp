#include "pesin/io.hpp"
#include "stadium_fixture.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <random>

using namespace pesin;
using pesin::testing::stadium;

TEST(Numbers, RoundTripBitForBit) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t b = bits(rng);
    double x;
    std::memcpy(&x, &b, sizeof x);
    if (std::isnan(x)) continue;
    const auto text = io::number(x).dump();
    EXPECT_EQ(io::number(io::json::parse(text)), x) << text;
  }
  EXPECT_EQ(io::number(io::number(kInf)), kInf);
  EXPECT_EQ(io::number(io::number(kNegInf)), kNegInf);
  EXPECT_TRUE(std::isnan(io::number(io::number(std::nan("")))));
  EXPECT_THROW(io::number(io::json("big")), Error);
}

TEST(Alphabet, RoundTripPreservesEverything) {
  const auto& s = stadium();
  const auto text = io::to_json(s.alphabet).dump();
  const auto back = io::alphabet_from_json(io::json::parse(text));
  EXPECT_EQ(io::to_json(back).dump(), text);
  ASSERT_EQ(back.vertices.size(), s.alphabet.vertices.size());
  for (std::size_t i = 0; i < back.vertices.size(); ++i) {
    const auto& v = back.vertices[i];
    EXPECT_EQ(back.find(v.center, v.ps_exp, v.pu_exp), static_cast<int>(i));
  }
  // Edges recomputed from the loaded charts are the stored ones.
  for (std::size_t i = 0; i < back.vertices.size(); i += 37) {
    for (int w : back.graph.out[i]) {
      EXPECT_TRUE(coding::edge_test(s.map, s.ctx.eps, back.vertices[i], back.vertices[static_cast<std::size_t>(w)]));
    }
  }
  EXPECT_EQ(back.relevant, s.alphabet.relevant);
  EXPECT_EQ(back.nets, s.alphabet.nets);
}

TEST(Centers, RoundTrip) {
  const auto& s = stadium();
  const auto j = io::to_json(s.db);
  const auto back = io::centers_from_json(j);
  EXPECT_EQ(io::to_json(back), j);
  EXPECT_EQ(back.cycles, s.db.cycles);
}

TEST(Files, WriteAndReadAreByteStable) {
  const auto& s = stadium();
  const std::string path = ::testing::TempDir() + "pesin_alphabet.json";
  io::write_json(path, io::to_json(s.alphabet));
  const auto first = io::read_json(path);
  io::write_json(path, io::to_json(io::alphabet_from_json(first)));
  EXPECT_EQ(io::read_json(path), first);
  std::remove(path.c_str());
  EXPECT_THROW(io::read_json(path), Error);
}

TEST(Manifest, FirstFailureAndRoundTrip) {
  io::Manifest m;
  m.stage = "probe";
  m.checks.push_back(io::check_at_most("small", 1e-9, 1e-6));
  m.checks.push_back(io::check_at_least("large", 0.5, 1.0));
  m.checks.push_back(io::check_at_most("nan", std::nan(""), 1.0));
  EXPECT_FALSE(m.ok());
  EXPECT_EQ(m.first_failure()->id, "large");
  EXPECT_FALSE(m.checks[2].pass);
  const auto back = io::manifest_from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
}

TEST(Partition, RoundTrip) {
  markov::SetSystem sys;
  sys.points = 4;
  sys.sets = {{0, 1, 2, 3}, {2, 3}};
  sys.s_fibre = {{{0, 2}, {1, 3}, {0, 2}, {1, 3}}, {{2}, {3}}};
  sys.u_fibre = {{{0, 1}, {0, 1}, {2, 3}, {2, 3}}, {{2}, {3}}};
  const auto p = markov::refine(sys);
  const auto back = io::partition_from_json(io::to_json(p));
  EXPECT_EQ(io::to_json(back), io::to_json(p));
  EXPECT_TRUE(markov::same_partition(back, p));
}
