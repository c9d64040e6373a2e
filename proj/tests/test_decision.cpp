#include <gtest/gtest.h>

#include <set>

#include "gridhard/decision.hpp"

using namespace gridhard;

namespace {

Network fixture13() { return load_network_file(std::string(GRIDHARD_DATA_DIR) + "/ieee13.json"); }

std::string key_of(const HardeningDecision& d) {
  std::string s;
  for (Measure m : d.measures) s += measure_char(m);
  return s;
}

// independent nested-loop enumeration for cross-checking feasible_decisions
std::set<std::string> brute_feasible(const Network& net, double budget) {
  std::set<std::string> out;
  size_t n = net.segments.size();
  std::vector<std::vector<Measure>> opts(n);
  for (size_t i = 0; i < n; ++i) {
    opts[i] = {Measure::none};
    for (Measure m : {Measure::pole, Measure::underground, Measure::padmount})
      if (measure_allowed(net.segments[i], m)) opts[i].push_back(m);
  }
  std::vector<size_t> idx(n, 0);
  while (true) {
    HardeningDecision d;
    d.measures.resize(n);
    for (size_t i = 0; i < n; ++i) d.measures[i] = opts[i][idx[i]];
    if (d.cost(net) <= budget + 1e-9) out.insert(key_of(d));
    size_t i = 0;
    for (; i < n; ++i) {
      if (++idx[i] < opts[i].size()) break;
      idx[i] = 0;
    }
    if (i == n) break;
  }
  return out;
}

TEST(Decision, CostArithmetic) {
  Network net = fixture13();
  HardeningDecision d = HardeningDecision::none_of(net);
  EXPECT_DOUBLE_EQ(d.cost(net), 0.0);
  d.measures[static_cast<size_t>(net.segment_index("Z_w1"))] = Measure::pole;      // 0.81
  d.measures[static_cast<size_t>(net.segment_index("Z_w5"))] = Measure::underground;  // 2.40
  d.measures[static_cast<size_t>(net.segment_index("T_645"))] = Measure::padmount;    // 0.05
  EXPECT_NEAR(d.cost(net), 3.26, 1e-12);
  auto h = d.h_binary();
  EXPECT_EQ(h, (std::vector<int>{1, 1, 0, 1, 0}));
}

TEST(Decision, GeoRestrictions) {
  Network net = fixture13();
  const auto& zw1 = net.segments[static_cast<size_t>(net.segment_index("Z_w1"))];
  EXPECT_TRUE(measure_allowed(zw1, Measure::pole));
  EXPECT_FALSE(measure_allowed(zw1, Measure::underground));  // geo.no_underground
  EXPECT_FALSE(measure_allowed(zw1, Measure::padmount));
  const auto& t645 = net.segments[static_cast<size_t>(net.segment_index("T_645"))];
  EXPECT_FALSE(measure_allowed(t645, Measure::pole));
  EXPECT_TRUE(measure_allowed(t645, Measure::padmount));
}

TEST(Decision, EnumerationMatchesBruteForce) {
  Network net = fixture13();
  for (double budget : {0.0, 0.05, 0.12, 0.5, 1.0, 3.0, 100.0}) {
    auto fast = feasible_decisions(net, budget);
    std::set<std::string> got;
    for (const auto& d : fast) {
      EXPECT_TRUE(decision_feasible(net, d, budget));
      got.insert(key_of(d));
    }
    EXPECT_EQ(got.size(), fast.size()) << "duplicates at budget " << budget;
    EXPECT_EQ(got, brute_feasible(net, budget)) << "budget " << budget;
  }
}

TEST(Decision, EnumerationCounts) {
  Network net = fixture13();
  // unrestricted: 2 * 3 * 3 * 2 * 2 options
  EXPECT_EQ(feasible_decisions(net, 1e9).size(), 72u);
  EXPECT_EQ(feasible_decisions(net, 0.0).size(), 1u);
  // 0.05 affords exactly one pad-mount
  EXPECT_EQ(feasible_decisions(net, 0.05).size(), 3u);
}

TEST(Decision, ImprovementDefaults) {
  Network net = fixture13();
  HardeningDecision d = HardeningDecision::none_of(net);
  d.measures[0] = Measure::pole;
  d.measures[1] = Measure::underground;
  d.measures[3] = Measure::padmount;
  auto I = resolve_improvements(d, ImprovementFactors{});
  EXPECT_DOUBLE_EQ(I[0], 0.6);
  EXPECT_DOUBLE_EQ(I[1], 0.95);
  EXPECT_DOUBLE_EQ(I[2], 0.0);
  EXPECT_DOUBLE_EQ(I[3], 0.9);
}

TEST(Decision, JsonRoundTrip) {
  Network net = fixture13();
  HardeningDecision d = HardeningDecision::none_of(net);
  d.measures[static_cast<size_t>(net.segment_index("Z_w6"))] = Measure::underground;
  d.measures[static_cast<size_t>(net.segment_index("T_646"))] = Measure::padmount;
  auto j = decision_to_json(net, d);
  EXPECT_EQ(j.size(), 2u);
  HardeningDecision back = decision_from_json(net, j);
  EXPECT_EQ(back, d);
  EXPECT_THROW(decision_from_json(net, {{"Z_w1", "underground"}}), ConfigError);
  EXPECT_THROW(decision_from_json(net, {{"Z_w1", "bury"}}), ConfigError);
  EXPECT_THROW(decision_from_json(net, {{"nope", "pole"}}), ConfigError);
}

TEST(Decision, RandomFeasibleIsFeasibleAndSeeded) {
  Network net = fixture13();
  Rng a(42), b(42), c(7);
  auto d1 = random_feasible_decision(net, 0.5, a);
  auto d2 = random_feasible_decision(net, 0.5, b);
  EXPECT_EQ(d1, d2);
  EXPECT_TRUE(decision_feasible(net, d1, 0.5));
  for (int i = 0; i < 20; ++i)
    EXPECT_TRUE(decision_feasible(net, random_feasible_decision(net, 0.3, c), 0.3));
}

}  // namespace
