#include "gridhard/restoration.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gridhard/network.hpp"
#include "gridhard/outage.hpp"

using namespace gridhard;

namespace {

std::string data_path(const std::string& name) {
  return std::string(GRIDHARD_DATA_DIR) + "/" + name;
}

Network load(const std::string& name) { return load_network_file(data_path(name)); }

FaultMask seg_fault(const Network& net, const std::string& id) {
  return fault_on(net.segment_index(id));
}

std::set<std::string> closed_set(const RestorationResult& r) {
  return {r.closed_devices.begin(), r.closed_devices.end()};
}

}  // namespace

TEST(Restoration, ChainFaultOnRemoteSegmentShedsOnlyThatZone) {
  Network net = load("chain_ab.json");
  RestorationResult r = solve_restoration(net, seg_fault(net, "Z_wb"), 2.0);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.f1_kwh, 10.0, 1e-6);  // 5 kW lost for 2 h
  EXPECT_EQ(closed_set(r), (std::set<std::string>{"b1"}));
  EXPECT_NEAR(r.beta[static_cast<size_t>(net.node_index("A2"))], 1.0, 1e-7);
  EXPECT_EQ(r.energized[static_cast<size_t>(net.node_index("B2"))], 0);
}

TEST(Restoration, ChainFaultNearSourceLosesEverything) {
  Network net = load("chain_ab.json");
  RestorationResult r = solve_restoration(net, seg_fault(net, "Z_wa"), 2.0);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.f1_kwh, 30.0, 1e-6);  // both loads dark
  EXPECT_TRUE(r.closed_devices.empty());
}

TEST(Restoration, NoFaultServesEverythingEverywhere) {
  struct Case {
    const char* file;
    std::set<std::string> closed;
  };
  for (const auto& tc : {Case{"chain_ab.json", {"b1", "r1"}},
                         Case{"twoseg.json", {"b1", "rb"}},
                         Case{"chain3_wires.json", {}},
                         Case{"ieee13.json", {"b1", "ft1", "ft2", "r1", "t1", "t2"}}}) {
    Network net = load(tc.file);
    RestorationResult r = solve_restoration(net, 0, 2.0);
    ASSERT_TRUE(r.feasible) << tc.file;
    EXPECT_NEAR(r.f1_kwh, 0.0, 1e-6) << tc.file;
    EXPECT_EQ(closed_set(r), tc.closed) << tc.file;
    for (size_t ni = 0; ni < net.nodes.size(); ++ni)
      EXPECT_NEAR(r.beta[ni], 1.0, 1e-7) << tc.file << " node " << net.nodes[ni].id;
  }
}

TEST(Restoration, ThirteenNodeBackFeedThroughTie) {
  Network net = load("ieee13.json");
  RestorationResult r = solve_restoration(net, seg_fault(net, "Z_w5"), 2.0);
  ASSERT_TRUE(r.feasible);
  // 684 (21 kW) and 611 (16 kW) stay dark; 652 is picked back up over t2
  EXPECT_NEAR(r.f1_kwh, 2.0 * 37.0, 1e-5);
  auto cs = closed_set(r);
  EXPECT_TRUE(cs.count("t2"));
  EXPECT_FALSE(cs.count("r1"));
  EXPECT_FALSE(cs.count("r2"));
  EXPECT_EQ(r.energized[static_cast<size_t>(net.node_index("652"))], 1);
  EXPECT_NEAR(r.beta[static_cast<size_t>(net.node_index("652"))], 1.0, 1e-7);
  EXPECT_EQ(r.energized[static_cast<size_t>(net.node_index("684"))], 0);
  EXPECT_EQ(r.energized[static_cast<size_t>(net.node_index("611"))], 0);
}

TEST(Restoration, ThirteenNodeHeadFaultBlacksOut) {
  Network net = load("ieee13.json");
  RestorationResult r = solve_restoration(net, seg_fault(net, "Z_w1"), 2.0);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.f1_kwh, 2.0 * net.total_weighted_load_kw(), 1e-5);
  EXPECT_TRUE(r.closed_devices.empty());  // nothing worth closing, r2 opened by tie-break
}

TEST(Restoration, ThirteenNodeIsolatedZoneValues) {
  Network net = load("ieee13.json");
  // Z_w6: 692 (50 kW, w=1) + 675 (70 kW, w=2) lost, no alternate path
  RestorationResult z6 = solve_restoration(net, seg_fault(net, "Z_w6"), 2.0);
  EXPECT_NEAR(z6.f1_kwh, 2.0 * (50.0 + 140.0), 1e-5);
  // transformer drops: 645 is 28 kW at weight 3, 646 is 17 kW at weight 1
  RestorationResult t645 = solve_restoration(net, seg_fault(net, "T_645"), 2.0);
  EXPECT_NEAR(t645.f1_kwh, 2.0 * 84.0, 1e-5);
  EXPECT_EQ(closed_set(t645), (std::set<std::string>{"b1", "ft2", "r1", "t1", "t2"}));
  RestorationResult t646 = solve_restoration(net, seg_fault(net, "T_646"), 2.0);
  EXPECT_NEAR(t646.f1_kwh, 2.0 * 17.0, 1e-5);
}

TEST(Restoration, OracleAgreesOnEveryFixtureAndFault) {
  for (const char* file :
       {"chain_ab.json", "twoseg.json", "chain3_wires.json", "ieee13.json"}) {
    Network net = load(file);
    std::vector<FaultMask> masks{0};
    for (size_t s = 0; s < net.segments.size(); ++s) masks.push_back(FaultMask{1} << s);
    for (FaultMask m : masks) {
      RestorationResult a = solve_restoration(net, m, 2.0);
      RestorationResult b = brute_force_oracle(net, m, 2.0);
      EXPECT_NEAR(a.f1_kwh, b.f1_kwh, 1e-5) << file << " mask " << m;
      EXPECT_EQ(a.closed_devices, b.closed_devices) << file << " mask " << m;
      EXPECT_NEAR(a.unserved_kw, b.unserved_kw, 1e-5) << file << " mask " << m;
    }
  }
}

TEST(Restoration, OracleAgreesAtTierTwoOnSmallFixtures) {
  RestorationOptions opt;
  opt.tier = 2;
  for (const char* file : {"chain_ab.json", "twoseg.json"}) {
    Network net = load(file);
    std::vector<FaultMask> masks{0};
    for (size_t s = 0; s < net.segments.size(); ++s) masks.push_back(FaultMask{1} << s);
    for (FaultMask m : masks) {
      RestorationResult a = solve_restoration(net, m, 2.0, opt);
      RestorationResult b = brute_force_oracle(net, m, 2.0, opt);
      EXPECT_NEAR(a.f1_kwh, b.f1_kwh, 1e-5) << file << " mask " << m;
      EXPECT_NEAR(a.f2_kwh, b.f2_kwh, 1e-5) << file << " mask " << m;
      EXPECT_EQ(a.closed_devices, b.closed_devices) << file << " mask " << m;
      EXPECT_LE(a.max_cone_residual, 1e-4) << file << " mask " << m;
    }
  }
}

TEST(Restoration, TierTwoLossesPositiveAndConeTight) {
  Network net = load("ieee13.json");
  RestorationOptions opt;
  opt.tier = 2;
  RestorationResult r = solve_restoration(net, 0, 2.0, opt);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.f1_kwh, 0.0, 1e-5);  // losses never cost service here
  EXPECT_GT(r.f2_kwh, 0.0);
  EXPECT_LE(r.max_cone_residual, 1e-4);
  // back-feed decision survives the loss term
  RestorationResult bf = solve_restoration(net, seg_fault(net, "Z_w5"), 2.0, opt);
  EXPECT_NEAR(bf.f1_kwh, 74.0, 1e-4);
  EXPECT_TRUE(closed_set(bf).count("t2"));
  EXPECT_GT(bf.f2_kwh, 0.0);
}

TEST(Restoration, TierOneReportsLossEstimate) {
  Network net = load("chain_ab.json");
  RestorationResult r = solve_restoration(net, 0, 2.0);
  EXPECT_GT(r.loss_kw, 0.0);  // post hoc r*(P^2+Q^2), not optimized
  RestorationOptions opt;
  opt.tier = 2;
  RestorationResult r2 = solve_restoration(net, 0, 2.0, opt);
  // the linear estimate and the conic value agree loosely at light load
  EXPECT_NEAR(r.loss_kw, r2.loss_kw, 0.5 * std::max(r.loss_kw, r2.loss_kw) + 1e-9);
}

TEST(Restoration, BigMScaleDoesNotMoveTheAnswer) {
  Network net = load("ieee13.json");
  for (const char* seg : {"Z_w5", "Z_w6"}) {
    RestorationOptions a, b;
    b.big_m_scale = 2.0;
    RestorationResult ra = solve_restoration(net, seg_fault(net, seg), 2.0, a);
    RestorationResult rb = solve_restoration(net, seg_fault(net, seg), 2.0, b);
    EXPECT_NEAR(ra.f1_kwh, rb.f1_kwh, 1e-6) << seg;
    EXPECT_EQ(ra.closed_devices, rb.closed_devices) << seg;
  }
}

TEST(Restoration, ZeroLoadNetworkCostsNothing) {
  json j = {
      {"version", 1},
      {"nodes", json::array({{{"id", "S"}, {"phases", "a"},
                              {"source", {{"p_cap", 100.0}, {"q_cap", 50.0}}}},
                             {{"id", "A"}, {"phases", "a"}}})},
      {"lines", json::array({{{"id", "w1"}, {"from", "S"}, {"to", "A"}, {"kind", "wire"},
                              {"r", json::array({json::array({0.01})})},
                              {"x", json::array({json::array({0.02})})},
                              {"i_max", 25.0}, {"length_mi", 1.0}}})},
      {"harden_costs", {{"Z_w1", {{"pl", 0.1}, {"ud", 1.0}}}}}};
  Network net = load_network(j);
  RestorationResult r = solve_restoration(net, fault_on(0), 2.0);
  EXPECT_NEAR(r.f1_kwh, 0.0, 1e-9);
  RestorationResult nf = solve_restoration(net, 0, 2.0);
  EXPECT_NEAR(nf.f1_kwh, 0.0, 1e-9);
}

TEST(Restoration, WholeChainZoneFaultKillsSourceZone) {
  Network net = load("chain3_wires.json");
  RestorationResult r = solve_restoration(net, seg_fault(net, "Z_w1"), 2.0);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.f1_kwh, 2.0 * 15.0, 1e-6);
  for (char e : r.energized) EXPECT_EQ(e, 0);
}

TEST(Restoration, ConfigFlowRejectsInvalidConfigurations) {
  Network net = load("ieee13.json");
  std::vector<char> closed(net.lines.size(), 1);  // every device shut: two cycles
  EXPECT_FALSE(solve_config_flow(net, closed, 0).feasible);
  // closing a device the fault forces open is invalid too
  std::vector<char> base(net.lines.size(), 0);
  for (const char* id : {"b1", "f1", "ft1", "ft2", "r1", "r2"})
    base[static_cast<size_t>(net.line_index(id))] = 1;
  EXPECT_TRUE(solve_config_flow(net, base, 0).feasible);
  EXPECT_FALSE(solve_config_flow(net, base, seg_fault(net, "Z_w5")).feasible);
}

TEST(Restoration, EffectiveFaultsFollowSemantics) {
  Network net = load("ieee13.json");
  HardeningDecision d;
  d.measures.assign(net.segments.size(), Measure::none);
  d.measures[static_cast<size_t>(net.segment_index("Z_w5"))] = Measure::underground;
  FaultMask m = seg_fault(net, "Z_w5");
  EXPECT_EQ(effective_faults(m, d, HardeningSemantics::immunity), 0u);
  EXPECT_EQ(effective_faults(m, d, HardeningSemantics::probability_only), m);
  FaultMask other = seg_fault(net, "Z_w6");
  EXPECT_EQ(effective_faults(other, d, HardeningSemantics::immunity), other);
}

TEST(Restoration, CostTableMemoizesAndScalesWithDuration) {
  Network net = load("ieee13.json");
  ScenarioCatalog cat = build_scenario_catalog(net, {});  // default 2 h everywhere
  ASSERT_EQ(cat.size(), 5u);
  CostTable table;
  RestorationOptions opt;
  HardeningDecision none;
  none.measures.assign(net.segments.size(), Measure::none);

  std::vector<double> c = scenario_costs(net, cat, none, table, opt);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(table.size(), 5u);
  for (size_t s = 0; s < cat.size(); ++s) {
    RestorationResult r = solve_restoration(net, fault_on(cat.scenarios[s].segment), 2.0, opt);
    EXPECT_NEAR(c[s], r.f1_kwh, 1e-6) << s;
  }

  // repeat costs nothing new; hardened segment adds only the no-fault entry
  std::vector<double> again = scenario_costs(net, cat, none, table, opt);
  EXPECT_EQ(again, c);
  EXPECT_EQ(table.size(), 5u);

  HardeningDecision hard = none;
  hard.measures[static_cast<size_t>(net.segment_index("Z_w5"))] = Measure::pole;
  std::vector<double> hc = scenario_costs(net, cat, hard, table, opt);
  EXPECT_EQ(table.size(), 6u);
  size_t s5 = static_cast<size_t>(net.segment_index("Z_w5"));
  for (size_t s = 0; s < cat.size(); ++s) {
    int seg = cat.scenarios[s].segment;
    if (static_cast<size_t>(seg) == s5) EXPECT_NEAR(hc[s], 0.0, 1e-9);
    else EXPECT_NEAR(hc[s], c[s], 1e-9);
  }

  // probability-only semantics leave the physical cost untouched
  std::vector<double> pc =
      scenario_costs(net, cat, hard, table, opt, HardeningSemantics::probability_only);
  EXPECT_EQ(pc, c);
}
