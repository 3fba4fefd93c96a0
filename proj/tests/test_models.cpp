#include <map>
#include <set>

#include "doctest.h"
#include "keyflux/ctmc.hpp"
#include "keyflux/models.hpp"
#include "keyflux/reference.hpp"
#include "support/oracles.hpp"

using namespace keyflux;

namespace {

using Key = std::tuple<oracle::Valuation, oracle::Valuation, std::string>;

std::map<Key, double> oracle_actions(const StrategySpec& spec, const NetworkParams& p) {
  const auto c = oracle::compose(oracle::strategy_modules(spec, p), oracle::strategy_init(spec, p));
  std::map<Key, double> out;
  for (const auto& a : c.actions) out[{a.source, a.target, a.label}] += a.rate;
  return out;
}

std::map<Key, double> library_actions(const StrategySpec& spec, const NetworkParams& p) {
  const auto m = explore(spec, p);
  std::map<Key, double> out;
  for (const auto& a : m.ctmc.actions()) {
    std::string label = m.ctmc.label_name(a.label);
    if (label == "tick") label.clear();
    out[{oracle::valuation_of(spec, m.states[a.source]), oracle::valuation_of(spec, m.states[a.target]), label}] +=
        a.rate;
  }
  return out;
}

}  // namespace

TEST_SUITE("strategy models") {
  TEST_CASE("explicit builders equal the synchronized module product") {
    for (auto kind : kAllKinds)
      for (int threshold : {1, 2, 3})
        for (int max : {1, 3, 6}) {
          NetworkParams p;
          p.max = max;
          p.p_comp = 0.05;
          const StrategySpec spec{kind, threshold, 4};
          CAPTURE(to_string(kind));
          CAPTURE(threshold);
          CAPTURE(max);
          const auto expected = oracle_actions(spec, p);
          const auto actual = library_actions(spec, p);
          REQUIRE(actual.size() == expected.size());
          for (const auto& [key, rate] : expected) {
            const auto it = actual.find(key);
            REQUIRE(it != actual.end());
            CHECK(it->second == doctest::Approx(rate).epsilon(1e-12));
          }
          const auto c = oracle::compose(oracle::strategy_modules(spec, p), oracle::strategy_init(spec, p));
          CHECK(build_model(spec, p).num_states() == static_cast<StateIndex>(c.states.size()));
        }
  }

  TEST_CASE("state and transition counts at max 50 match the tables") {
    for (auto kind : kAllKinds)
      for (int t : default_thresholds(kind)) {
        const auto ref = reference::state_space(kind, t, 50);
        REQUIRE(ref);
        CAPTURE(to_string(kind));
        CAPTURE(t);
        CHECK(state_space_summary({kind, t, 100}, NetworkParams{}) == *ref);
      }
  }

  TEST_CASE("summary agrees with the built chain") {
    for (auto kind : kAllKinds) {
      const StrategySpec spec{kind, kind == StrategyKind::MB ? 500 : 2, 100};
      const auto m = build_model(spec, NetworkParams{});
      const auto s = state_space_summary(spec, NetworkParams{});
      CHECK(s.states == static_cast<std::size_t>(m.num_states()));
      CHECK(s.merged_edges == merged_edges(m).size());
    }
  }

  TEST_CASE("structural invariants") {
    NetworkParams p;
    p.max = 7;
    for (auto kind : kAllKinds)
      for (int t : {1, 3}) {
        const StrategySpec spec{kind, t, 5};
        const auto m = explore(spec, p);
        const auto& chain = m.ctmc;
        CAPTURE(to_string(kind));
        CAPTURE(t);
        for (const auto& a : chain.actions()) {
          const auto& s = m.states[a.source];
          const auto& d = m.states[a.target];
          const std::string& label = chain.label_name(a.label);
          CHECK(std::abs(d.size - s.size) <= 1);
          CHECK(d.size >= 0);
          CHECK(d.size <= p.max);
          // Only compromising actions raise Comp.
          if (d.comp && !s.comp) CHECK((label == "leaveC" || label == "messageC"));
          // Key updates clear Comp and their counter.
          if (chain.is_reward(a.label)) {
            CHECK_FALSE(d.comp);
            if (kind == StrategyKind::HY) {
              CHECK(d.counter == 0);
              CHECK(d.counter2 == 0);
              CHECK(d.phase == 1);
            } else if (kind != StrategyKind::TB) {
              CHECK(d.counter == 0);
            } else {
              CHECK(d.phase == 1);
            }
          }
          if (label == "message" || label == "messageC") CHECK(d.size == s.size);
        }
        // Indices follow breadth-first discovery from the initial state.
        CHECK(chain.initial_state() == 0);
        CHECK(m.states[0] == initial_state(p));
      }
  }

  TEST_CASE("outflow of every state is the sum of its enabled device commands") {
    NetworkParams p;
    p.max = 5;
    for (auto kind : kAllKinds) {
      const StrategySpec spec{kind, 2, 3};
      const auto m = explore(spec, p);
      std::vector<double> out(m.states.size(), 0.0);
      for (const auto& a : m.ctmc.actions()) out[a.source] += a.rate;
      for (std::size_t s = 0; s < m.states.size(); ++s) {
        const double n = m.states[s].size;
        // join + leave + messages, counted once whichever branch fires.
        double expected = p.r_join * (p.max - n) + p.r_leave * n + p.r_message * n;
        if (spec.uses_timer()) expected += spec.erlang_k / (30.0 * spec.threshold);
        CAPTURE(to_string(kind));
        CHECK(out[s] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("construction is deterministic") {
    NetworkParams p;
    p.max = 9;
    for (auto kind : kAllKinds) {
      const auto a = explore({kind, 3, 6}, p);
      const auto b = explore({kind, 3, 6}, p);
      CHECK(a.states == b.states);
      REQUIRE(a.ctmc.actions().size() == b.ctmc.actions().size());
      for (std::size_t i = 0; i < a.ctmc.actions().size(); ++i) {
        CHECK(a.ctmc.actions()[i].source == b.ctmc.actions()[i].source);
        CHECK(a.ctmc.actions()[i].target == b.ctmc.actions()[i].target);
        CHECK(a.ctmc.actions()[i].rate == b.ctmc.actions()[i].rate);
      }
    }
  }

  TEST_CASE("zero compromise probability never compromises") {
    NetworkParams p;
    p.max = 6;
    p.p_comp = 0;
    for (auto kind : kAllKinds) {
      const auto m = build_model({kind, 2, 4}, p);
      for (StateIndex s = 0; s < m.num_states(); ++s) CHECK_FALSE(m.comp(s));
    }
  }

  TEST_CASE("state cap") {
    BuildOptions opts;
    opts.state_cap = 100;
    CHECK_THROWS_AS(build_model({StrategyKind::TB, 1, 100}, NetworkParams{}, opts), StateCapExceeded);
    CHECK_THROWS_AS(state_space_summary({StrategyKind::TB, 1, 100}, NetworkParams{}, opts), StateCapExceeded);
  }

  TEST_CASE("kind names and thresholds") {
    CHECK(parse_kind("hy") == StrategyKind::HY);
    CHECK(parse_kind("Hy/MB") == StrategyKind::HY);
    CHECK(parse_kind("jlb") == StrategyKind::JLB);
    CHECK_FALSE(parse_kind("XB"));
    CHECK(threshold_unit(StrategyKind::TB) == "Month");
    CHECK(threshold_unit(StrategyKind::HY) == "Device and Month");
    CHECK(default_thresholds(StrategyKind::MB) == std::vector<int>{500, 1000, 1500, 2000, 2500});
    CHECK_FALSE(is_standard_threshold(StrategyKind::MB, 7));
    CHECK(is_standard_threshold(StrategyKind::LB, 7));
  }

  TEST_CASE("parameter validation") {
    NetworkParams p;
    p.p_comp = 1.5;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = {};
    p.max = 0;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    CHECK_THROWS_AS((StrategySpec{StrategyKind::LB, 0}.validate()), InvalidArgument);
    CHECK_THROWS_AS((StrategySpec{StrategyKind::TB, 1, 0}.validate()), InvalidArgument);
  }
}
