#include <gtest/gtest.h>

#include "common.hpp"

using namespace statefuzz;

namespace {

TestCase make_test(AppState state, AutopilotMode mode, RcAction action, std::int64_t delay, std::uint64_t seed = 3)
{
    TestCase t;
    t.id = "t";
    t.spec_id = "fspec1";
    t.mission_id = "Flight plan A";
    t.target_app_state = state;
    t.target_px4_mode = mode;
    t.injected_action = action;
    t.delay_band = "x";
    t.delay_ms = delay;
    t.rng_seed = seed;
    return t;
}

const MissionPlan& plan_a()
{
    static const MissionPlan m = sfx::load_mission("plan_a");
    return m;
}

// Mode in force at `t` according to the trace (last entry at or before t).
AutopilotMode trace_mode_at(const ExecutionProfile& p, std::int64_t t)
{
    AutopilotMode m = p.trace.front().mode;
    for (const auto& e : p.trace) {
        if (e.time_ms > t)
            break;
        m = e.mode;
    }
    return m;
}

void check_invariants(const ExecutionProfile& p, const TestCase& t)
{
    for (std::size_t i = 1; i < p.trace.size(); ++i) ASSERT_LE(p.trace[i - 1].time_ms, p.trace[i].time_ms);
    if (!p.context_reached) {
        EXPECT_TRUE(p.injections.empty());
        return;
    }
    for (const auto& inj : p.injections) {
        EXPECT_EQ(inj.scheduled_time_ms, *p.context_reached_time_ms + t.delay_ms);
        if (inj.delivered) {
            EXPECT_EQ(inj.actual_time_ms, inj.scheduled_time_ms);
            // Trace mode just before delivery (entries at the same instant may
            // already show the result).
            AutopilotMode before = p.trace.front().mode;
            for (const auto& e : p.trace) {
                if (e.time_ms >= inj.actual_time_ms)
                    break;
                before = e.mode;
            }
            EXPECT_EQ(inj.mode_at_injection, before);
        }
    }
}

} // namespace

TEST(Execute, F2ShortDelayHitsStabilized)
{
    auto t = make_test(AppState::TAKEOFF, AutopilotMode::OFFBOARD, RcAction::POSCTL, 100);
    auto p = execute(t, plan_a(), sfx::with_faults({FaultId::F2}));
    ASSERT_TRUE(p.context_reached);
    ASSERT_EQ(p.injections.size(), 1u);
    EXPECT_EQ(p.injections[0].mode_at_injection, AutopilotMode::STABILIZED);
    EXPECT_FALSE(p.injections[0].acknowledged);
    EXPECT_EQ(p.injections[0].outcome, "ignored");
    check_invariants(p, t);
}

TEST(Execute, F2LongDelayHitsOffboard)
{
    auto t = make_test(AppState::TAKEOFF, AutopilotMode::OFFBOARD, RcAction::POSCTL, 8000);
    auto p = execute(t, plan_a(), sfx::with_faults({FaultId::F2}));
    ASSERT_EQ(p.injections.size(), 1u);
    EXPECT_EQ(p.injections[0].mode_at_injection, AutopilotMode::OFFBOARD);
    EXPECT_TRUE(p.injections[0].acknowledged);
    EXPECT_EQ(p.final_app_state, AppState::HUMAN_CONTROL);
    EXPECT_EQ(trace_mode_at(p, *p.injections[0].ack_time_ms), AutopilotMode::POSCTL);
    check_invariants(p, t);
}

TEST(Execute, UnreachableContext)
{
    // An early LAND ends the mission before HOVERING.
    auto t = make_test(AppState::HOVERING, AutopilotMode::OFFBOARD, RcAction::NONE, 0);
    auto p = execute(t, plan_a(), {});
    EXPECT_TRUE(p.context_reached);

    TestCase first = make_test(AppState::TAKEOFF, AutopilotMode::OFFBOARD, RcAction::AUTO_LAND, 4000);
    auto landed = execute(first, plan_a(), {});
    ASSERT_EQ(landed.final_app_state, AppState::DONE);
    EXPECT_FALSE(landed.mission_completed);
    for (auto s : landed.realized_sequence) EXPECT_NE(s, AppState::HOVERING);

    // No context means no injection.
    auto never = make_test(AppState::HUMAN_CONTROL, AutopilotMode::POSCTL, RcAction::POSCTL, 100);
    auto q = execute(never, plan_a(), {});
    EXPECT_FALSE(q.context_reached);
    EXPECT_TRUE(q.injections.empty());
}

TEST(Execute, HappyPathSequence)
{
    for (const char* name : {"plan_a", "plan_b", "plan_c"}) {
        auto m = sfx::load_mission(name);
        auto t = make_test(AppState::HOVERING, AutopilotMode::OFFBOARD, RcAction::NONE, 0);
        t.mission_id = m.id;
        auto p = execute(t, m, {});
        EXPECT_TRUE(p.mission_completed) << name;
        EXPECT_EQ(p.realized_sequence, m.expected_state_sequence) << name;
        EXPECT_EQ(p.realized_sequence, realized_sequence(p.trace)) << name;
    }
}

TEST(Execute, InjectionTimingExact)
{
    Rng rng(17);
    for (int i = 0; i < 60; ++i) {
        const auto delay = rng.uniform_int(50, 10000);
        auto t = make_test(AppState::FLYING_TO_WAYPOINT, AutopilotMode::OFFBOARD, RcAction::ALTCTL, delay, i);
        auto p = execute(t, plan_a(), {});
        check_invariants(p, t);
    }
}

TEST(Execute, SimTimeoutFlagged)
{
    SutConfig slow;
    slow.hover_duration_ms = 2 * sim_ceiling_ms;
    auto t = make_test(AppState::TAKEOFF, AutopilotMode::OFFBOARD, RcAction::NONE, 0);
    auto p = execute(t, plan_a(), slow);
    EXPECT_TRUE(p.timed_out);
    ASSERT_EQ(p.exceptions.size(), 1u);
    EXPECT_NE(p.exceptions[0].find("SimTimeout"), std::string::npos);
    EXPECT_EQ(p.end_time_ms, sim_ceiling_ms);
}

TEST(Execute, ProfileJsonRoundTrip)
{
    auto t = make_test(AppState::TAKEOFF, AutopilotMode::OFFBOARD, RcAction::POSCTL, 8000);
    auto p = execute(t, plan_a(), sfx::with_faults({FaultId::F2}));
    auto j = to_json(p);
    EXPECT_EQ(profile_from_json(json::parse(j.dump())), p);
    EXPECT_EQ(test_case_from_json(json::parse(to_json(t).dump())), t);
}

TEST(Engine, ResetAndIsolation)
{
    const SutConfig config = sfx::with_faults({FaultId::F2});
    auto t1 = make_test(AppState::TAKEOFF, AutopilotMode::OFFBOARD, RcAction::POSCTL, 2500, 11);
    auto t2 = make_test(AppState::HOVERING, AutopilotMode::OFFBOARD, RcAction::STABILIZED, 700, 12);

    Engine fresh;
    fresh.reset();
    EXPECT_EQ(fresh.executed(), 0u);

    Engine e;
    auto a = e.execute(t1, plan_a(), config);
    e.reset();
    EXPECT_EQ(e.execute(t1, plan_a(), config), a);

    Engine f;
    f.execute(t1, plan_a(), config);
    auto b = f.execute(t2, plan_a(), config);
    f.reset();
    EXPECT_EQ(f.execute(t2, plan_a(), config), b);
    Engine g;
    EXPECT_EQ(g.execute(t2, plan_a(), config), b);
}

TEST(Campaign, ParallelismInvariant)
{
    auto spec = sfx::load_spec("fspec1");
    GeneratorConfig gc;
    gc.master_seed = 99;
    auto tests = generate(spec, gc);
    ASSERT_EQ(tests.size(), 45u);
    const auto missions = sfx::missions({"plan_a"});
    const auto config = sfx::with_faults({FaultId::F2});
    auto one = run_campaign(tests, missions, config, 1);
    auto eight = run_campaign(tests, missions, config, 8);
    ASSERT_EQ(one.size(), tests.size());
    EXPECT_EQ(one, eight);
    for (std::size_t i = 0; i < tests.size(); ++i) {
        EXPECT_EQ(one[i].test_case_id, tests[i].id);
        check_invariants(one[i], tests[i]);
    }
    EXPECT_THROW(run_campaign(tests, missions, config, 0), ConfigError);
}

TEST(Campaign, OneBadTestDoesNotAbort)
{
    auto spec = sfx::load_spec("fspec1");
    auto tests = generate(spec, {});
    tests[7].mission_id = "nowhere";
    auto profiles = run_campaign(tests, sfx::missions({"plan_a"}), {}, 4);
    std::size_t flagged = 0;
    for (const auto& p : profiles) flagged += !p.exceptions.empty();
    EXPECT_EQ(flagged, 1u);
    EXPECT_FALSE(profiles[7].exceptions.empty());
}

TEST(Observables, Oscillations)
{
    using M = AutopilotMode;
    std::vector<TraceEntry> trace{{0, AppState::LANDING, M::LAND, 0},      {800, AppState::TAKEOFF, M::OFFBOARD, 0},
                                  {1600, AppState::LANDING, M::LAND, 0},   {2400, AppState::TAKEOFF, M::OFFBOARD, 0},
                                  {9000, AppState::LANDING, M::LAND, 0}};
    EXPECT_EQ(count_oscillations(trace), 3);
    EXPECT_EQ(count_oscillations({}), 0);
}
