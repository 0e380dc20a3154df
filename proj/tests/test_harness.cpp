#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "fbmpc/harness/derivatives.hpp"
#include "fbmpc/harness/report.hpp"
#include "fbmpc/mpc/quasi_static.hpp"
#include "test_util.hpp"

using namespace fbmpc;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = FBMPC_SOURCE_DIR;

fs::path scenario_path(const std::string& name) { return kRoot / "scenarios" / (name + ".json"); }

const RobotModel& quadruped() {
  static const RobotModel m = load_model(kRoot / "models" / "quadruped.json");
  return m;
}

Json base_scenario() {
  return Json::parse(R"({"name": "t", "task": "stand", "model": ")" + (kRoot / "models" / "quadruped.json").string() +
                     R"(", "duration": 1.0})");
}

Scenario parse(const Json& j) {
  Scenario sc = scenario_from_json(j, kRoot);
  sc.validate(load_model(sc.model_path));
  return sc;
}

double energy(const RobotModel& m, const VectorXd& q, const VectorXd& v) {
  const CentroidalQuantities c = centroidal(m, q, v);
  return 0.5 * v.dot(mass_matrix(m, q) * v) - c.total_mass * m.gravity.dot(c.com);
}

// Airborne quadruped with moderate base and joint rates, as after a take-off.
VectorXd flight_state(const RobotModel& m) {
  VectorXd x = VectorXd::Zero(m.nx());
  x.head(m.nq()) = m.neutral_configuration();
  x[1] += 0.3;
  x[2] = 0.05;
  test::Rng rng(3);
  x.tail(m.nv()) << 0.6, 1.2, 0.8, rng.vec(m.nu(), 2.0);
  return x;
}

// Leg PD hold about the nominal posture, the kind of torque a flight controller commands.
VectorXd leg_hold(const RobotModel& m, const GroundSim& sim) {
  const int nu = m.nu();
  const VectorXd qn = m.neutral_configuration().tail(nu);
  const VectorXd u = 60.0 * (qn - sim.q().tail(nu)) - 2.0 * sim.v().tail(nu);
  return u.cwiseMax(m.torque_lower()).cwiseMin(m.torque_upper());
}

}  // namespace

// ---------------------------------------------------------------------------
// model and scenario files

TEST(ModelIo, ShippedModelEqualsBuiltinQuadruped) {
  const RobotModel& a = quadruped();
  const RobotModel b = robots::planar_quadruped();
  ASSERT_EQ(a.nq(), b.nq());
  ASSERT_EQ(a.nu(), b.nu());
  ASSERT_EQ(a.contacts.size(), b.contacts.size());
  EXPECT_DOUBLE_EQ(a.total_mass(), b.total_mass());
  EXPECT_EQ(a.torque_upper(), b.torque_upper());
  EXPECT_EQ(a.neutral_configuration(), b.neutral_configuration());
  test::Rng rng(5);
  for (int k = 0; k < 5; ++k) {
    const VectorXd q = rng.configuration(a), v = rng.vec(a.nv());
    EXPECT_LT((mass_matrix(a, q) - mass_matrix(b, q)).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LT((nonlinear_effects(a, q, v) - nonlinear_effects(b, q, v)).lpNorm<Eigen::Infinity>(), 1e-12);
    for (int c = 0; c < static_cast<int>(a.contacts.size()); ++c) {
      EXPECT_LT((frame_position(a, q, c) - frame_position(b, q, c)).norm(), 1e-12);
    }
  }
}

TEST(ModelIo, JsonRoundTrip) {
  const RobotModel& a = quadruped();
  const RobotModel b = model_from_json(Json::parse(model_to_json(a).dump()));
  EXPECT_EQ(model_to_json(a), model_to_json(b));
}

TEST(ModelIo, RejectsMalformedModels) {
  Json j = model_to_json(quadruped());
  Json typo = j;
  typo["bodies"][1]["mas"] = 1.0;
  EXPECT_THROW(model_from_json(typo), InvalidConfig);
  Json orphan = j;
  orphan["bodies"][2]["parent"] = "nowhere";
  EXPECT_ANY_THROW(model_from_json(orphan));
  Json rooted = j;
  rooted["bodies"][0]["parent"] = "lf_thigh";
  EXPECT_THROW(model_from_json(rooted), InvalidModel);
  EXPECT_THROW(load_model(kRoot / "models" / "missing.json"), InvalidConfig);
}

TEST(ScenarioIo, ShippedScenariosValidate) {
  for (const char* name : {"stand", "balance-push", "walk", "jump", "multi-jump"}) {
    const Scenario sc = load_scenario(scenario_path(name));
    EXPECT_NO_THROW(sc.validate(load_model(sc.model_path))) << name;
    EXPECT_EQ(sc.task, name);
  }
}

TEST(ScenarioIo, RejectsInvalidScenarios) {
  EXPECT_NO_THROW(parse(base_scenario()));
  auto bad = [](auto edit) {
    Json j = base_scenario();
    edit(j);
    return j;
  };
  EXPECT_THROW(parse(bad([](Json& j) { j["bogus"] = 1; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["task"] = "dance"; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["duration"] = -1.0; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["controller"] = "pid"; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["model"] = "nowhere.json"; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["mpc"] = {{"update_rate", 60.0}}; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["mpc"] = {{"expected_delay", 0.001}}; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["sim"] = {{"restitution", 1.5}}; })), InvalidConfig);
  EXPECT_THROW(parse(bad([](Json& j) { j["gait"] = {{"type", "gallop"}}; })), InvalidConfig);
  EXPECT_ANY_THROW(parse(bad([](Json& j) {
    j["disturbances"] = Json::array({{{"time", 0.5}, {"body", "tail"}, {"impulse", {1.0, 0.0}}}});
  })));
  EXPECT_THROW(parse(bad([](Json& j) { j["duration"] = "long"; })), InvalidConfig);
}

TEST(ScenarioIo, TrotAlternatesDiagonalPairs) {
  const Scenario sc = load_scenario(scenario_path("walk"));
  const RobotModel& m = quadruped();
  const ContactSchedule s = make_schedule(m, sc.gait, m.neutral_configuration(), 4.0);
  const double t0 = sc.gait.start, sw = sc.gait.swing;
  for (int f = 0; f < 4; ++f) EXPECT_TRUE(s.active(f, t0 - 0.01));
  // first swing: (lf, rh) airborne, (rf, lh) in stance; then the other pair
  EXPECT_FALSE(s.active(0, t0 + 0.5 * sw));
  EXPECT_FALSE(s.active(3, t0 + 0.5 * sw));
  EXPECT_TRUE(s.active(1, t0 + 0.5 * sw));
  EXPECT_TRUE(s.active(2, t0 + 0.5 * sw));
  EXPECT_TRUE(s.active(0, t0 + 1.5 * sw));
  EXPECT_FALSE(s.active(1, t0 + 1.5 * sw));
  const double end = t0 + sc.gait.count * sw;
  for (int f = 0; f < 4; ++f) EXPECT_TRUE(s.active(f, end + 0.05));
}

TEST(ScenarioIo, JumpScheduleHasAllFeetAirborne) {
  const Scenario sc = load_scenario(scenario_path("multi-jump"));
  const RobotModel& m = quadruped();
  const ContactSchedule s = make_schedule(m, sc.gait, m.neutral_configuration(), 4.0);
  const auto flights = scheduled_flights(s, sc.duration, sc.mpc.node_dt);
  ASSERT_EQ(flights.size(), 2u);
  EXPECT_NEAR(flights[0].second - flights[0].first, sc.gait.flight, 1e-9);
  EXPECT_NEAR(flights[1].first - flights[0].second, sc.gait.ground, 1e-9);
}

// ---------------------------------------------------------------------------
// plant

TEST(GroundSim, FlightConservesAngularMomentum) {
  const RobotModel& m = quadruped();
  const VectorXd x0 = flight_state(m);
  GroundSim sim(m, SimConfig{}, x0);
  ASSERT_TRUE(sim.contact_set().empty());
  const double k0 = centroidal(m, sim.q(), sim.v()).angular_momentum;
  double drift = 0.0;
  for (int k = 0; k < 120; ++k) {  // 0.3 s at 2.5 ms
    sim.step(leg_hold(m, sim), k * 0.0025, 0.0025);
    drift = std::max(drift, std::abs(centroidal(m, sim.q(), sim.v()).angular_momentum - k0));
  }
  ASSERT_TRUE(sim.contact_set().empty());
  EXPECT_LT(drift / std::abs(k0), 1e-6) << "k0 = " << k0;
}

TEST(GroundSim, FlightLinearMomentumFollowsGravity) {
  const RobotModel& m = quadruped();
  GroundSim sim(m, SimConfig{}, flight_state(m));
  const Vector2d p0 = centroidal(m, sim.q(), sim.v()).linear_momentum;
  const double T = 0.3;
  for (int k = 0; k < 120; ++k) sim.step(leg_hold(m, sim), k * 0.0025, 0.0025);
  const Vector2d p1 = centroidal(m, sim.q(), sim.v()).linear_momentum;
  const Vector2d expected = p0 + m.total_mass() * m.gravity * T;
  EXPECT_LT((p1 - expected).norm() / expected.norm(), 1e-6);
}

TEST(GroundSim, LandingDoesNotGainEnergy) {
  const RobotModel& m = quadruped();
  for (double e : {0.0, 0.3, 0.7, 1.0}) {
    VectorXd x = VectorXd::Zero(m.nx());
    x.head(m.nq()) = m.neutral_configuration();
    x[1] += 0.004;
    x[m.nq() + 1] = -0.8;
    x[m.nq() + 2] = 0.3;
    SimConfig cfg;
    cfg.restitution = e;
    GroundSim sim(m, cfg, x);
    const VectorXd u = VectorXd::Zero(m.nu());
    bool landed = false;
    for (int k = 0; k < 20 && !landed; ++k) {
      const double before = energy(m, sim.q(), sim.v());
      const std::size_t events = sim.events().size();
      sim.step(u, k * 0.0025, 0.0025);
      if (sim.events().size() > events) {
        landed = true;
        EXPECT_LE(energy(m, sim.q(), sim.v()), before + 1e-6) << "e = " << e;
      }
    }
    EXPECT_TRUE(landed) << "e = " << e;
  }
}

TEST(GroundSim, QuasiStaticStanceHoldsWithoutEvents) {
  const RobotModel& m = quadruped();
  VectorXd x = VectorXd::Zero(m.nx());
  x.head(m.nq()) = m.neutral_configuration();
  GroundSim sim(m, SimConfig{}, x);
  ASSERT_EQ(sim.contact_set().size(), 4);
  const QuasiStatic qs = quasi_static_start(m, m.neutral_configuration(), {0, 1, 2, 3});
  for (int k = 0; k < 200; ++k) {
    const VectorXd f = sim.resolve(qs.u, k * 0.0025);
    sim.step(qs.u, k * 0.0025, 0.0025);
    if (k == 0) EXPECT_NEAR(f(Eigen::seqN(1, 4, 2)).sum(), m.total_mass() * -m.gravity.y(), 1e-6);
  }
  EXPECT_TRUE(sim.events().empty());
  EXPECT_LT((sim.q() - x.head(m.nq())).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(GroundSim, PullingFootIsReleased) {
  const RobotModel& m = quadruped();
  VectorXd x = VectorXd::Zero(m.nx());
  x.head(m.nq()) = m.neutral_configuration();
  GroundSim sim(m, SimConfig{}, x);
  VectorXd u = quasi_static_start(m, m.neutral_configuration(), {0, 1, 2, 3}).u;
  u.segment<2>(0) *= -3.0;  // lf leg lifts hard
  const VectorXd f = sim.resolve(u, 0.0);
  for (int c = 0; c < 4; ++c) EXPECT_GE(f[2 * c + 1], 0.0);
  EXPECT_FALSE(sim.feet()[0].contact);
  ASSERT_FALSE(sim.events().empty());
  EXPECT_FALSE(sim.events().front().touchdown);
}

// ---------------------------------------------------------------------------
// closed loop

TEST(ClosedLoop, StandHoldsCom) {
  const SimResult r = simulate(load_scenario(scenario_path("stand")));
  ASSERT_FALSE(r.aborted);
  EXPECT_LT(r.metrics.max_com_drift, 0.01);
  EXPECT_EQ(r.metrics.torque_violations, 0);
  EXPECT_EQ(r.metrics.solver_torque_violations, 0);
  EXPECT_TRUE(r.checks_pass());
}

TEST(ClosedLoop, PushIsRecovered) {
  const Scenario sc = load_scenario(scenario_path("balance-push"));
  ASSERT_EQ(sc.disturbances.size(), 1u);
  EXPECT_EQ(sc.disturbances[0].impulse, Vector2d(10.0, 0.0));
  const SimResult r = simulate(sc);
  ASSERT_FALSE(r.aborted);
  ASSERT_EQ(r.metrics.push_recovery.size(), 1u);
  EXPECT_LE(r.metrics.push_recovery[0], 2.0);
  EXPECT_EQ(r.metrics.torque_violations, 0);
  EXPECT_TRUE(r.checks_pass());
}

TEST(ClosedLoop, JumpFlightKeepsAngularMomentum) {
  const Scenario sc = load_scenario(scenario_path("jump"));
  const SimResult r = simulate(sc);
  ASSERT_FALSE(r.aborted);
  EXPECT_EQ(r.metrics.jumps_completed, 1);
  EXPECT_EQ(r.metrics.torque_violations, 0);
  // consecutive airborne ticks with no touchdown in between
  int longest = 0, run = 0;
  double k0 = 0.0, drift = 0.0, t_prev = -1.0;
  for (const TickRecord& t : r.ticks) {
    const bool air = std::none_of(t.contact.begin(), t.contact.end(), [](int c) { return c; });
    const bool landed = std::any_of(r.events.begin(), r.events.end(),
                                    [&](const auto& e) { return e.touchdown && e.time > t_prev && e.time <= t.t; });
    t_prev = t.t;
    if (!air || landed) run = 0;
    if (!air) continue;
    if (run++ == 0) k0 = t.k;
    longest = std::max(longest, run);
    drift = std::max(drift, std::abs(t.k - k0) / std::max(1.0, std::abs(k0)));
  }
  EXPECT_GE(longest, 20);
  EXPECT_LT(drift, 1e-6);
}

TEST(ClosedLoop, RunsAreDeterministic) {
  Scenario sc = load_scenario(scenario_path("walk"));
  sc.duration = 0.8;
  sc.sim.q_noise = 1e-4;
  sc.sim.v_noise = 1e-3;
  auto csv = [&] {
    const RobotModel& m = quadruped();
    Simulation sim(m, sc);
    std::ostringstream os;
    const SimResult r = sim.run(ControllerKind::Riccati);
    write_series_csv(os, m, r);
    return os.str() + summary_json(r).dump();
  };
  const std::string a = csv();
  EXPECT_EQ(a, csv());
  sc.seed += 1;
  EXPECT_NE(a, csv());
}

TEST(ClosedLoop, SeriesColumnsMatchRecords) {
  const RobotModel& m = quadruped();
  const auto cols = series_columns(m);
  // t, u_cmd, u_meas, x, x_ref, k_G pair, lambda pair, contact, planned, com pair, flags
  EXPECT_EQ(cols.size(), 1u + 2 * 8 + 2 * 22 + 2 + 2 * 8 + 2 * 4 + 4 + 2);
  EXPECT_EQ(cols.front(), "t");
  EXPECT_EQ(cols[1], "u_cmd_0");
  EXPECT_EQ(cols.back(), "fallback");
  Scenario sc = load_scenario(scenario_path("stand"));
  sc.duration = 0.05;
  Simulation sim(m, sc);
  std::ostringstream os;
  write_series_csv(os, m, sim.run(ControllerKind::Riccati));
  std::istringstream in(os.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), static_cast<long>(cols.size()) - 1);
    ++rows;
  }
  EXPECT_EQ(rows, 1 + 20);
}

TEST(ClosedLoop, LatencyDelaysMessages) {
  Scenario sc = load_scenario(scenario_path("stand"));
  sc.duration = 0.1;
  sc.sim.latency = 0.01;
  Simulation sim(quadruped(), sc);
  const SimResult r = sim.run(ControllerKind::Riccati);
  ASSERT_FALSE(r.solver.empty());
  EXPECT_FALSE(r.aborted);
  EXPECT_EQ(r.metrics.held_ticks, 0);
}

// ---------------------------------------------------------------------------
// audits

TEST(Derivatives, AllBlocksMatchFiniteDifferences) {
  const DerivativeReport rep = check_derivatives(quadruped(), 1, 100);
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.samples, 100);
  EXPECT_GE(rep.zero_velocity_samples, 20);
  EXPECT_LT(rep.seconds, 60.0);
  std::vector<std::string> names;
  for (const auto& b : rep.blocks) {
    names.push_back(b.name);
    EXPECT_LT(b.max_rel_err, 1e-4) << b.name;
  }
  for (const char* need : {"contact.fx", "contact.fu", "contact.lx", "contact.lu", "impulse.fx", "impulse.lx",
                           "running.Fx", "running.Fu", "running.Lx", "running.Lu", "impulse.Fx", "impulse.Lx",
                           "terminal.Lx"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), need), names.end()) << need;
  }
}

TEST(Dimensions, QuadrupedTwoContacts) {
  // full-body 2 nv + nu; centroidal (3 + nv) + (nv + 2 k)
  const ModelDimensions d = model_dimensions(quadruped(), 2);
  EXPECT_EQ(d.fullbody, 30);
  EXPECT_EQ(d.centroidal, 29);
  EXPECT_EQ(model_dimensions(quadruped(), 3).centroidal, 31);
}
