import pickle

import numpy as np
import pytest

from src.environment.field import regions_within
from src.gbp.factorgraph import iterate
from src.layers.factors import unary_prior
from src.sim import metrics
from src.sim.log import METRICS_COLUMNS, metrics_row, trajectory_row, write_csv
from src.sim.mailbox import Mailbox, post_outgoing
from src.sim.runner import simulate
from src.sim.state import MetricsRow, Sigmas, WorldConfig
from src.sim.world import NumericalAbort, World, corner_positions, random_positions
from tests.conftest import make_field, noiseless_sigmas

UNIFORM = [1.0] * 16


def world_at(config, positions, truth=UNIFORM, seed=0):
    return World(config, make_field(truth), np.asarray(positions, dtype=float), np.random.SeedSequence(seed))


def test_discovery_is_strict_and_symmetric(small_config):
    cfg = small_config.model_copy(update={"n_r": 3, "r_c": 10.0})
    world = world_at(cfg, [[5, 5], [14, 5], [24, 5]])
    assert world.discover_neighbors() == {0: {1}, 1: {0}, 2: set()}


def test_factors_return_to_baseline_after_leaving(small_config):
    world = world_at(small_config, [[5, 5], [25, 25]])
    a = world.robots[0]
    a.stack.info.activate({0, 1, 2})
    baseline = a.stack.inter_robot_factor_count()
    world.sync_factors(a, {1})
    assert a.stack.inter_robot_factor_count() == baseline + 3 + 1 + small_config.horizon_steps
    world.sync_factors(a, set())
    assert a.stack.inter_robot_factor_count() == baseline == 0


def test_one_diversity_factor_per_neighbour(small_config):
    cfg = small_config.model_copy(update={"n_r": 4})
    world = world_at(cfg, [[5, 5], [10, 5], [5, 10], [10, 10]])
    neighbors = world.discover_neighbors()
    for robot in world.robots:
        world.sync_factors(robot, neighbors[robot.id])
    kinds = [f.kind for f in world.robots[0].stack.goal.graph.inter_robot_factors()]
    assert kinds == ["goal_diversity"] * 3


def test_failure_fraction(small_config):
    cfg = small_config.model_copy(update={"n_r": 4})
    world = world_at(cfg, corner_positions(4, 1.0))
    rng = np.random.default_rng(5)
    counts = np.zeros(4)
    for _ in range(4000):
        failed = world.inject_comm_failure(0.5, rng)
        assert len(failed) == 2
        counts[list(failed)] += 1
    assert np.all(np.abs(counts - 2000) < 5 * np.sqrt(4000 * 0.25))
    assert world.inject_comm_failure(0.0) == set()
    assert world.inject_comm_failure(1.0) == {0, 1, 2, 3}
    with pytest.raises(ValueError):
        world.inject_comm_failure(1.5)


def test_total_failure_blocks_sensing_and_sharing(small_config):
    cfg = small_config.model_copy(update={"alpha": 1.0})
    world = world_at(cfg, [[5, 5], [15, 5]])
    for _ in range(12):
        world.step()
    for robot in world.robots:
        assert not any(f.kind == "sensor" for f in robot.stack.info.graph.factors.values())
        for layer in ("info", "goal"):
            assert not any(f.active for f in robot.stack.graph(layer).inter_robot_factors())
        assert all(f.active for f in robot.stack.graph("plan").inter_robot_factors())
    assert metrics.coverage(world.robots, world.field) == 0.0


def test_links_track_poses_every_step(small_config):
    cfg = small_config.model_copy(update={"n_r": 3, "r_c": 15.0, "init": "random"})
    world = World.create(cfg)
    for _ in range(15):
        world.step()
        assert world.stale_factors() == []
        assert world.connectivity_symmetric()
        neighbors = world.discover_neighbors()
        assert all(r.connected == neighbors[r.id] for r in world.robots)


def test_relay_lets_silent_robot_finish(small_config):
    truth = np.ones(16)
    truth[0] = 0.0
    cfg = small_config.model_copy(update={"sigmas": noiseless_sigmas()})
    world = world_at(cfg, [[5, 5], [25, 25]], truth)
    neighbors = world.discover_neighbors()
    for robot in world.robots:
        world.sync_factors(robot, neighbors[robot.id])
    assert world.measure(world.robots[0]) == 1
    silent = world.robots[1].stack.info
    silent.activate({0, 5, 10})
    world.run_layer("info", 5)

    psi, zeta = silent.region_mean(0)[2:]
    assert psi == pytest.approx(0.0099, abs=1e-3)
    assert zeta == pytest.approx(0.99, abs=1e-3)
    assert metrics.robots_done(world.robots) == [True, True]


def test_consensus_between_sampling_robots(small_config):
    truth = np.ones(16)
    truth[0] = 0.2
    cfg = small_config.model_copy(update={"sigmas": noiseless_sigmas()})
    world = world_at(cfg, [[5, 5], [6, 5]], truth)
    neighbors = world.discover_neighbors()
    for robot in world.robots:
        world.sync_factors(robot, neighbors[robot.id])
        world.measure(robot)
    world.run_layer("info", 5)
    for robot in world.robots:
        assert robot.stack.info.region_mean(0)[2] == pytest.approx(0.2, abs=1e-3)


def test_numerical_abort_survives_pickling():
    err = NumericalAbort(3, "goal", 7, 12.5, "r3/goal")
    back = pickle.loads(pickle.dumps(err))
    assert (back.robot_id, back.layer, back.iteration, back.t, back.detail) == (3, "goal", 7, 12.5, "r3/goal")
    assert "robot 3 layer goal iteration 7" in str(back)


def test_corner_block():
    np.testing.assert_allclose(corner_positions(4, 1.0), [[4, 4], [8, 4], [4, 8], [8, 8]])


def test_random_positions_keep_apart(rng):
    pos = random_positions(10, 40.0, 1.0, 4.4, rng)
    dists = [np.linalg.norm(a - b) for i, a in enumerate(pos) for b in pos[i + 1:]]
    assert min(dists) >= 4.4
    with pytest.raises(ValueError):
        random_positions(100, 10.0, 1.0, 4.4, rng)


def test_world_rejects_mismatched_inputs(small_config):
    with pytest.raises(ValueError):
        world_at(small_config, [[5, 5]])


def test_same_seed_same_run(small_config):
    cfg = small_config.model_copy(update={"t_max": 1.0})
    a, b = simulate(cfg), simulate(cfg)
    assert [m.model_dump() for m in a.metrics] == [m.model_dump() for m in b.metrics]
    assert a.trajectory == b.trajectory


def test_simulate_records_each_tick(small_config):
    cfg = small_config.model_copy(update={"t_max": 2.0})
    result = simulate(cfg)
    assert [m.t for m in result.metrics] == pytest.approx([0.0, 1.0, 2.0])
    assert result.steps == 20
    assert len(result.trajectory) == 21 * cfg.n_r
    assert result.max_speed <= cfg.v_max + 1e-9
    assert result.t_end == pytest.approx(2.0)


def test_csv_rows(tmp_path):
    row = trajectory_row(0.1, 0, [1.0, 2.0, 0.5, 0.0], [3.0, 4.0])
    assert row == ["0.1", "0", "1.000000", "2.000000", "0.500000", "0.000000", "3.000000", "4.000000"]
    out = write_csv(tmp_path / "m.csv", METRICS_COLUMNS, [["0.0", "0.5", "0.1", "1", "0"]])
    assert out.read_text() == "t,coverage,rms_psi,robots_done,fleet_done\n0.0,0.5,0.1,1,0\n"
    m = MetricsRow(t=2.0, coverage=0.25, rms_psi=0.1234567, done=[True, False], fleet_done=False)
    assert metrics_row(m) == ["2.0", "0.250000", "0.123457", "1", "0"]


def pin_goal(robot, target):
    goal = robot.stack.goal
    goal.graph.replace_factor(unary_prior(f"{goal.var_id}/prior", goal.var_id, target, [1e-3, 1e-3]), prime=True)
    iterate(goal.graph, 1)


def test_regions_beyond_comms_radius_stay_silent():
    cfg = WorldConfig(n_r=2, d=100.0, r_d=10.0, r_c=20.0, r_s=5.0, t_max=5.0, seed=3)
    starts = np.array([[15.0, 15.0], [25.0, 15.0]])
    world = World(cfg, make_field([1.0] * 100, d=100.0), starts, np.random.SeedSequence(0))
    far = [r.stack.info.graph.variables[r.stack.info.var_id(99)].belief for r in world.robots]
    world.step()

    for robot, start, belief in zip(world.robots, starts, far):
        info = robot.stack.info
        near = set(regions_within(world.field, start, cfg.r_c))
        assert info.active_regions == near
        assert len(near) < info.n_m
        mailbox = Mailbox()
        post_outgoing(mailbox, info.graph)
        senders = {sender for _, sender, _ in mailbox.collect(1 - robot.id)}
        assert senders == {info.var_id(m) for m in near}
        # region 99 sits in the far corner: inactive, so its belief is left as it was
        assert info.graph.variables[info.var_id(99)].belief is belief


def test_consensus_beats_sensor_noise():
    sigma = 0.1
    cfg = WorldConfig(
        n_r=8, d=40.0, r_d=10.0, r_c=40.0, r_s=30.0, t_max=5.0, seed=3,
        sigmas=Sigmas(sigma_psi=sigma),
    )
    positions = [[x, y] for y in (14.0, 26.0) for x in (14.0, 18.0, 22.0, 26.0)]
    world = world_at(cfg, positions, truth=[0.5] * 16)
    neighbors = world.discover_neighbors()
    for robot in world.robots:
        world.sync_factors(robot, neighbors[robot.id])
    # half the fleet samples every region, the other half only hears about them
    for robot in world.robots[:4]:
        assert world.measure(robot) == 16
    for robot in world.robots[4:]:
        robot.stack.info.activate(range(16))
    world.run_layer("info", 20)
    assert metrics.rms_psi(world.robots, world.field) < sigma


def test_speed_limit_holds_across_fleet(small_config):
    cfg = small_config.model_copy(update={"n_r": 4, "init": "random", "t_max": 5.0})
    result = simulate(cfg)
    assert result.max_speed <= cfg.v_max + 1e-9
    speeds = [np.hypot(float(row[4]), float(row[5])) for row in result.trajectory]
    assert max(speeds) <= cfg.v_max + 1e-6
    assert result.min_separation >= 2 * cfg.r_r


def test_source_seek_done_never_reverts(small_config):
    truth = np.ones(16)
    truth[0] = 0.0
    cfg = small_config.model_copy(update={"sigmas": noiseless_sigmas()})
    world = world_at(cfg, [[5, 5], [8, 5]], truth)
    history = []
    for _ in range(100):
        world.step()
        if world.is_tick():
            history.append(metrics.source_seek_done(world.robots, world.field, cfg.psi_star))
    assert True in history
    first = history.index(True)
    assert all(history[first:])


def test_goal_switch_reorients_plan_within_one_second(small_config):
    cfg = small_config.model_copy(update={"n_r": 1})
    world = world_at(cfg, [[5, 20]])
    robot = world.robots[0]
    plan = robot.stack.planning
    pin_goal(robot, [35.0, 20.0])
    for _ in range(30):
        world.step()
    assert robot.pose[2] > 0.0

    target = np.array([5.0, 20.0])
    pin_goal(robot, target)
    reoriented = None
    for k in range(1, 11):
        world.step()
        heading = plan.state(plan.horizon_steps - 1)[2:]
        toward = target - robot.position
        if heading @ toward > np.cos(np.pi / 4) * np.linalg.norm(heading) * np.linalg.norm(toward):
            reoriented = k
            break
    assert reoriented is not None
    assert reoriented * cfg.dt <= 1.0


@pytest.mark.slow
def test_single_robot_reaches_fixed_goal(small_config):
    cfg = small_config.model_copy(update={"n_r": 1})
    world = world_at(cfg, [[4, 4]])
    robot = world.robots[0]
    pin_goal(robot, [30.0, 30.0])

    closest = np.inf
    for _ in range(200):
        world.step()
        closest = min(closest, float(np.linalg.norm(robot.position - [30.0, 30.0])))
    assert closest <= 2.0
    assert world.max_speed <= cfg.v_max + 1e-9


@pytest.mark.slow
def test_single_robot_arrives_in_kinematic_time(small_config):
    cfg = small_config.model_copy(update={"n_r": 1})
    start, target = np.array([4.0, 4.0]), np.array([30.0, 30.0])
    world = world_at(cfg, [start])
    robot = world.robots[0]
    pin_goal(robot, target)
    bound = np.linalg.norm(target - start) / cfg.v_max + 2.0

    arrival = None
    while world.t < bound + 1e-9:
        world.step()
        # the goal layer's own notion of having reached a target
        if np.linalg.norm(robot.position - target) <= cfg.r_d / 2:
            arrival = world.t
            break
    assert arrival is not None and arrival <= bound
    assert world.max_speed <= cfg.v_max + 1e-9


@pytest.mark.slow
def test_head_on_pair_keeps_apart_and_passes(small_config):
    world = world_at(small_config, [[5, 20], [35, 20]])
    a, b = world.robots
    pin_goal(a, [35.0, 20.0])
    pin_goal(b, [5.0, 20.0])
    for _ in range(400):
        world.step()
    assert world.min_separation >= 2 * small_config.r_r
    assert a.position[0] > 20.0 > b.position[0]
