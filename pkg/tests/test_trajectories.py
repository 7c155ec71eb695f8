"""Trajectory records, feature expectations, and the file store."""

from fractions import Fraction

import numpy as np
import pytest

from uavirl.errors import SchemaVersionError, TrajectoryFormatError
from uavirl.trajectories import (
    SOURCE_SCRIPTED,
    StepRecord,
    Trajectory,
    TrajectoryStore,
    discounted_feature_sum,
    feature_expectation,
    trajectory_from_lines,
    trajectory_set_hash,
    trajectory_to_lines,
    validate_chain,
    verify_features,
)
from uavirl.world import CellCoord


def make_traj(phis, scenario_id="abc", source="scripted-expert", actions=None):
    steps = []
    n = len(phis)
    for t, phi in enumerate(phis):
        steps.append(
            StepRecord(
                t=t,
                cell=CellCoord(t, 0),
                action=actions[t] if actions else 7,
                phi=tuple(phi),
                throughput_bps=1e6,
                interference_w=1e-10,
                done=t == n - 1,
            )
        )
    return Trajectory(scenario_id=scenario_id, source=source, steps=tuple(steps))


E1 = (1.0, 0.0, 0.0, 0.0, 0.0)
E2 = (0.0, 1.0, 0.0, 0.0, 0.0)


class TestDiscountedSum:
    def test_single_step(self):
        traj = make_traj([E1])
        for gamma in (0.5, 0.99, 1.0):
            assert np.array_equal(
                discounted_feature_sum(traj, gamma), np.array(E1)
            )

    def test_two_step_hand_sum(self):
        traj = make_traj([E1, E2])
        out = discounted_feature_sum(traj, 0.99)
        assert np.allclose(out, [1.0, 0.99, 0, 0, 0], rtol=0, atol=0)

    def test_constant_features_geometric_series(self):
        c = 0.37
        T = 9
        traj = make_traj([(c,) * 5] * T)
        gamma = 0.9
        expected = c * (1 - gamma**T) / (1 - gamma)
        assert np.allclose(discounted_feature_sum(traj, gamma), expected, rtol=1e-12)

    def test_gamma_validation(self):
        traj = make_traj([E1])
        with pytest.raises(ValueError):
            discounted_feature_sum(traj, 0.0)
        with pytest.raises(ValueError):
            discounted_feature_sum(traj, 1.5)


class TestFeatureExpectation:
    def test_single_equals_sum(self):
        traj = make_traj([E1, E2])
        assert np.array_equal(
            feature_expectation([traj], 0.99), discounted_feature_sum(traj, 0.99)
        )

    def test_identical_pair_idempotent(self):
        traj = make_traj([E1, E2])
        assert np.array_equal(
            feature_expectation([traj, traj], 0.99), feature_expectation([traj], 0.99)
        )

    def test_hand_average(self):
        a = make_traj([E1, E1])
        b = make_traj([E2, E2])
        out = feature_expectation([a, b], 0.5)
        assert np.allclose(out, [0.75, 0.75, 0, 0, 0], rtol=0, atol=0)

    def test_mixed_scenarios_rejected(self):
        a = make_traj([E1], scenario_id="one")
        b = make_traj([E1], scenario_id="two")
        with pytest.raises(ValueError):
            feature_expectation([a, b], 0.99)
        with pytest.raises(ValueError):
            feature_expectation([], 0.99)

    def test_permutation_invariance(self, rng):
        trajs = [
            make_traj(rng.uniform(0, 1, size=(int(rng.integers(1, 6)), 5)))
            for _ in range(6)
        ]
        base = feature_expectation(trajs, 0.99)
        for _ in range(5):
            order = rng.permutation(len(trajs))
            assert np.allclose(
                feature_expectation([trajs[i] for i in order], 0.99), base, atol=1e-12
            )

    def test_bound(self, rng):
        gamma = 0.97
        for _ in range(50):
            trajs = [
                make_traj(rng.uniform(0, 1, size=(int(rng.integers(1, 30)), 5)))
                for _ in range(3)
            ]
            mu = feature_expectation(trajs, gamma)
            assert np.all(mu >= 0)
            assert np.all(mu <= 1 / (1 - gamma))

    def test_rational_arithmetic_oracle(self, rng):
        """Exact reimplementation with Fractions, trajectories of length <= 5."""
        gamma = Fraction(99, 100)
        for _ in range(25):
            lengths = rng.integers(1, 6, size=3)
            trajs = []
            exact = [Fraction(0)] * 5
            for n in lengths:
                phis = rng.uniform(0, 1, size=(int(n), 5))
                trajs.append(make_traj(phis))
                for t in range(int(n)):
                    for k in range(5):
                        exact[k] += gamma**t * Fraction(phis[t, k])
            expected = np.array([float(x / len(lengths)) for x in exact])
            got = feature_expectation(trajs, 0.99)
            assert np.allclose(got, expected, atol=1e-12, rtol=0)


class TestValidation:
    def test_empty_rejected(self):
        with pytest.raises(TrajectoryFormatError):
            Trajectory(scenario_id="x", source="scripted-expert", steps=())

    def test_done_must_be_last_only(self):
        good = make_traj([E1, E2])
        assert good.steps[-1].done
        bad_steps = list(good.steps)
        bad_steps[0] = StepRecord(
            t=0, cell=CellCoord(0, 0), action=7, phi=E1,
            throughput_bps=1e6, interference_w=0.0, done=True,
        )
        with pytest.raises(TrajectoryFormatError):
            Trajectory(scenario_id="x", source="s", steps=tuple(bad_steps))

    def test_step_indices_consecutive(self):
        rec = StepRecord(
            t=5, cell=CellCoord(0, 0), action=7, phi=E1,
            throughput_bps=0.0, interference_w=0.0, done=True,
        )
        with pytest.raises(TrajectoryFormatError):
            Trajectory(scenario_id="x", source="s", steps=(rec,))

    def test_chain_validation_against_world(self, scenario, expert_trajs):
        validate_chain(scenario, expert_trajs[0])
        assert verify_features(scenario, expert_trajs[0]) == []
        # corrupt one feature entry: drift is reported
        steps = list(expert_trajs[0].steps)
        rec = steps[2]
        steps[2] = StepRecord(
            t=rec.t, cell=rec.cell, action=rec.action,
            phi=(0.5,) * 5, throughput_bps=rec.throughput_bps,
            interference_w=rec.interference_w, done=rec.done,
        )
        bad = Trajectory(expert_trajs[0].scenario_id, SOURCE_SCRIPTED, tuple(steps))
        assert any("features" in msg for msg in verify_features(scenario, bad))

    def test_chain_validation_detects_teleport(self, scenario, expert_trajs):
        steps = list(expert_trajs[0].steps)
        rec = steps[3]
        steps[3] = StepRecord(
            t=rec.t, cell=CellCoord(0, 4), action=rec.action, phi=rec.phi,
            throughput_bps=rec.throughput_bps, interference_w=rec.interference_w,
            done=rec.done,
        )
        bad = Trajectory(expert_trajs[0].scenario_id, SOURCE_SCRIPTED, tuple(steps))
        with pytest.raises(TrajectoryFormatError):
            validate_chain(scenario, bad)


class TestStore:
    def test_round_trip_byte_exact(self, tmp_path, expert_trajs):
        store = TrajectoryStore(tmp_path)
        traj = expert_trajs[0]
        traj_id = store.save(traj)
        loaded = store.load(traj_id)
        assert loaded == traj
        payload = (tmp_path / f"{traj_id}.jsonl").read_bytes()
        assert payload == trajectory_to_lines(traj).encode("utf-8")
        assert b"\r" not in payload
        assert payload.endswith(b"\n")

    def test_truncated_file_rejected(self, tmp_path, expert_trajs):
        store = TrajectoryStore(tmp_path)
        traj_id = store.save(expert_trajs[0])
        path = tmp_path / f"{traj_id}.jsonl"
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(TrajectoryFormatError):
            store.load(traj_id)

    def test_schema_version_mismatch(self):
        lines = trajectory_to_lines(make_traj([E1])).split("\n")
        header = lines[0].replace('"schema_version":1', '"schema_version":9')
        with pytest.raises(SchemaVersionError):
            trajectory_from_lines("\n".join([header] + lines[1:]))

    def test_listing_insertion_ordered(self, tmp_path, expert_trajs):
        store = TrajectoryStore(tmp_path)
        ids = [store.save(expert_trajs[i % len(expert_trajs)]) for i in range(10)]
        assert store.ids() == ids
        assert len(set(ids)) == 10

    def test_missing_id(self, tmp_path):
        with pytest.raises(TrajectoryFormatError):
            TrajectoryStore(tmp_path).load("zzz")

    def test_verify_mode_warns_on_drift(self, tmp_path, scenario, expert_trajs, caplog):
        store = TrajectoryStore(tmp_path)
        traj_id = store.save(expert_trajs[0])
        import logging

        with caplog.at_level(logging.WARNING):
            store.load(traj_id, verify_scenario=scenario)
        assert not caplog.records  # clean trajectory: no warnings

    def test_set_hash_orders_and_contents(self, expert_trajs):
        a = trajectory_set_hash(list(expert_trajs))
        b = trajectory_set_hash(list(expert_trajs))
        assert a == b
        assert trajectory_set_hash(list(expert_trajs[:5])) != a
