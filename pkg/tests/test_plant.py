"""Plant side: chain-of-integrator rates, friction regressor, formation
targets and edge errors."""

import numpy as np
import pytest

from edgeform.graphs import Topology, build_incidence
from edgeform.plant import (FormationTarget, FrictionModel, check_admissible,
                            edge_errors, friction_regressor, offsets_from_positions,
                            pentagon_targets, plant_rate)

TREE = Topology(num_nodes=5, edges=((2, 1), (2, 3), (3, 4), (4, 5)))


class TestFriction:
    def test_zero_velocity(self):
        assert np.all(friction_regressor(np.zeros((3, 2))) == 0.0)

    def test_hand_value(self):
        # tanh(0.5) - tanh(5) = 0.462117 - 0.999909
        val = friction_regressor(np.array([0.05]))
        assert val[0] == pytest.approx(-0.537792, abs=1e-6)

    def test_saturation_limit(self):
        assert abs(friction_regressor(np.array([50.0]))[0]) < 1e-12

    def test_bounded_below_one(self):
        v = np.linspace(-5, 5, 1001)
        assert np.all(np.abs(friction_regressor(v)) < 1.0)

    def test_model_shapes(self):
        model = FrictionModel()
        phi = model.regressor(np.zeros((5, 2)))
        assert phi.shape == (5, 1, 2)
        none = FrictionModel(kind="none")
        assert none.regressor(np.zeros((5, 2))).shape == (5, 0, 2)
        assert none.num_params == 0

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            FrictionModel(kind="coulomb")


class TestPlantRate:
    def test_all_zero(self):
        x = np.zeros((3, 2, 2))
        rate = plant_rate(x, np.zeros((3, 2)), np.zeros((3, 1, 2)),
                          np.zeros((3, 1, 2)))
        assert np.all(rate == 0.0)

    def test_double_integrator(self):
        x = np.zeros((2, 2, 1))
        x[:, 1, 0] = [1.0, -2.0]
        u = np.ones((2, 1))
        rate = plant_rate(x, u, np.zeros((2, 0, 1)), np.zeros((2, 0, 1)))
        assert np.allclose(rate[:, 0, 0], [1.0, -2.0])   # position rate = velocity
        assert np.allclose(rate[:, 1, 0], [1.0, 1.0])    # velocity rate = u

    def test_parameter_coupling(self):
        x = np.zeros((1, 2, 1))
        phi = np.array([[[-0.537792]]])
        theta = np.array([[[-0.25]]])
        rate = plant_rate(x, np.zeros((1, 1)), theta, phi)
        assert rate[0, 1, 0] == pytest.approx(0.134448, abs=1e-6)


class TestTargets:
    def test_pentagon_vertices(self):
        inc = build_incidence(TREE)
        target = pentagon_targets(inc.E)
        p = target.desired_positions
        assert np.allclose(p[0], [1.0, 0.0])
        assert np.allclose(p[1], [0.309017, 0.951057], atol=1e-6)

    def test_pentagon_cycle_closure(self):
        cycle = Topology(num_nodes=5,
                         edges=((1, 2), (2, 3), (3, 4), (4, 5), (5, 1)))
        inc = build_incidence(cycle)
        target = pentagon_targets(inc.E)
        assert abs(target.offsets.sum(axis=0)).max() < 1e-12

    def test_pentagon_requires_five_agents(self):
        inc = build_incidence(Topology(num_nodes=3, edges=((1, 2), (2, 3))))
        with pytest.raises(ValueError):
            pentagon_targets(inc.E)

    def test_admissibility_rejects_cycle_violation(self):
        cycle = Topology(num_nodes=3, edges=((1, 2), (2, 3), (3, 1)))
        inc = build_incidence(cycle)
        bad = np.array([[1.0], [1.0], [1.0]])   # sums to 3 around the cycle
        with pytest.raises(ValueError):
            check_admissible(bad, inc.E)
        good = np.array([[1.0], [1.0], [-2.0]])
        check_admissible(good, inc.E)

    def test_offsets_from_positions(self):
        inc = build_incidence(TREE)
        desired = np.arange(10.0).reshape(5, 2)
        target = offsets_from_positions(desired, inc.E)
        assert np.allclose(target.offsets, inc.E.T @ desired)


class TestEdgeErrors:
    def test_exact_formation(self):
        inc = build_incidence(TREE)
        target = pentagon_targets(inc.E)
        errors = edge_errors(target.desired_positions, target, inc)
        assert np.abs(errors).max() < 1e-12

    def test_study_initial_positions(self):
        inc = build_incidence(TREE)
        target = pentagon_targets(inc.E)
        x0 = np.array([[1.0, 1.2], [0.6, 2.3], [-0.8, 2.1],
                       [-1.4, 0.5], [-0.2, 0.35]])
        errors = edge_errors(x0, target, inc)
        # edge 1 is (2,1): (x2 - x1) - (p2^d - p1^d)
        assert np.allclose(errors[0], [0.290983, 0.148943], atol=1e-6)

    def test_translation_invariance(self):
        rng = np.random.default_rng(2)
        inc = build_incidence(TREE)
        target = pentagon_targets(inc.E)
        x = rng.normal(size=(5, 2))
        shifted = x + np.array([17.0, -4.0])
        assert np.allclose(edge_errors(x, target, inc),
                           edge_errors(shifted, target, inc))

    def test_direct_offsets_target(self):
        inc = build_incidence(TREE)
        offsets = np.zeros((4, 2))
        target = FormationTarget(offsets=offsets)
        x = np.ones((5, 2))
        assert np.abs(edge_errors(x, target, inc)).max() < 1e-12
