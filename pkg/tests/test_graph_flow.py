from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracflow.config import build_config, random_field
from fracflow.diagnostics import fit_rate, graph_fuglede_bounds
from fracflow.errors import NonFinite, StabilityCapExceeded
from fracflow.graph_flow import (
    GraphFlowState,
    curvature_graph,
    curvature_graph_terms,
    image_layers,
    periodic_perimeter_deficit,
    run_graph_flow,
    stability_cap,
    step_graph,
)
from fracflow.singular_kernel import HeightField, Domain
from fracflow.spectral import line_eigenvalue

import oracles

# oracles.graph_curvature_cos(0.05, 0.5) at x = 0
GRAPH_H0 = 5.226873197955523


def xs(N):
    return np.arange(N) / N


def gstate(func, N=128, s=0.5):
    return GraphFlowState.from_values(func(xs(N)), s)


def test_rejects_circle_field():
    with pytest.raises(ValueError):
        GraphFlowState(HeightField(Domain.CIRCLE, np.zeros(16)), 0.5)


class TestCurvature:
    @pytest.mark.parametrize("c", [0.0, 5.0, -2.0])
    def test_flat_graph(self, c):
        np.testing.assert_allclose(curvature_graph(gstate(lambda x: c + 0 * x, N=32)).values, 0.0, atol=1e-14)

    def test_against_oracle(self):
        H = curvature_graph(gstate(lambda x: 0.05 * np.cos(2 * np.pi * x), N=256)).values
        assert H[0] == pytest.approx(GRAPH_H0, rel=1e-8)

    def test_live_oracle(self):
        assert oracles.graph_curvature_cos(0.05, 0.5, M=100) == pytest.approx(GRAPH_H0, rel=1e-10)

    def test_terms_form_agrees(self):
        gaps = []
        for N in (128, 256):
            st_ = gstate(lambda x: 0.05 * np.cos(2 * np.pi * x) + 0.02 * np.sin(6 * np.pi * x), N=N)
            H = curvature_graph(st_).values
            gaps.append(np.max(np.abs(curvature_graph_terms(st_).values - H)) / np.abs(H).max())
        assert gaps[1] < 1e-7
        assert gaps[0] / gaps[1] > 30  # both forms converge to the same limit

    def test_linearisation_error_is_quadratic(self):
        mu = line_eigenvalue(1, 0.5)
        devs = []
        for A in (0.02, 0.01):
            u = gstate(lambda x: A * np.cos(2 * np.pi * x), N=256)
            devs.append(np.max(np.abs(curvature_graph(u).values - mu * u.u.values)) / (mu * A))
        assert devs[1] < 0.0015
        assert 3.5 <= devs[0] / devs[1] <= 4.5

    def test_reflection(self):
        N = 64
        u = random_field(N, 1.0, 7, 0.1)
        refl = np.roll(u[::-1], 1)  # u(-x) on the same grid
        a = curvature_graph(GraphFlowState.from_values(u, 0.5)).values
        b = curvature_graph(GraphFlowState.from_values(refl, 0.5)).values
        np.testing.assert_allclose(np.roll(a[::-1], 1), b, atol=1e-12)

    def test_large_oscillation_uses_more_images(self):
        assert image_layers(0.0) == 0
        assert image_layers(0.2) == 2
        st_ = gstate(lambda x: 0.4 * np.cos(2 * np.pi * x), N=256)
        H = curvature_graph(st_).values
        np.testing.assert_allclose(curvature_graph_terms(st_).values, H, atol=1e-7 * np.abs(H).max())

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), c=st.floats(-10, 10))
    def test_symmetries(self, seed, c):
        u = random_field(64, 1.0, seed, 0.1)
        H = curvature_graph(GraphFlowState.from_values(u, 0.5)).values
        H_up = curvature_graph(GraphFlowState.from_values(u + c, 0.5)).values
        H_neg = curvature_graph(GraphFlowState.from_values(-u, 0.5)).values
        scale = 1 + np.abs(H).max()
        np.testing.assert_allclose(H_up, H, atol=1e-10 * scale)
        np.testing.assert_allclose(H_neg, -H, atol=1e-12 * scale)


class TestDeficit:
    def test_flat(self):
        assert periodic_perimeter_deficit(gstate(lambda x: 0 * x, N=32)) == 0.0

    def test_level_unused(self):
        st_ = gstate(lambda x: 0.05 * np.sin(2 * np.pi * x))
        assert periodic_perimeter_deficit(st_, c=0.0) == periodic_perimeter_deficit(st_, c=3.0)
        with pytest.raises(NonFinite):
            periodic_perimeter_deficit(st_, c=np.nan)

    def test_sandwich(self):
        lo, val, hi = graph_fuglede_bounds(gstate(lambda x: 0.05 * np.sin(2 * np.pi * x), N=256))
        assert lo <= val <= hi

    def test_quadratic_at_small_amplitude(self):
        d = [periodic_perimeter_deficit(gstate(lambda x: A * np.sin(2 * np.pi * x))) for A in (0.01, 0.02)]
        assert d[1] / d[0] == pytest.approx(4.0, rel=0.05)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), shift=st.integers(0, 63))
    def test_translation_invariant(self, seed, shift):
        u = random_field(64, 1.0, seed, 0.1, norm="grad")
        a = periodic_perimeter_deficit(GraphFlowState.from_values(u, 0.5))
        b = periodic_perimeter_deficit(GraphFlowState.from_values(np.roll(u, shift) + 1.0, 0.5))
        assert b == pytest.approx(a, rel=1e-10)


class TestStep:
    def test_constant_is_stationary(self):
        st_ = gstate(lambda x: 5.0 + 0 * x, N=32)
        assert np.all(step_graph(st_, 0.5 * stability_cap(32, 0.5)).u.values == 5.0)

    def test_cap(self):
        st_ = gstate(lambda x: 0 * x, N=32)
        with pytest.raises(StabilityCapExceeded):
            step_graph(st_, 2 * stability_cap(32, 0.5))


class TestRun:
    def test_constant_records(self):
        _, tr = run_graph_flow(build_config({"kind": "graph", "cos": [5.0], "N": 32, "T": 1e-3, "cadence": 1}))
        assert len(tr) > 2
        np.testing.assert_array_equal(tr.column("mean"), 5.0)
        np.testing.assert_array_equal(tr.column("l2_dev"), 0.0)
        np.testing.assert_array_equal(tr.column("per_s_deficit"), 0.0)

    def test_cos_decay_rate(self):
        _, tr = run_graph_flow(build_config({"preset": "graph-cos", "N": 64, "T": 0.03, "cadence": 20}))
        fit = fit_rate(tr.column("t"), tr.column("l2_dev"))
        assert fit.rate == pytest.approx(line_eigenvalue(1, 0.5), rel=0.1)
        g = tr.column("sup_grad")
        assert np.all(g[1:] <= g[0] * (1 + 1e-6))

    def test_random_deficit_monotone(self):
        cfg = build_config({"kind": "graph", "initial": "random", "amplitude": 0.1, "amplitude_norm": "grad",
                            "N": 64, "T": 5e-3, "cadence": 10, "seed": 3})
        _, tr = run_graph_flow(cfg)
        assert not tr.halted
        assert np.max(np.diff(tr.column("per_s_deficit"))) <= 1e-10
