#!/usr/bin/env python3
"""
Pruebas del bucle de optimización bayesiana y del cálculo de regret.
"""

import numpy as np
import pytest

import fbo.bo_loop as bo_loop
from fbo.acquisition import AcquisitionConfig
from fbo.bo_loop import History, HistoryEntry, RunConfig, regret, run_bo
from fbo.errors import DomainError, InferenceError, RunAbortedError
from fbo.harness import ACKLEY_BOUNDS, ackley
from fbo.inference import MLIIConfig, SamplerConfig

FAST_ACQUISITION = AcquisitionConfig(restarts=3, candidates_per_restart=32)
FAST_SAMPLER = SamplerConfig(warmup=30, draws=16, thin=8)
FAST_MLII = MLIIConfig(restarts=3)


def _config(method='mlii', budget=3, seed=0, x0=(5.0, -7.0)):
    return RunConfig(
        method=method,
        budget=budget,
        seed=seed,
        initial_point=x0,
        bounds=ACKLEY_BOUNDS,
        sampler=FAST_SAMPLER,
        mlii=FAST_MLII,
        acquisition=FAST_ACQUISITION,
    )


def test_mlii_run_shape_and_incumbent():
    calls = []

    def objective(x):
        calls.append(np.array(x))
        return ackley(x)

    history = run_bo(objective, _config('mlii', budget=3))
    assert len(calls) == 4
    assert [e.step for e in history.entries] == [0, 1, 2, 3]
    assert history.entries[0].x == (5.0, -7.0)
    assert np.all(np.diff(history.best_so_far) <= 0.0)
    np.testing.assert_array_equal(history.best_so_far, np.minimum.accumulate(history.observations))
    for entry in history.entries:
        assert all(lo <= v <= hi for v, (lo, hi) in zip(entry.x, ACKLEY_BOUNDS))


def test_fbo_run_is_deterministic():
    a = run_bo(ackley, _config('fbo', budget=2, seed=7))
    b = run_bo(ackley, _config('fbo', budget=2, seed=7))
    assert [e.x for e in a.entries] == [e.x for e in b.entries]
    np.testing.assert_array_equal(a.observations, b.observations)


def test_methods_share_initial_observation():
    a = run_bo(ackley, _config('mlii', budget=1))
    b = run_bo(ackley, _config('fbo', budget=1))
    assert a.entries[0].x == b.entries[0].x
    assert a.entries[0].y == b.entries[0].y


def test_failed_inference_aborts_with_partial_history(monkeypatch):
    def broken(*args, **kwargs):
        raise InferenceError("sin convergencia")

    monkeypatch.setattr(bo_loop, 'fit_mlii', broken)
    with pytest.raises(RunAbortedError) as excinfo:
        run_bo(ackley, _config('mlii', budget=3))
    error = excinfo.value
    assert error.step == 1
    assert error.method == 'mlii'
    assert len(error.history) == 1


def test_failing_objective_aborts_at_its_step():
    calls = []

    def flaky(x):
        calls.append(x)
        if len(calls) == 3:
            raise ValueError("simulador caído")
        return ackley(x)

    with pytest.raises(RunAbortedError) as excinfo:
        run_bo(flaky, _config('mlii', budget=4))
    error = excinfo.value
    assert error.step == 2
    assert [e.step for e in error.history.entries] == [0, 1]
    assert isinstance(error.__cause__, ValueError)


def test_failing_initial_evaluation_aborts_with_empty_history():
    def broken(x):
        raise RuntimeError("sin licencia")

    with pytest.raises(RunAbortedError) as excinfo:
        run_bo(broken, _config('fbo', budget=2))
    assert excinfo.value.step == 0
    assert len(excinfo.value.history) == 0


def test_run_config_validation():
    with pytest.raises(DomainError):
        _config(method='random')
    with pytest.raises(DomainError):
        _config(budget=0)
    with pytest.raises(DomainError):
        _config(x0=(40.0, 0.0))


def _history(values):
    best = np.minimum.accumulate(values)
    entries = tuple(HistoryEntry(i, (0.0, 0.0), v, b, 0.0) for i, (v, b) in enumerate(zip(values, best)))
    return History('mlii', 0, entries)


def test_regret_is_best_so_far_minus_minimum():
    r = regret(_history([3.0, 4.0, 1.0, 2.0]), 0.5)
    np.testing.assert_allclose(r, [2.5, 2.5, 0.5, 0.5])
    assert r.size == 4


def test_regret_rejects_observation_below_minimum():
    with pytest.raises(DomainError):
        regret(_history([3.0, -1.0]), 0.0)


def test_regret_clips_tiny_negative_values():
    r = regret(_history([1.0, -1e-13]), 0.0)
    assert r[-1] == 0.0
