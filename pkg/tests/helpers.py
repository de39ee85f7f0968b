"""Shared builders for synthetic ground truth used across the test modules."""

import numpy as np

from ssrc.core import RelationalGraph, StochasticVector, TimeSeriesFrame
from ssrc.ident import CouplingModel
from ssrc.sim import SimulationSpec, random_coupling, simulate


def random_identifiable_graph(n, rng):
    """One randomly chosen agent listens to everybody; every other agent
    listens to itself and a random proper subset of the rest."""
    hub = int(rng.integers(n))
    edges = {(hub, k) for k in range(n)}
    for j in range(n):
        if j == hub:
            continue
        others = [k for k in range(n) if k != j]
        size = int(rng.integers(0, max(n - 1, 1)))  # at most n-2 others
        picked = rng.choice(others, size=size, replace=False) if size else []
        edges |= {(j, j)} | {(j, int(k)) for k in picked}
    return RelationalGraph(n, sorted(edges))


def truth_model(graph, p, rng, regime="default"):
    W = random_coupling(graph, p, rng)
    return CouplingModel.from_matrix(W, graph, p, regime_id=regime)


def excited_series(models, schedule, seed, restart_every=20):
    """Noise-free trajectory of ``models`` with uniform simplex restarts."""
    models = models if isinstance(models, dict) else {models.regime_id: models}
    n = next(iter(models.values())).n
    x0 = StochasticVector(np.random.default_rng(seed).dirichlet(np.ones(n)))
    spec = SimulationSpec(models, tuple(schedule), len(schedule), x0, seed=seed,
                          restart_every=restart_every)
    traj = simulate(spec)
    return TimeSeriesFrame(traj.states, regime_labels=traj.applied_regimes,
                           segments=traj.segments)
