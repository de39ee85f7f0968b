"""Simulation, forecasting and synthetic scenarios for coupling models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .core import (
    NoiseSpec,
    StochasticVector,
    TimeSeriesFrame,
    project_to_simplex,
    random_simplex,
)
from .errors import DimensionError, UnknownRegimeError, ValidationError
from .ident import DEFAULT_REGIME, CouplingModel, build_dictionary
from .embedding import build_monomial_table, embed_reduced

CHOLESKY_JITTER = 1e-12


def make_rng(seed, stream=0):
    """Counter-based generator for one named stream of ``seed``.

    Streams are independent children of the same seed sequence, so each
    consumer gets reproducible draws regardless of evaluation order.
    """
    child = np.random.SeedSequence(int(seed)).spawn(stream + 1)[stream]
    return np.random.Generator(np.random.Philox(child))


class GaussianSampler:
    """Zero-mean Gaussian draws with covariance ``cov`` via its Cholesky factor."""

    def __init__(self, cov, rng):
        cov = np.asarray(cov, dtype=float)
        self.rng = rng
        self.n = cov.shape[0]
        if not np.any(cov):
            self.L = None
            return
        try:
            self.L = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            self.L = np.linalg.cholesky(cov + CHOLESKY_JITTER * np.eye(self.n))

    def draw(self, size=None):
        shape = (self.n,) if size is None else (size, self.n)
        if self.L is None:
            return np.zeros(shape)
        z = self.rng.standard_normal(shape)
        return z @ self.L.T


def step(model, x, noise_draw=None):
    """Advance one step; noisy results are projected back onto the simplex."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise DimensionError(f"state has shape {x.shape}, model expects ({model.n},)")
    nxt = model.W_hat @ embed_reduced(x, model.table)
    if noise_draw is None:
        return nxt
    raw = nxt + noise_draw
    return project_to_simplex(raw) if np.any(noise_draw) else raw


@dataclass(frozen=True)
class SimulationSpec:
    """Inputs of :func:`simulate`.

    ``restart_every`` (optional) replaces the state with a fresh uniform
    simplex draw every that many steps, starting a new segment; this is how
    training data is made persistently exciting.
    """

    models: Mapping
    regime_schedule: tuple
    horizon: int
    initial_state: StochasticVector
    noise: Optional[NoiseSpec] = None
    observation_matrix: Optional[np.ndarray] = None
    seed: int = 0
    restart_every: Optional[int] = None

    def __post_init__(self):
        models = self.models
        if isinstance(models, CouplingModel):
            models = {models.regime_id: models}
        models = dict(models)
        if not models:
            raise ValidationError("no models given")
        object.__setattr__(self, "models", models)
        if int(self.horizon) < 0:
            raise ValidationError("horizon must be nonnegative")
        object.__setattr__(self, "horizon", int(self.horizon))
        schedule = tuple(str(s) for s in self.regime_schedule)
        if len(schedule) != self.horizon:
            raise DimensionError(f"schedule has {len(schedule)} entries for horizon {self.horizon}")
        missing = sorted(set(schedule) - set(models))
        if missing:
            raise UnknownRegimeError(f"no model for regime(s) {missing}")
        object.__setattr__(self, "regime_schedule", schedule)
        x0 = self.initial_state
        if not isinstance(x0, StochasticVector):
            x0 = StochasticVector(x0)
            object.__setattr__(self, "initial_state", x0)
        dims = {m.n for m in models.values()}
        if dims != {x0.n}:
            raise DimensionError(f"initial state has {x0.n} entries, models expect {sorted(dims)}")
        if self.noise is not None and self.noise.n != x0.n:
            raise DimensionError("noise covariance does not match the state dimension")
        if self.observation_matrix is not None:
            C = np.array(self.observation_matrix, dtype=float)
            if C.ndim != 2 or C.shape[1] != x0.n:
                raise DimensionError("observation matrix does not act on the state")
            object.__setattr__(self, "observation_matrix", C)
        if self.restart_every is not None and int(self.restart_every) < 1:
            raise ValidationError("restart_every must be positive")


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    observations: np.ndarray
    applied_regimes: tuple
    raw_states: Optional[np.ndarray] = None
    segments: Optional[np.ndarray] = None

    @property
    def horizon(self):
        return self.states.shape[0] - 1

    def to_frame(self, column_names=()):
        return TimeSeriesFrame(
            self.states,
            regime_labels=self.applied_regimes,
            column_names=column_names,
            segments=self.segments,
        )


def simulate(spec):
    """Roll the scheduled models forward from the initial state.

    Observations are ``C x(t) + r_t`` for the simulated states ``t = 1..horizon``.
    """
    n = spec.initial_state.n
    H = spec.horizon
    states = np.empty((H + 1, n))
    raw = np.empty((H + 1, n))
    states[0] = raw[0] = spec.initial_state.entries
    segments = np.zeros(H + 1, dtype=np.int64)

    process = measurement = None
    if spec.noise is not None:
        process = GaussianSampler(spec.noise.process_cov, make_rng(spec.noise.seed, 0))
        measurement = GaussianSampler(spec.noise.measurement_cov, make_rng(spec.noise.seed, 1))
    restart_rng = make_rng(spec.seed, 2)

    for t in range(H):
        if spec.restart_every and (t + 1) % spec.restart_every == 0:
            states[t + 1] = raw[t + 1] = random_simplex(restart_rng, n)
            segments[t + 1] = segments[t] + 1
            continue
        model = spec.models[spec.regime_schedule[t]]
        clean = model.W_hat @ embed_reduced(states[t], model.table)
        if process is None:
            raw[t + 1] = states[t + 1] = clean
        else:
            e = process.draw()
            raw[t + 1] = clean + e
            states[t + 1] = project_to_simplex(raw[t + 1]) if np.any(e) else clean
        segments[t + 1] = segments[t]

    C = spec.observation_matrix
    obs = states[1:] if C is None else states[1:] @ C.T
    if measurement is not None and H:
        obs = obs + measurement.draw(H)
    return Trajectory(
        states=states,
        observations=np.array(obs),
        applied_regimes=spec.regime_schedule,
        raw_states=raw,
        segments=segments if spec.restart_every else None,
    )


def _as_model_map(models):
    if isinstance(models, CouplingModel):
        return {models.regime_id: models}
    return dict(models)


def forecast(models, history, horizon, schedule=None):
    """Noise-free rollout from the last state of ``history``.

    Without an explicit ``schedule`` the last observed regime is kept; an
    unlabeled history requires a single model.
    """
    models = _as_model_map(models)
    if history.states.shape[0] < 1:
        raise ValidationError("history is empty")
    if schedule is None:
        if history.regime_labels:
            regime = history.regime_labels[-1]
        elif len(models) == 1:
            regime = next(iter(models))
        else:
            raise ValidationError("several models but no regime to continue; pass a schedule")
        if regime not in models:
            raise UnknownRegimeError(f"no model for regime {regime!r}")
        schedule = (regime,) * horizon
    x0 = project_to_simplex(history.states[-1]) if not _on_simplex(history.states[-1]) else history.states[-1]
    spec = SimulationSpec(models, tuple(schedule), horizon, StochasticVector(x0))
    return simulate(spec)


def _on_simplex(x, tol=1e-9):
    return np.all(x >= 0) and abs(x.sum() - 1.0) <= tol


def random_coupling(graph, p, rng, alpha=1.0):
    """Column-stochastic ``W`` with Dirichlet(``alpha``) columns over each admissible support."""
    table = build_monomial_table(graph.node_count, p)
    P = build_dictionary(graph, table).pattern()
    W = np.zeros(P.shape)
    for m in range(P.shape[1]):
        k = int(P[:, m].sum())
        if k:
            W[P[:, m], m] = rng.dirichlet(np.full(k, alpha))
    return W


def competition_coupling(graph, p, concentration_bias, favored):
    """Blend of uniform columns and columns concentrated on the ``favored`` agents.

    ``concentration_bias = 0`` gives columns uniform over their admissible
    rows; ``1`` puts each column's mass uniformly on the admissible favored
    agents (or on all admissible rows when none is favored).
    """
    if not 0.0 <= concentration_bias <= 1.0:
        raise ValidationError("concentration bias must lie in [0, 1]")
    table = build_monomial_table(graph.node_count, p)
    P = build_dictionary(graph, table).pattern()
    fav = np.zeros(graph.node_count, dtype=bool)
    fav[list(favored)] = True
    W = np.zeros(P.shape)
    for m in range(P.shape[1]):
        allowed = P[:, m]
        if not allowed.any():
            continue
        uniform = allowed / allowed.sum()
        target = allowed & fav
        conc = target / target.sum() if target.any() else uniform
        W[:, m] = (1.0 - concentration_bias) * uniform + concentration_bias * conc
    return W


def training_steps(q, restart_every=20, min_steps=200):
    """Steps needed for at least ``10 q`` usable transitions under restarts."""
    usable_per_segment = max(restart_every - 1, 1)
    segments = math.ceil(10 * q / usable_per_segment)
    return max(segments * restart_every + 1, min_steps)


def generate_competition_scenario(n, p, graph, concentration_bias, seed, steps=None,
                                  restart_every=20, n_favored=1):
    """Ground-truth coupling and a training series for the resource-competition study.

    The favored agents are drawn from ``seed`` (see :func:`favored_agents`).
    The training series restarts from a uniform simplex draw every
    ``restart_every`` steps.
    """
    if n < 2:
        raise ValidationError("need at least two agents")
    if graph.node_count != n:
        raise DimensionError("graph size differs from the number of agents")
    if not 1 <= n_favored <= n:
        raise ValidationError("n_favored must be between 1 and n")
    favored = favored_agents(n, seed, n_favored)
    W = competition_coupling(graph, p, concentration_bias, favored)
    truth = CouplingModel.from_matrix(W, graph, p)
    if steps is None:
        steps = training_steps(truth.dictionary.size, restart_every)
    x0 = random_simplex(make_rng(seed, 4), n)
    spec = SimulationSpec({DEFAULT_REGIME: truth}, (DEFAULT_REGIME,) * steps, steps,
                          StochasticVector(x0), seed=seed, restart_every=restart_every)
    traj = simulate(spec)
    frame = TimeSeriesFrame(traj.states, column_names=graph.names, segments=traj.segments)
    return truth, frame


def favored_agents(n, seed, n_favored=1):
    """Agents favored by :func:`generate_competition_scenario` for this seed."""
    rng = make_rng(seed, 3)
    return sorted(rng.choice(n, size=n_favored, replace=False).tolist())
