"""Command-line interface.

Every command accepts ``--config run.json``; keys are the long flag names
with dashes replaced by underscores. Flags given on the command line win over
the config file. Relative paths in a config file are resolved against the
file's directory.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import NoiseSpec, RelationalGraph, StochasticVector, concentration_index, random_simplex
from .errors import NumericalError, ValidationError
from .ident import (
    DEFAULT_CONSTRAINT_WEIGHT,
    closed_loop_decompose,
    full_rows,
    identify,
)
from .serialization import (
    graph_to_dict,
    read_graph,
    read_json,
    read_models,
    read_series,
    write_json,
    write_models,
    write_series,
    write_trajectory,
)
from .sim import (
    SimulationSpec,
    forecast,
    generate_competition_scenario,
    favored_agents,
    make_rng,
    simulate,
)
from .slrsolver import SolverConfig

log = logging.getLogger("ssrc")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
GRAPH_KINDS = ("complete", "hub", "ring", "self_loops")
PATH_KEYS = ("input", "graph", "model", "truth", "output_dir")


@dataclass
class RunConfig:
    input: Optional[str] = None
    graph: Optional[str] = None
    model: Optional[str] = None
    truth: Optional[str] = None
    output_dir: str = "."
    order: int = 2
    seed: int = 0
    normalize: bool = False
    constraint_weight: float = DEFAULT_CONSTRAINT_WEIGHT
    epsilon: float = 1e-10
    delta: float = 1e-10
    max_iters: int = 50
    horizon: int = 10
    initial: Optional[list] = None
    regime: Optional[list] = None
    restart_every: Optional[int] = None
    process_std: float = 0.0
    measurement_std: float = 0.0
    agents: int = 4
    bias: float = 1.0
    graph_kind: str = "complete"
    steps: Optional[int] = None
    favored: int = 1
    reconstruction_samples: int = 100

    @classmethod
    def from_sources(cls, args, config_path=None):
        values = {}
        if config_path:
            doc = read_json(config_path)
            if not isinstance(doc, dict):
                raise ValidationError("config file must hold a JSON object")
            known = {f.name for f in fields(cls)}
            unknown = sorted(set(doc) - known)
            if unknown:
                raise ValidationError(f"unknown config keys {unknown}")
            base = Path(config_path).resolve().parent
            for key, val in doc.items():
                if key in PATH_KEYS and val is not None:
                    val = str(base / val)
                values[key] = val
        for f in fields(cls):
            val = getattr(args, f.name, None)
            if val is not None and val is not False:
                values[f.name] = val
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self):
        if int(self.order) < 1:
            raise ValidationError("order must be >= 1")
        for name in ("epsilon", "delta"):
            if not float(getattr(self, name)) > 0:
                raise ValidationError(f"{name} must be positive")
        if float(self.constraint_weight) < 0:
            raise ValidationError("constraint weight must be nonnegative")
        if int(self.max_iters) < 1:
            raise ValidationError("max-iters must be >= 1")
        if int(self.horizon) < 0:
            raise ValidationError("horizon must be >= 0")
        if int(self.seed) < 0:
            raise ValidationError("seed must be >= 0")
        if self.process_std < 0 or self.measurement_std < 0:
            raise ValidationError("noise levels must be nonnegative")
        if self.graph_kind not in GRAPH_KINDS:
            raise ValidationError(f"graph kind must be one of {GRAPH_KINDS}")
        for key in ("input", "graph", "model", "truth"):
            path = getattr(self, key)
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{key} file not found: {path}")

    def require(self, *keys):
        missing = [k for k in keys if getattr(self, k) is None]
        if missing:
            raise ValidationError(f"missing required option(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")

    def solver(self):
        return SolverConfig(delta=float(self.delta), epsilon=float(self.epsilon),
                            max_iters=int(self.max_iters))

    @property
    def out(self):
        return Path(self.output_dir)


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_labels(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _align_series(series, graph):
    """Reorder series columns to the graph's node order."""
    if tuple(series.column_names) == graph.names:
        return series
    if sorted(series.column_names) != sorted(graph.names):
        raise ValidationError(
            f"series columns {list(series.column_names)} do not match graph nodes {list(graph.names)}"
        )
    perm = [series.column_names.index(name) for name in graph.names]
    return type(series)(series.states[:, perm], series.regime_labels, graph.names, series.segments)


def _trajectory_summary(traj):
    states = traj.states
    sums = states.sum(axis=1)
    conc = concentration_index(states)
    return {
        "horizon": traj.horizon,
        "per_step_sums": sums.tolist(),
        "max_sum_error": float(np.max(np.abs(sums - 1.0))),
        "concentration_index": conc.tolist(),
        "final_state": states[-1].tolist(),
        "regimes": list(traj.applied_regimes),
    }


def cmd_identify(cfg):
    cfg.require("input", "graph")
    graph = read_graph(cfg.graph)
    series = _align_series(read_series(cfg.input, normalize=cfg.normalize), graph)
    models = identify(series, graph, int(cfg.order), cfg.solver(), float(cfg.constraint_weight))
    write_models(cfg.out / "model.json", models)

    report = {"order": int(cfg.order), "node_names": list(graph.names),
              "full_rows": [graph.names[j] for j in full_rows(graph)],
              "identifiable": len(full_rows(graph)) <= 1, "regimes": []}
    for m in models.values():
        pattern = m.dictionary.pattern()
        support = int(np.count_nonzero(m.W_hat))
        report["regimes"].append({
            "regime_id": m.regime_id,
            "transitions": int(series.transition_indices(
                None if series.regime_labels is None else m.regime_id).size),
            "fit_rmse": m.fit_rmse,
            "residual_cov": m.residual_cov.tolist(),
            "dictionary_size": m.dictionary.size,
            "support_size": support,
            "sparsity": support / m.dictionary.size,
            "max_column_sum_error": float(np.max(np.abs(m.W_hat.sum(axis=0) - 1.0))),
            "pattern_respected": bool(np.all(m.W_hat[~pattern] == 0)),
            "coordinates": m.table.labels(list(graph.names)),
            "coupling_matrix": m.W_hat.tolist(),
            "adjacency": m.adjacency().tolist(),
        })
    write_json(cfg.out / "report.json", report)
    log.info("identified %d model(s) into %s", len(models), cfg.out)


def _schedule(cfg, models, horizon):
    labels = cfg.regime or [next(iter(models))]
    if len(labels) == 1:
        return tuple(labels) * horizon
    if len(labels) != horizon:
        raise ValidationError(f"regime schedule has {len(labels)} entries for horizon {horizon}")
    return tuple(labels)


def cmd_simulate(cfg):
    cfg.require("model")
    models = read_models(cfg.model)
    first = next(iter(models.values()))
    n = first.n
    x0 = StochasticVector(cfg.initial if cfg.initial is not None else np.full(n, 1.0 / n))
    noise = None
    if cfg.process_std or cfg.measurement_std:
        noise = NoiseSpec.isotropic(n, cfg.process_std, cfg.measurement_std, int(cfg.seed))
    horizon = int(cfg.horizon)
    spec = SimulationSpec(models, _schedule(cfg, models, horizon), horizon, x0, noise=noise,
                          seed=int(cfg.seed), restart_every=cfg.restart_every)
    traj = simulate(spec)
    write_trajectory(cfg.out / "trajectory.csv", traj, first.graph.names)
    summary = _trajectory_summary(traj)
    if noise is not None:
        summary["observations"] = traj.observations.tolist()
    write_json(cfg.out / "summary.json", summary)


def cmd_forecast(cfg):
    cfg.require("model", "input")
    models = read_models(cfg.model)
    first = next(iter(models.values()))
    history = _align_series(read_series(cfg.input, normalize=cfg.normalize), first.graph)
    horizon = int(cfg.horizon)
    schedule = _schedule(cfg, models, horizon) if cfg.regime else None
    traj = forecast(models, history, horizon, schedule)
    write_trajectory(cfg.out / "forecast.csv", traj, first.graph.names)
    summary = _trajectory_summary(traj)
    if cfg.truth:
        truth = _align_series(read_series(cfg.truth, normalize=cfg.normalize), first.graph).states
        k = min(truth.shape[0], horizon)
        err = np.max(np.abs(traj.states[1:k + 1] - truth[:k]), axis=1)
        summary["per_step_max_error"] = err.tolist()
        summary["max_error"] = float(err.max(initial=0.0))
    write_json(cfg.out / "forecast_summary.json", summary)


def cmd_decompose(cfg):
    cfg.require("model")
    models = read_models(cfg.model)
    rng = make_rng(int(cfg.seed), 5)
    out = {"models": []}
    for m in models.values():
        dec = closed_loop_decompose(m)
        names = list(m.graph.names)
        labels = m.table.labels(names)
        xs = random_simplex(rng, m.n, size=int(cfg.reconstruction_samples))
        err = float(np.max(np.abs(dec.evaluate(xs) - m.predict(xs)), initial=0.0))
        blocks = []
        for d, Wd in enumerate(dec.blocks, start=1):
            blocks.append({
                "degree": d,
                "coordinates": labels[m.table.degree_slice(d)],
                "matrix": Wd.tolist(),
                "column_sums": Wd.sum(axis=0).tolist(),
            })
        blocks.append({"degree": 0, "coordinates": ["1"], "matrix": dec.constant[:, None].tolist(),
                       "column_sums": [float(dec.constant.sum())]})
        out["models"].append({
            "regime_id": m.regime_id,
            "order": m.order,
            "node_names": names,
            "scale": 1.0 / (m.order + 1),
            "blocks": blocks,
            "constant": dec.constant.tolist(),
            "reconstruction_samples": int(cfg.reconstruction_samples),
            "reconstruction_error": err,
        })
    write_json(cfg.out / "blocks.json", out)


def cmd_gen_synthetic(cfg):
    n = int(cfg.agents)
    names = [f"agent{i + 1}" for i in range(n)]
    graph = getattr(RelationalGraph, cfg.graph_kind)(n, names)
    truth, series = generate_competition_scenario(
        n, int(cfg.order), graph, float(cfg.bias), int(cfg.seed), steps=cfg.steps,
        restart_every=cfg.restart_every or 20, n_favored=int(cfg.favored))
    write_series(cfg.out / "series.csv", series)
    write_models(cfg.out / "truth_model.json", truth)
    doc = graph_to_dict(graph)
    doc["favored"] = [names[i] for i in favored_agents(n, int(cfg.seed), int(cfg.favored))]
    write_json(cfg.out / "graph.json", doc)


COMMANDS = {
    "identify": cmd_identify,
    "simulate": cmd_simulate,
    "forecast": cmd_forecast,
    "decompose": cmd_decompose,
    "gen-synthetic": cmd_gen_synthetic,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--output-dir", help="directory for outputs (default: .)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ssrc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", parents=[common], help="identify coupling models from a series")
    p.add_argument("--input", help="series CSV")
    p.add_argument("--graph", help="relational graph JSON")
    p.add_argument("--order", type=int, help="embedding order p (default 2)")
    p.add_argument("--normalize", action="store_true", help="rescale nonnegative rows to sum to 1")
    p.add_argument("--constraint-weight", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--max-iters", type=int)

    for name, help_ in (("simulate", "simulate identified models"),
                        ("forecast", "forecast from the end of a history")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--model", help="model JSON")
        p.add_argument("--horizon", type=int)
        p.add_argument("--regime", type=_parse_labels,
                       help="regime label, or one comma-separated label per step")
        if name == "simulate":
            p.add_argument("--initial", type=_parse_floats, help="initial state, comma-separated")
            p.add_argument("--restart-every", type=int)
            p.add_argument("--process-std", type=float)
            p.add_argument("--measurement-std", type=float)
        else:
            p.add_argument("--input", help="history CSV")
            p.add_argument("--truth", help="held-out states following the history (CSV)")
            p.add_argument("--normalize", action="store_true")

    p = sub.add_parser("decompose", parents=[common], help="split a model into degree blocks")
    p.add_argument("--model", help="model JSON")

    p = sub.add_parser("gen-synthetic", parents=[common], help="write a synthetic competition scenario")
    p.add_argument("--agents", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--bias", type=float, help="concentration bias in [0, 1]")
    p.add_argument("--graph-kind", choices=GRAPH_KINDS)
    p.add_argument("--steps", type=int)
    p.add_argument("--restart-every", type=int)
    p.add_argument("--favored", type=int, help="number of favored agents")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.from_sources(args, args.config)
        COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
