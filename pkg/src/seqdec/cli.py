"""Command-line front end.

Subcommands::

    seqdec run          --config CFG    simulate one policy, write trajectory and summary CSVs
    seqdec tune         --config CFG    grid or random search over policy parameters
    seqdec compare      --config CFG    evaluate several policies on the same seeds
    seqdec solve-pomdp  --model M.json --belief 0.5,0.5 --T 3 [--method exact|grid]
    seqdec oracle-check                 run the built-in oracle checks

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import pomdp
from .core import Estimate, SimulationError, derive_stream, evaluate_cumulative, paired_difference, replication_seeds, simulate
from .policies import PolicyDomainError, PolicySpec, TAGS, vfa_fit
from .problems import EnergyStorageModel, FluConfig, FluProblem, PureLearningModel
from .tuning import GRID, RANDOM, ParameterDomain, TuningDomainError, TuningProblem, tune

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_POLICY_SCHEMA = {
    "type": "object",
    "properties": {
        "tag": {"enum": list(TAGS)},
        "params": {"type": "object"},
        "features": {"type": "array", "items": {"type": "string"}},
        "policy_id": {"type": "string"},
        "components": {
            "type": "object",
            "properties": {"observe": {"$ref": "#/$defs/policy"}, "vaccinate": {"$ref": "#/$defs/policy"}},
            "additionalProperties": False,
        },
    },
    "required": ["tag"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"policy": _POLICY_SCHEMA},
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "problem": {
            "type": "object",
            "properties": {
                "family": {"enum": ["flu", "energy", "learning"]},
                "params": {"type": "object"},
            },
            "required": ["family"],
            "additionalProperties": False,
        },
        "policy": {"$ref": "#/$defs/policy"},
        "policies": {"type": "array", "items": {"$ref": "#/$defs/policy"}, "minItems": 1},
        "run": {
            "type": "object",
            "properties": {
                "T": {"type": "integer", "minimum": 0},
                "replications": {"type": "integer", "minimum": 1},
                "master_seed": {"type": "integer", "minimum": 0},
                "objective": {"enum": ["cost", "truth"]},
                "trajectory_csv": {"type": "string", "minLength": 1},
                "summary_csv": {"type": "string", "minLength": 1},
                "compare_csv": {"type": "string", "minLength": 1},
            },
            "additionalProperties": False,
        },
        "tune": {
            "type": "object",
            "properties": {
                "domain": {
                    "type": "object",
                    "minProperties": 1,
                    "additionalProperties": {
                        "type": "object",
                        "properties": {
                            "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                            "low": {"type": "number"},
                            "high": {"type": "number"},
                            "step": {"type": "number", "exclusiveMinimum": 0},
                        },
                        "additionalProperties": False,
                    },
                },
                "method": {"enum": [GRID, RANDOM]},
                "samples": {"type": "integer", "minimum": 1},
                "replications": {"type": "integer", "minimum": 1},
                "output": {"type": "string", "minLength": 1},
            },
            "required": ["domain"],
            "additionalProperties": False,
        },
    },
    "required": ["schema", "problem"],
    "additionalProperties": False,
}

RUN_DEFAULTS = {
    "replications": 1,
    "master_seed": 0,
    "objective": "cost",
    "trajectory_csv": "trajectory.csv",
    "summary_csv": "summary.csv",
    "compare_csv": "compare.csv",
}
TUNE_DEFAULTS = {"method": GRID, "samples": 20, "output": "tuning.csv"}

_FAMILIES = {"flu": FluConfig, "energy": EnergyStorageModel, "learning": PureLearningModel}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    family: str
    params: dict
    policies: list[PolicySpec]
    run: dict
    tune: dict | None = None
    single_policy: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(d, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"field {where}: {exc.message}") from None
        if ("policy" in d) == ("policies" in d):
            raise ConfigError("field <root>: give exactly one of 'policy' or 'policies'")
        try:
            if "policy" in d:
                policies = [PolicySpec.from_dict(d["policy"])]
            else:
                policies = [PolicySpec.from_dict(p) for p in d["policies"]]
        except PolicyDomainError as exc:
            raise ConfigError(f"field policy: {exc}") from None
        run = {**RUN_DEFAULTS, **d.get("run", {})}
        tune_sec = {**TUNE_DEFAULTS, **d["tune"]} if "tune" in d else None
        cfg = cls(d["problem"]["family"], dict(d["problem"].get("params", {})), policies, run, tune_sec, "policy" in d)
        cfg.build_model()
        return cfg

    def to_dict(self) -> dict:
        d: dict = {"schema": SCHEMA_VERSION, "problem": {"family": self.family, "params": self.params}}
        if self.single_policy:
            d["policy"] = self.policies[0].to_dict()
        else:
            d["policies"] = [p.to_dict() for p in self.policies]
        d["run"] = dict(self.run)
        if self.tune is not None:
            d["tune"] = dict(self.tune)
        return d

    def build_model(self):
        cls = _FAMILIES[self.family]
        names = {f.name for f in dataclasses.fields(cls) if f.init}
        unknown = sorted(set(self.params) - names)
        if unknown:
            raise ConfigError(f"field problem.params.{unknown[0]}: unknown parameter for family {self.family!r}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in self.params.items()}
        try:
            obj = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field problem.params: {exc}") from None
        model = FluProblem(obj) if self.family == "flu" else obj
        T = self.run.get("T")
        if T is not None and T > model.horizon:
            raise ConfigError(f"field run.T: {T} exceeds the model horizon {model.horizon}")
        return model


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ExperimentConfig.from_dict(d)


# --------------------------------------------------------------------------
# CSV helpers


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")


def trajectory_rows(model, traj, replication: int) -> tuple[list[str], list[list]]:
    header: list[str] | None = None
    rows = []
    for r in traj.records:
        sf = model.state_fields(r.state)
        df = model.decision_fields(r.decision)
        row_header = ["replication", "t"] + list(sf) + list(df) + ["contribution"]
        if r.truth is not None:
            row_header.append("truth")
        if header is None:
            header = row_header
        elif row_header != header:
            raise SimulationError("state fields changed shape within a trajectory", step=r.t)
        row = [replication, r.t] + list(sf.values()) + list(df.values()) + [r.contribution]
        if r.truth is not None:
            row.append(r.truth)
        rows.append(row)
    return header or ["replication", "t", "contribution"], rows


# --------------------------------------------------------------------------
# commands


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get("SEQDEC_OUT_DIR") or ".")


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def prepare_policy(spec: PolicySpec, model, master_seed: int) -> PolicySpec:
    """Fit VFA weights when the spec asks for it (``params.fit``) instead of giving them."""
    fit = spec.params.get("fit")
    if spec.tag != "VFA-Linear" or fit is None or "weights" in spec.params:
        return spec
    exploration = PolicySpec.from_dict(fit.get("exploration", {"tag": "PFA-Observe"}))
    result = vfa_fit(
        model, exploration, int(fit.get("replications", 20)), int(fit.get("sweeps", 3)),
        master_seed=derive_stream(master_seed, 0, "vfa-fit"),
    )
    params = {k: v for k, v in spec.params.items() if k != "fit"}
    params["weights"] = [float(v) for v in result.theta]
    return dataclasses.replace(spec, params=params)


def _seed(cfg: ExperimentConfig, args) -> int:
    return int(args.seed) if args.seed is not None else int(cfg.run["master_seed"])


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if not cfg.single_policy:
        raise ConfigError("field policies: 'run' takes a single 'policy'; use 'compare' for lists")
    model = cfg.build_model()
    seed = _seed(cfg, args)
    R, T, objective = cfg.run["replications"], cfg.run.get("T"), cfg.run["objective"]
    spec = prepare_policy(cfg.policies[0], model, seed)
    header, rows, values = None, [], []
    for r, s in enumerate(replication_seeds(seed, R)):
        try:
            traj = simulate(model, spec, s, T, log_truth=objective == "truth")
        except SimulationError as exc:
            raise SimulationError(f"replication {r}: {exc}", step=exc.step, replication=r) from exc
        h, rr = trajectory_rows(model, traj, r)
        header = header or h
        rows.extend(rr)
        values.append(traj.truth_total if objective == "truth" else traj.total)
    est = Estimate.from_values(values)
    out = _out_dir(args)
    write_csv(out / cfg.run["trajectory_csv"], header, rows)
    write_csv(
        out / cfg.run["summary_csv"],
        ["policy_id", "mean", "std", "ci_half_width", "replications", "seed"],
        [[spec.policy_id, est.mean, est.std, est.ci_half_width, est.replications, seed]],
    )
    _say(args, f"{spec.policy_id}: mean {fmt(est.mean)} +/- {fmt(est.ci_half_width)} (95% CI, R={R})")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = load_config(args.config)
    if cfg.tune is None:
        raise ConfigError("field tune: missing tune section")
    model = cfg.build_model()
    seed = _seed(cfg, args)
    try:
        domain = [ParameterDomain.from_dict(k, v) for k, v in sorted(cfg.tune["domain"].items())]
        problem = TuningProblem(
            model, prepare_policy(cfg.policies[0], model, seed), domain,
            replications=int(cfg.tune.get("replications", cfg.run["replications"])),
            master_seed=seed, method=cfg.tune["method"], samples=int(cfg.tune["samples"]), T=cfg.run.get("T"),
        )
        result = tune(problem)
    except (TuningDomainError, PolicyDomainError) as exc:
        raise ConfigError(f"field tune.domain: {exc}") from None
    path = _out_dir(args) / cfg.tune["output"]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(result.to_csv(), encoding="utf-8")
    best = ", ".join(f"{n}={fmt(v)}" for n, v in zip(result.names, result.best_theta))
    _say(args, f"best {best}: mean {fmt(result.best.mean)} +/- {fmt(result.best.ci_half_width)}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if len(cfg.policies) < 2:
        raise ConfigError("field policies: compare needs at least two policies")
    model = cfg.build_model()
    seed = _seed(cfg, args)
    R, T, objective = cfg.run["replications"], cfg.run.get("T"), cfg.run["objective"]
    ests = []
    for spec in cfg.policies:
        spec = prepare_policy(spec, model, seed)
        ests.append((spec, evaluate_cumulative(model, spec, seed, R, T=T, objective=objective)))
    rows = []
    first = ests[0][1]
    for spec, est in ests:
        diff = paired_difference(est, first)
        rows.append([spec.policy_id, est.mean, est.std, est.ci_half_width, est.replications, seed, diff.mean, diff.ci_half_width])
        _say(args, f"{spec.policy_id}: mean {fmt(est.mean)} +/- {fmt(est.ci_half_width)}; vs first {fmt(diff.mean)} +/- {fmt(diff.ci_half_width)}")
    write_csv(
        _out_dir(args) / cfg.run["compare_csv"],
        ["policy_id", "mean", "std", "ci_half_width", "replications", "seed", "paired_diff_mean", "paired_diff_ci_half_width"],
        rows,
    )
    return EXIT_OK


def _parse_belief(text: str, K: int) -> np.ndarray:
    try:
        b = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"--belief: cannot parse {text!r}") from None
    try:
        return pomdp.validate_belief(b, K)
    except pomdp.PomdpError as exc:
        raise ConfigError(f"--belief: {exc}") from None


def cmd_solve_pomdp(args) -> int:
    try:
        text = Path(args.model).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read model: {exc}") from None
    try:
        m = pomdp.DiscretePomdp.from_json(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except (pomdp.PomdpError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from None
    K = m.n_states
    b0 = _parse_belief(args.belief, K) if args.belief else np.full(K, 1.0 / K)
    T = m.horizon if args.T is None else args.T
    if T < 0:
        raise ConfigError("--T must be >= 0")
    if args.method == "exact":
        sol = pomdp.solve_exact_reachable(m, b0, T)
        value, action = sol.value, sol.action
    else:
        if args.h is None or not args.h > 0:
            raise ConfigError("--h must be > 0 for the grid method")
        gs = pomdp.solve_belief_grid(m, args.h, T)
        value = gs.value(b0)
        action = gs.action(b0) if T > 0 else None
        if args.table:
            header = [f"b{k}" for k in range(K)] + [f"V{k}" for k in range(T + 1)]
            rows = [list(gs.grid[g]) + list(gs.values[:, g]) for g in range(gs.grid.shape[0])]
            write_csv(_out_dir(args) / args.table, header, rows)
    label = "none" if action is None else (m.actions[action] if m.actions else action)
    _say(args, f"value {fmt(value)}")
    _say(args, f"first action {label}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    from ._oracles import run_all

    ok = True
    for name, passed, detail in run_all(args.seed if args.seed is not None else 0):
        ok &= passed
        _say(args, f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return EXIT_OK if ok else EXIT_RUNTIME


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default: $SEQDEC_OUT_DIR or .)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--quiet", action="store_true", help="suppress stdout")

    p = argparse.ArgumentParser(prog="seqdec", description="Sequential decision models and policy search.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (
        ("run", cmd_run, "simulate one policy"),
        ("tune", cmd_tune, "tune policy parameters"),
        ("compare", cmd_compare, "compare policies on common seeds"),
    ):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.add_argument("--config", required=True, help="experiment JSON")
        sp.set_defaults(func=fn)
    sp = sub.add_parser("solve-pomdp", parents=[common], help="solve a finite-horizon discrete POMDP")
    sp.add_argument("--model", "--config", dest="model", required=True, help="POMDP JSON")
    sp.add_argument("--belief", help="comma-separated initial belief (default uniform)")
    sp.add_argument("--T", type=int, help="horizon (default: model horizon)")
    sp.add_argument("--method", choices=("exact", "grid"), default="exact")
    sp.add_argument("--h", type=float, default=0.005, help="grid spacing for the grid method")
    sp.add_argument("--table", help="write the grid value table to this CSV")
    sp.set_defaults(func=cmd_solve_pomdp)
    sp = sub.add_parser("oracle-check", parents=[common], help="run the built-in oracle checks")
    sp.set_defaults(func=cmd_oracle_check)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, pomdp.PomdpError, ArithmeticError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
