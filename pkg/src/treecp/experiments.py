"""Configured, reproducible experiment runs.

A run writes ``trials.csv`` (one row per trial, each carrying its seed),
``summary.json`` and ``manifest.json`` into the output directory.  The
config hash covers everything that affects results and nothing that does
not (worker count, output directory), so reruns under any parallelism
produce the same hash and byte-identical CSV files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__, chain, duality, levels, observables, stats
from ._rng import SEED_RULE, trial_seeds
from .errors import ConfigError, TreeCPError
from .graph import GraphTopology, build_dary_tree, level, read_edge_list
from .harris import sample_harris
from .parallel import map_trials, per_trial
from .params import ParameterSet

SCHEMA_VERSION = 1
KINDS = ("extinction", "duality-sweep", "phi", "gamma-probe", "spread", "coupling",
         "bstar", "expo-test", "rwchain", "supersolution")
# Kinds that run on a graph.
_GRAPH_KINDS = set(KINDS) - {"bstar", "rwchain", "supersolution"}


@dataclass
class ExperimentConfig:
    kind: str
    topology: dict = field(default_factory=dict)
    lam: Optional[float] = None
    horizon: float = 1e6
    trials: int = 1000
    seed: int = 0
    params: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    workers: Optional[int] = None
    out: str = "out"
    base_dir: str = "."

    def identity(self) -> dict:
        """Fields that determine results."""
        return {"kind": self.kind, "topology": self.topology, "lambda": self.lam,
                "horizon": self.horizon, "trials": self.trials, "seed": self.seed,
                "params": self.params, "options": self.options}

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str
    wall_time: float
    seed_rule: str
    outputs: list
    kind: str
    schema_version: int = SCHEMA_VERSION
    out_dir: str = "."

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as fh:
            data = json.load(fh)
        m = cls(**data)
        m.out_dir = str(Path(path).parent)
        return m


# -- loading ------------------------------------------------------------------

def _read_config_file(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="config", rule="readable file") from exc
    if path.suffix.lower() == ".json":
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", field="config", rule="valid JSON") from exc
    import tomli

    try:
        return tomli.loads(raw.decode())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}", field="config", rule="valid TOML") from exc


def _num(data: dict, key: str, kind, default=None, positive=False, required=False):
    if key not in data or data[key] is None:
        if required:
            raise ConfigError(f"missing {key}", field=key, rule="required")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number", field=key, rule="number")
    if kind is int and float(v) != int(v):
        raise ConfigError(f"{key} must be an integer", field=key, rule="integer")
    v = kind(v)
    if positive and not v > 0:
        raise ConfigError(f"{key} must be positive", field=key, rule="> 0")
    return v


def config_from_dict(data: dict, kind: Optional[str] = None, base_dir=".") -> ExperimentConfig:
    """Validate a raw config mapping.  Top-level keys: ``experiment``,
    ``lambda``, ``horizon``, ``trials``, ``seed``, ``workers``, ``out`` and
    the tables ``topology``, ``params``, ``options``."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a table", field="config", rule="mapping")
    known = {"experiment", "lambda", "horizon", "trials", "seed", "workers", "out",
             "topology", "params", "options"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", field=sorted(extra)[0], rule="known key")
    kind = kind or data.get("experiment")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment {kind!r}", field="experiment", rule=f"one of {KINDS}")
    if data.get("experiment") not in (None, kind):
        raise ConfigError("experiment differs from the command line", field="experiment",
                          rule="matches command")
    for key in ("topology", "params", "options"):
        if not isinstance(data.get(key, {}), dict):
            raise ConfigError(f"{key} must be a table", field=key, rule="mapping")
    cfg = ExperimentConfig(
        kind=kind,
        topology=dict(data.get("topology", {})),
        lam=_num(data, "lambda", float, positive=True, required=kind in _GRAPH_KINDS | {"bstar"}),
        horizon=_num(data, "horizon", float, 1e6, positive=True),
        trials=_num(data, "trials", int, 1000, positive=True),
        seed=_num(data, "seed", int, 0),
        params=dict(data.get("params", {})),
        options=dict(data.get("options", {})),
        workers=_num(data, "workers", int, None, positive=True),
        out=str(data.get("out", "out")),
        base_dir=str(base_dir),
    )
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative", field="seed", rule=">= 0")
    validate(cfg)
    return cfg


def load_config(path, kind: Optional[str] = None) -> ExperimentConfig:
    return config_from_dict(_read_config_file(path), kind, Path(path).parent)


def apply_overrides(cfg: ExperimentConfig, seed=None, trials=None, out=None, workers=None,
                    env=None) -> ExperimentConfig:
    """Precedence: explicit argument, then ``TREECP_SEED`` / ``TREECP_TRIALS``,
    then the file."""
    env = os.environ if env is None else env
    for name, arg, var in (("seed", seed, "TREECP_SEED"), ("trials", trials, "TREECP_TRIALS")):
        if arg is None and env.get(var):
            try:
                arg = int(env[var])
            except ValueError as exc:
                raise ConfigError(f"{var} must be an integer", field=var, rule="integer") from exc
        if arg is not None:
            setattr(cfg, name, int(arg))
    if cfg.trials < 1:
        raise ConfigError("trials must be positive", field="trials", rule="> 0")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative", field="seed", rule=">= 0")
    if out is not None:
        cfg.out = str(out)
    if workers is not None:
        cfg.workers = int(workers)
    return cfg


def parameter_set(cfg: ExperimentConfig, d: int) -> ParameterSet:
    try:
        return ParameterSet.for_degree(d, **cfg.params)
    except TypeError as exc:
        raise ConfigError(str(exc), field="params", rule="known ParameterSet field") from exc
    except TreeCPError as exc:
        raise ConfigError(str(exc), field="params", rule="parameter inequalities") from exc


def topology(cfg: ExperimentConfig) -> GraphTopology:
    top = cfg.topology
    if "edge_list" in top:
        return read_edge_list(Path(cfg.base_dir) / top["edge_list"])
    if "d" not in top or "n" not in top:
        raise ConfigError("topology needs d and n, or edge_list", field="topology", rule="d, n")
    try:
        return build_dary_tree(int(top["d"]), int(top["n"]))
    except TreeCPError as exc:
        raise ConfigError(str(exc), field="topology", rule="d >= 2, n >= 0") from exc


def validate(cfg: ExperimentConfig) -> None:
    """Re-check module preconditions that can be decided without running."""
    if cfg.kind in _GRAPH_KINDS:
        t = topology(cfg)
        if t.tree is not None:
            parameter_set(cfg, t.tree.degree)
    opts = cfg.options
    if cfg.kind == "bstar":
        ns = opts.get("ns")
        if not ns or any(not isinstance(n, int) or n < 1 for n in ns):
            raise ConfigError("options.ns must be a list of heights >= 1", field="options.ns", rule=">= 1")
        if not 0 < opts.get("q", 0.5) < 1:
            raise ConfigError("options.q must lie in (0, 1)", field="options.q", rule="(0, 1)")
    if cfg.kind == "gamma-probe" and "grid" not in opts:
        raise ConfigError("gamma-probe needs options.grid", field="options.grid", rule="required")
    if cfg.kind == "spread" and "n1" not in opts:
        raise ConfigError("spread needs options.n1", field="options.n1", rule="required")
    if cfg.kind == "coupling" and not opts.get("t_check"):
        raise ConfigError("coupling needs options.t_check", field="options.t_check", rule="required")


def start_set(t: GraphTopology, spec) -> np.ndarray:
    if spec is None or spec == "full":
        return t.full_set()
    if spec == "root":
        return t.vertex_set([0])
    if spec == "empty":
        return t.empty_set()
    if isinstance(spec, str) and spec.startswith("level:"):
        return level(t, int(spec.split(":", 1)[1]))
    if isinstance(spec, list):
        return t.vertex_set(spec)
    raise ConfigError(f"bad start {spec!r}", field="options.start",
                      rule="full | root | empty | level:k | vertex list")


# -- runners ------------------------------------------------------------------
# Each returns (columns, rows, summary).

def _run_extinction(cfg, workers):
    t = topology(cfg)
    a = start_set(t, cfg.options.get("start"))
    samples = observables.extinction_samples(t, cfg.lam, a, cfg.horizon, cfg.trials, cfg.seed, workers)
    rows = [(i, s.seed, repr(s.tau), int(s.censored)) for i, s in enumerate(samples)]
    summary = {"censored": sum(s.censored for s in samples)}
    tau = np.array([s.tau for s in samples if not s.censored])
    if tau.size:
        m, lo, hi = stats.mean_interval(tau)
        summary.update(mean=m, ci_low=lo, ci_high=hi, n_uncensored=int(tau.size))
    return ["trial", "seed", "tau", "censored"], rows, summary


def _run_expo(cfg, workers):
    cols, rows, summary = _run_extinction(cfg, workers)
    samples = [observables.ExtinctionSample(float(r[2]), bool(r[3]), r[1]) for r in rows]
    res = observables.exponentiality_test(samples, cfg.options.get("threshold", 0.03))
    summary.update(ks=res.statistic, passed=res.passed, mean=res.mean, threshold=res.threshold)
    return cols, rows, summary


def _duality_case(t: GraphTopology, lam: float, horizon: float, seed: int):
    rng = np.random.default_rng(seed)
    h = sample_harris(t, lam, horizon, seed)
    a = rng.random(t.n_vertices) < rng.random()
    b = rng.random(t.n_vertices) < rng.random()
    when = float(rng.uniform(0, horizon))
    fwd, dual = duality.duality_sides(h, a, b, when)
    return when, int(a.sum()), int(b.sum()), int(fwd), int(dual)


def _run_duality(cfg, workers):
    t = topology(cfg)
    horizon = float(cfg.options.get("time", 5.0))
    out = map_trials(per_trial(lambda s: (s,) + _duality_case(t, cfg.lam, horizon, s)),
                     cfg.seed, cfg.trials, workers)
    rows = [(i, s, repr(w), na, nb, f, d) for i, (s, w, na, nb, f, d) in enumerate(out)]
    return (["trial", "seed", "t", "size_a", "size_b", "forward", "dual"], rows,
            {"violations": sum(r[5] != r[6] for r in rows)})


def _report_rows(rep, seed, trials, name):
    seeds = trial_seeds(seed, trials)
    flags = rep.extra.pop("per_trial")
    return ["trial", "seed", name], [(i, int(s), int(f)) for i, (s, f) in enumerate(zip(seeds, flags))]


def _run_phi(cfg, workers):
    t = topology(cfg)
    p = parameter_set(cfg, t.tree.degree)
    rep = levels.estimate_phi(t, cfg.lam, start_set(t, cfg.options.get("start")), p,
                              trials=cfg.trials, seed=cfg.seed, workers=workers)
    cols, rows = _report_rows(rep, cfg.seed, cfg.trials, "F")
    return cols, rows, dict(rep.to_dict(), in_G=levels.classify_G(rep))


def _run_spread(cfg, workers):
    t = topology(cfg)
    p = parameter_set(cfg, t.tree.degree)
    rep = observables.spread_event_probability(
        t, cfg.lam, start_set(t, cfg.options.get("start", "root")), int(cfg.options["n1"]), p,
        cfg.trials, cfg.seed, workers=workers)
    cols, rows = _report_rows(rep, cfg.seed, cfg.trials, "event")
    return cols, rows, rep.to_dict()


def _run_coupling(cfg, workers):
    t = topology(cfg)
    res = observables.coupling_discrepancy(t, cfg.lam, cfg.options["t_check"], cfg.trials,
                                           cfg.seed, workers=workers)
    seeds = trial_seeds(cfg.seed, cfg.trials)
    cols = ["trial", "seed"] + [f"disc_{c:g}" for c in res["t_check"]]
    rows = [(i, int(s), *map(int, r)) for i, (s, r) in enumerate(zip(seeds, res["indicators"]))]
    return cols, rows, {"t_check": res["t_check"], "nonincreasing": res["nonincreasing"],
                        "reports": [r.to_dict() for r in res["reports"]]}


def _run_gamma(cfg, workers):
    t = topology(cfg)
    p = parameter_set(cfg, t.tree.degree)
    res = levels.domination_probe(t, cfg.lam, cfg.options["grid"], cfg.trials, cfg.seed, p,
                                  start=start_set(t, cfg.options.get("start")), workers=workers)
    seeds = trial_seeds(cfg.seed, cfg.trials)
    g = res.pop("gamma")
    cols = ["trial", "seed"] + [f"gamma_{x:g}" for x in res["grid"]]
    rows = [(i, int(s), *map(int, r)) for i, (s, r) in enumerate(zip(seeds, g))]
    return cols, rows, res


def _run_bstar(cfg, workers):
    o = cfg.options
    d = int(o.get("d", cfg.topology.get("d", 2)))
    rep = observables.estimate_bstar(d, cfg.lam, o["ns"], o.get("q", 0.5), cfg.trials, cfg.seed,
                                     cfg.horizon, workers=workers)
    rows = []
    for row in rep.extra["table"]:
        seeds = trial_seeds(row["seed"], cfg.trials)
        taus = row.pop("samples")
        rows += [(row["n"], i, int(s), repr(x)) for i, (s, x) in enumerate(zip(seeds, taus))]
    return ["n", "trial", "seed", "tau"], rows, rep.to_dict()


def _kernel(cfg, variant=None):
    o = cfg.options
    d = int(o.get("d", cfg.topology.get("d", 2)))
    try:
        return chain.build_kernel(int(o.get("n", 20)), d, o.get("cbar", 0.5), o.get("sigma", 0.5),
                                  o.get("theta", 0.9), variant or o.get("variant", "paper"))
    except TreeCPError as exc:
        raise ConfigError(str(exc), field="options", rule="valid kernel parameters") from exc


def _run_rwchain(cfg, workers):
    k = _kernel(cfg)
    o = cfg.options
    lower = int(o.get("lower", 0))
    upper = int(o.get("upper", k.h4))
    starts = o.get("starts", list(range(lower + 1, upper + 1)))
    rows = []
    for j, a in enumerate(starts):
        exact = chain.hitting_probability(k, a, lower, upper)
        hits = chain.hitting_frequency(k, a, lower, upper, cfg.trials, cfg.seed + j, workers)
        p = float(hits.mean())
        sd = math.sqrt(max(exact * (1 - exact), 1e-300) / cfg.trials)
        rows.append((a, cfg.seed + j, cfg.trials, repr(exact), repr(p), repr(sd),
                     int(abs(p - exact) <= 3 * sd)))
    summary = {"kernel": chain.kernel_to_dict(k), "tail": chain.excursion_tail_mass(k),
               "all_within_3sd": all(r[-1] for r in rows)}
    return ["start", "seed", "paths", "exact", "monte_carlo", "sd", "within_3sd"], rows, summary


def _run_supersolution(cfg, workers):
    o = cfg.options
    d = int(o.get("d", 2))
    theta = o.get("theta", 0.9)
    ns = range(int(o.get("n_min", 1)), int(o.get("n_max", 200)) + 1)
    rows = []
    first = None
    for n in ns:
        try:
            k = chain.build_kernel(n, d, o.get("cbar", 0.5), o.get("sigma", 0.5), theta, "dominating")
        except TreeCPError:
            rows.append((n, "", "", "", "rejected"))
            continue
        rep = chain.supersolution_check(k, o.get("r"))
        rows.append((n, repr(rep["max"]), repr(rep["ratio"]), repr(rep["bracket"]), int(rep["holds"])))
        if rep["holds"] and first is None:
            first = n
    return ["n", "max_value", "ratio", "bracket", "holds"], rows, {"smallest_n": first}


RUNNERS: dict[str, Callable] = {
    "extinction": _run_extinction, "expo-test": _run_expo, "duality-sweep": _run_duality,
    "phi": _run_phi, "spread": _run_spread, "coupling": _run_coupling,
    "gamma-probe": _run_gamma, "bstar": _run_bstar, "rwchain": _run_rwchain,
    "supersolution": _run_supersolution,
}


def _jsonable(x: Any):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def run(cfg: ExperimentConfig) -> RunManifest:
    """Execute ``cfg`` and write its outputs; returns the manifest."""
    start = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cols, rows, summary = RUNNERS[cfg.kind](cfg, cfg.workers)
    h = cfg.config_hash()
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        w.writerows(rows)
    summary = dict(_jsonable(summary), config_hash=h, experiment=cfg.kind, seed=cfg.seed,
                   trials=cfg.trials, config=_jsonable(cfg.identity()))
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    manifest = RunManifest(h, __version__, time.perf_counter() - start, SEED_RULE,
                           ["trials.csv", "summary.json"], cfg.kind, out_dir=str(out))
    with open(out / "manifest.json", "w") as fh:
        data = manifest.to_dict()
        data.pop("out_dir")
        json.dump(data, fh, indent=1)
    return manifest


# -- plot data ----------------------------------------------------------------

def _read_trials(manifest: RunManifest) -> tuple[list, list]:
    path = Path(manifest.out_dir) / "trials.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing output {path}")
    with open(path, newline="") as fh:
        r = list(csv.reader(fh))
    return r[0], r[1:]


def _write_columns(path: Path, header: list, rows) -> None:
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(f"{v:.10g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def survival_rows(taus) -> list:
    x, ecdf = stats.empirical_cdf(taus)
    return [(float(a), float(1 - b)) for a, b in zip(x, ecdf)]


def ks_overlay_rows(taus) -> list:
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0 or not taus.mean() > 0:
        return []
    x, ecdf = stats.empirical_cdf(taus / taus.mean())
    return [(float(a), float(b), float(-math.expm1(-a))) for a, b in zip(x, ecdf)]


def emit_plotdata(manifest: RunManifest) -> list[str]:
    """Write tab-separated plot tables next to the run outputs."""
    header, rows = _read_trials(manifest)
    out = Path(manifest.out_dir)
    written = []
    if manifest.kind in ("extinction", "expo-test"):
        i, c = header.index("tau"), header.index("censored")
        taus = [float(r[i]) for r in rows if r[c] == "0"]
        _write_columns(out / "survival.tsv", ["t", "survival"], survival_rows(taus))
        _write_columns(out / "ks_cdf.tsv", ["x", "ecdf", "exp1_cdf"], ks_overlay_rows(taus))
        written += ["survival.tsv", "ks_cdf.tsv"]
    elif manifest.kind == "bstar":
        with open(out / "summary.json") as fh:
            table = json.load(fh)["extra"]["table"]
        _write_columns(out / "plateau.tsv", ["n", "quantile", "ci_low", "ci_high"],
                       [(r["n"], r["quantile"], r["ci_low"], r["ci_high"]) for r in table])
        by_n: dict = {}
        for n, _, _, tau in rows:
            by_n.setdefault(int(n), []).append(float(tau))
        surv = [(n, a, b) for n, taus in sorted(by_n.items()) for a, b in survival_rows(taus)]
        _write_columns(out / "survival.tsv", ["n", "t", "survival"], surv)
        written += ["plateau.tsv", "survival.tsv"]
    else:
        _write_columns(out / "table.tsv", header, rows)
        written.append("table.tsv")
    return written
