"""Simulation harness: baseline, approximation quality, scenario sweeps, selection bias.

Every experiment produces an :class:`ExperimentResult`: rows of
``(experiment, measure, q, x, mean, std, n)`` plus a metadata dict. Trials
are independent; trial ``k`` at sweep point ``p`` draws its partitions from
``SeedSequence([seed, p, k])``, so results are identical for any ``n_jobs``.

Random partitions use uniform assignment redrawn until no cluster is empty
(see :class:`qadjust.oracle.RandomPartitionSpec`).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from ._version import __version__
from .adjusted import ami_q, ami_q_multi, smi_q_multi
from .entropy import nmi_q
from .exceptions import ConfigError, UndefinedMeasureError
from .fixtures import scenario, scenario_names
from .moments import _entropy_affine, _first_moments, asymptotic_expected_measure, cell_phi
from .oracle import RandomPartitionSpec, random_partition
from .partition import ContingencyTable, as_table, build_contingency, from_counts
from .qparam import ILL_CONDITIONED, SHANNON, QParam, as_qparam

__all__ = [
    "EXPERIMENT_IDS",
    "DEFAULT_Q_GRID",
    "ExperimentConfig",
    "ExperimentResult",
    "ResultRow",
    "run_experiment",
    "run_baseline_vary_r",
    "run_baseline_vary_size",
    "run_approx_quality",
    "run_scenario_q_sweep",
    "run_selection_bias",
    "recompute_samples",
]

EXPERIMENT_IDS = (
    "baseline-vary-r",
    "baseline-vary-size",
    "approx-quality",
    "scenario-q-sweep",
    "selection-bias",
)

DEFAULT_Q_GRID = tuple(round(0.2 + 0.1 * k, 10) for k in range(29))
CROSSING_TOL = 1e-3
SAMPLING_SCHEME = "uniform assignment, redrawn until no cluster is empty"

_DEFAULTS = {
    "baseline-vary-r": dict(n_objects=100, n_trials=1000, q_list=(0.5, None, 2.0, 3.0),
                            r_range=(2, 4, 6, 8, 10), c_fixed=6),
    "baseline-vary-size": dict(n_objects=100, n_trials=1000, q_list=(0.5, None, 2.0, 3.0),
                               size_fractions=(0.5, 0.6, 0.7, 0.8, 0.9), c_fixed=6),
    "approx-quality": dict(n_trials=100, q_list=(2.0, 3.0), r_range=(2, 4, 6, 8, 10),
                           c_fixed=6, n_objects_list=(100, 1000)),
    "scenario-q-sweep": dict(n_trials=1, q_list=DEFAULT_Q_GRID, scenarios=tuple(scenario_names())),
    "selection-bias": dict(n_objects=100, n_trials=5000, q_list=(None, 2.0, 3.0),
                           r_range=tuple(range(2, 11)), c_fixed=4),
}


def _q_label(q) -> str:
    return as_qparam(q).label


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment run. Unused fields are ignored by other experiments.

    For ``scenario-q-sweep`` ``q_list`` is the q grid; grid points equal to
    1 are evaluated with the Shannon measure.
    """

    experiment_id: str
    n_objects: int = 100
    n_trials: int = 1000
    q_list: tuple = (None,)
    r_range: tuple = (2, 4, 6, 8, 10)
    c_fixed: int = 6
    size_fractions: tuple = (0.5, 0.6, 0.7, 0.8, 0.9)
    n_objects_list: tuple = (100, 1000)
    scenarios: tuple = ()
    seed: int = 0
    n_jobs: int = 1
    sample_every: int = 100

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENT_IDS:
            raise ConfigError(f"unknown experiment {self.experiment_id!r}; choose from {EXPERIMENT_IDS}")
        for name in ("q_list", "r_range", "size_fractions", "n_objects_list", "scenarios"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        try:
            qps = tuple(self._grid_q(q) if self.experiment_id == "scenario-q-sweep" else as_qparam(q)
                        for q in self.q_list)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid q: {exc}") from None
        object.__setattr__(self, "q_list", qps)
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1")
        if self.n_jobs < 1 or self.sample_every < 1:
            raise ConfigError("n_jobs and sample_every must be at least 1")
        if not self.q_list:
            raise ConfigError("q_list must not be empty")
        self._check_ranges()

    @staticmethod
    def _grid_q(q):
        if q is None or isinstance(q, (str, QParam)):
            return as_qparam(q)
        if abs(float(q) - 1.0) < ILL_CONDITIONED:
            return SHANNON
        return as_qparam(float(q))

    def _check_ranges(self):
        eid = self.experiment_id
        if eid == "scenario-q-sweep":
            if not self.scenarios:
                raise ConfigError("scenarios must not be empty")
            unknown = [s for s in self.scenarios if s not in scenario_names()]
            if unknown:
                raise ConfigError(f"unknown scenarios {unknown}")
            return
        sizes = self.n_objects_list if eid == "approx-quality" else (self.n_objects,)
        if not sizes or min(sizes) < 1:
            raise ConfigError("object counts must be positive")
        if self.c_fixed < 2:
            raise ConfigError("the reference partition needs at least two clusters")
        if eid == "baseline-vary-size":
            if not self.size_fractions:
                raise ConfigError("size_fractions must not be empty")
            for f in self.size_fractions:
                try:
                    RandomPartitionSpec(self.n_objects, 2, "size-sweep", fraction=f)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        else:
            if not self.r_range:
                raise ConfigError("r_range must not be empty")
            if min(self.r_range) < 1:
                raise ConfigError("r values must be positive")
            if eid == "selection-bias" and list(self.r_range) != sorted(set(self.r_range)):
                raise ConfigError("selection-bias r_range must be strictly increasing")
        largest = max(max(self.r_range), self.c_fixed)
        if largest > min(sizes):
            raise ConfigError(f"{largest} clusters do not fit into {min(sizes)} objects")
        if eid == "approx-quality" and any(qp.is_shannon for qp in self.q_list):
            raise ConfigError("approx-quality needs Tsallis orders; the large-N limit is Tsallis-only")

    @classmethod
    def for_experiment(cls, experiment_id: str, **overrides) -> "ExperimentConfig":
        """Defaults for ``experiment_id`` updated with ``overrides``."""
        if experiment_id not in _DEFAULTS:
            raise ConfigError(f"unknown experiment {experiment_id!r}; choose from {EXPERIMENT_IDS}")
        params = dict(_DEFAULTS[experiment_id])
        params.update(overrides)
        return cls(experiment_id=experiment_id, **params)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Build from parsed JSON; missing keys take the experiment's defaults."""
        if not isinstance(data, dict) or "experiment_id" not in data:
            raise ConfigError("config must be an object with an 'experiment_id'")
        data = dict(data)
        eid = data.pop("experiment_id")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        try:
            return cls.for_experiment(eid, **data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "q_list":
                value = [qp.label for qp in value]
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        # parallelism does not change results
        out.pop("n_jobs")
        return out


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    measure: str
    q: str
    x: float
    mean: float
    std: float
    n: int


CSV_HEADER = ("experiment", "measure", "q", "x", "mean", "std", "n")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class ExperimentResult:
    rows: list
    metadata: dict
    samples: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([row.experiment, row.measure, row.q, _fmt(row.x), _fmt(row.mean),
                             _fmt(row.std), row.n])
        return buf.getvalue()

    def sidecar(self) -> dict:
        out = dict(self.metadata)
        out["spot_check_samples"] = self.samples
        return out

    def to_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2, sort_keys=True)

    def write(self, csv_path, json_path=None) -> None:
        """Write the CSV and its JSON sidecar (default: same path with ``.json``)."""
        csv_path = str(csv_path)
        if json_path is None:
            stem = csv_path[:-4] if csv_path.endswith(".csv") else csv_path
            json_path = stem + ".json"
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv())
        with open(json_path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    def select(self, measure: Optional[str] = None, q=None) -> list:
        label = None if q is None else (q if isinstance(q, str) else _q_label(q))
        return [r for r in self.rows
                if (measure is None or r.measure == measure) and (label is None or r.q == label)]

    def series(self, measure: str, q) -> dict:
        """{x: mean} for one measure and order."""
        return {r.x: r.mean for r in self.select(measure, q)}


def _metadata(cfg: ExperimentConfig, **extra) -> dict:
    meta = {
        "experiment": cfg.experiment_id,
        "config": cfg.to_dict(),
        "seed": int(cfg.seed),
        "version": __version__,
        "partition_sampling": SAMPLING_SCHEME,
    }
    meta.update(extra)
    return meta


def _summary(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def _trial_seeds(seed: int, point: int, trial: int, n: int) -> list:
    return np.random.SeedSequence([int(seed), int(point), int(trial)]).spawn(n)


def _map(func: Callable, jobs: list, n_jobs: int) -> list:
    if n_jobs <= 1 or len(jobs) < 2:
        return [func(job) for job in jobs]
    chunk = max(1, len(jobs) // (8 * n_jobs))
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(func, jobs, chunksize=chunk))


# baseline ------------------------------------------------------------------

def _baseline_measures(t: ContingencyTable, qps) -> dict:
    values = {}
    for qp, ami in zip(qps, ami_q_multi(t, qps)):
        values[("NMI_q", qp.label)] = nmi_q(t, qp)
        values[("AMI_q", qp.label)] = ami
    return values


def _baseline_trial(job):
    cfg, point, x, trial = job
    ss_u, ss_v = _trial_seeds(cfg.seed, point, trial, 2)
    n = cfg.n_objects
    if cfg.experiment_id == "baseline-vary-size":
        u_spec = RandomPartitionSpec(n, 2, "size-sweep", fraction=x)
    else:
        u_spec = RandomPartitionSpec(n, int(x))
    u = random_partition(u_spec, ss_u)
    v = random_partition(RandomPartitionSpec(n, cfg.c_fixed), ss_v)
    t = build_contingency(u, v)
    return _baseline_measures(t, cfg.q_list), t.tolist()


def _collect(cfg: ExperimentConfig, points: list, trial_fn: Callable, measures: list):
    """Run every trial at every sweep point; average per (measure, q)."""
    jobs = [(cfg, p, x, k) for p, x in enumerate(points) for k in range(cfg.n_trials)]
    outputs = _map(trial_fn, jobs, cfg.n_jobs)
    rows, samples = [], []
    for p, x in enumerate(points):
        block = outputs[p * cfg.n_trials : (p + 1) * cfg.n_trials]
        for k, (values, counts) in enumerate(block):
            if k % cfg.sample_every == 0:
                samples.append({
                    "point": p,
                    "x": x,
                    "trial": k,
                    "counts": counts,
                    "values": {f"{m}|{q}": v for (m, q), v in values.items()},
                })
        for measure in measures:
            for qp in cfg.q_list:
                mean, std = _summary([values[(measure, qp.label)] for values, _ in block])
                rows.append(ResultRow(cfg.experiment_id, measure, qp.label, float(x), mean, std,
                                      cfg.n_trials))
    return rows, samples


def _require(cfg: ExperimentConfig, experiment_id: str) -> None:
    if cfg.experiment_id != experiment_id:
        raise ConfigError(f"config is for {cfg.experiment_id!r}, not {experiment_id!r}")


def run_baseline_vary_r(cfg: ExperimentConfig) -> ExperimentResult:
    """NMI_q and AMI_q averaged over independent random U (r sets) and V (c sets)."""
    _require(cfg, "baseline-vary-r")
    rows, samples = _collect(cfg, list(cfg.r_range), _baseline_trial, ["NMI_q", "AMI_q"])
    return ExperimentResult(rows, _metadata(cfg, x="r"), samples)


def run_baseline_vary_size(cfg: ExperimentConfig) -> ExperimentResult:
    """NMI_q and AMI_q for binary U whose larger set holds a given fraction of the objects."""
    _require(cfg, "baseline-vary-size")
    rows, samples = _collect(cfg, list(cfg.size_fractions), _baseline_trial, ["NMI_q", "AMI_q"])
    return ExperimentResult(rows, _metadata(cfg, x="fraction of objects in the largest set of U"),
                            samples)


# approximation quality -----------------------------------------------------

def _approx_names(n: int) -> tuple[str, str, str]:
    return f"EH_exact@N={n}", f"EH_asymptotic@N={n}", f"EH_gap@N={n}"


def _approx_measures(t: ContingencyTable, qps) -> dict:
    values = {}
    first = _first_moments(t, [cell_phi(qp) for qp in qps])
    for qp, e1 in zip(qps, first):
        alpha, beta = _entropy_affine(qp, t.total)
        exact = alpha + beta * float(e1)
        limit = asymptotic_expected_measure(t, qp, "JointH")
        ex, asym, gap = _approx_names(t.total)
        values[(ex, qp.label)] = exact
        values[(asym, qp.label)] = limit
        values[(gap, qp.label)] = abs(exact - limit)
    return values


def _approx_trial(job):
    cfg, point, x, trial = job
    n, r = x
    ss_u, ss_v = _trial_seeds(cfg.seed, point, trial, 2)
    u = random_partition(RandomPartitionSpec(n, r), ss_u)
    v = random_partition(RandomPartitionSpec(n, cfg.c_fixed), ss_v)
    t = build_contingency(u, v)
    return _approx_measures(t, cfg.q_list), t.tolist()


def run_approx_quality(cfg: ExperimentConfig) -> ExperimentResult:
    """Exact E[H_q(U,V)] against its large-N limit, and their absolute gap.

    Measures carry the object count, e.g. ``EH_gap@N=1000``; ``x`` is r.
    """
    _require(cfg, "approx-quality")
    jobs_points = [(n, r) for n in cfg.n_objects_list for r in cfg.r_range]
    jobs = [(cfg, p, x, k) for p, x in enumerate(jobs_points) for k in range(cfg.n_trials)]
    outputs = _map(_approx_trial, jobs, cfg.n_jobs)
    rows, samples = [], []
    for p, (n, r) in enumerate(jobs_points):
        block = outputs[p * cfg.n_trials : (p + 1) * cfg.n_trials]
        for k, (values, counts) in enumerate(block):
            if k % cfg.sample_every == 0:
                samples.append({"point": p, "x": [n, r], "trial": k, "counts": counts,
                                "values": {f"{m}|{q}": v for (m, q), v in values.items()}})
        for measure in _approx_names(n):
            for qp in cfg.q_list:
                mean, std = _summary([values[(measure, qp.label)] for values, _ in block])
                rows.append(ResultRow(cfg.experiment_id, measure, qp.label, float(r), mean, std,
                                      cfg.n_trials))
    return ExperimentResult(rows, _metadata(cfg, x="r"), samples)


# scenario sweep ------------------------------------------------------------

def _q_at(x: float) -> QParam:
    if abs(x - 1.0) < ILL_CONDITIONED:
        return SHANNON
    return QParam.tsallis(x)


def _grid_value(qp: QParam) -> float:
    return qp.value


def _bisect_crossing(diff: Callable[[float], float], lo: float, hi: float, d_lo: float) -> float:
    while hi - lo > CROSSING_TOL:
        mid = 0.5 * (lo + hi)
        d_mid = diff(mid)
        if d_mid == 0.0:
            return mid
        if (d_mid > 0) == (d_lo > 0):
            lo, d_lo = mid, d_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def run_scenario_q_sweep(tables, q_grid=DEFAULT_Q_GRID, experiment: str = "scenario-q-sweep",
                         metadata: Optional[dict] = None) -> ExperimentResult:
    """AMI_q of each candidate table across the q grid, with the q values where rankings swap.

    ``tables`` is a list of ``(name, table)`` sharing the reference
    (column) marginals. Crossings are located by a sign change of
    AMI_q(T_i) - AMI_q(T_j) between grid points and refined by bisection
    to within ``CROSSING_TOL``.
    """
    named = [(str(name), as_table(t)) for name, t in tables]
    if len(named) < 1:
        raise ConfigError("need at least one table")
    ref = tuple(named[0][1].col_marginals.tolist())
    for name, t in named[1:]:
        if tuple(t.col_marginals.tolist()) != ref:
            raise ConfigError(f"{name}: reference marginals {t.col_marginals.tolist()} differ from {list(ref)}")
    grid = [ExperimentConfig._grid_q(q) for q in q_grid]
    if not grid:
        raise ConfigError("q grid must not be empty")

    values = {name: [ami_q(t, qp) for qp in grid] for name, t in named}
    rows = [ResultRow(experiment, f"AMI_q[{name}]", qp.label, _grid_value(qp), values[name][k], 0.0, 1)
            for name, _ in named for k, qp in enumerate(grid)]

    crossings = []
    xs = [_grid_value(qp) for qp in grid]
    for i in range(len(named)):
        for j in range(i + 1, len(named)):
            ni, ti = named[i]
            nj, tj = named[j]
            d = [vi - vj for vi, vj in zip(values[ni], values[nj])]

            def diff(x, ti=ti, tj=tj):
                qp = _q_at(x)
                return ami_q(ti, qp) - ami_q(tj, qp)

            for k in range(len(xs) - 1):
                if d[k] == 0.0:
                    crossings.append({"tables": [ni, nj], "q": xs[k]})
                elif d[k] * d[k + 1] < 0:
                    q_cross = _bisect_crossing(diff, xs[k], xs[k + 1], d[k])
                    crossings.append({"tables": [ni, nj], "q": q_cross, "bracket": [xs[k], xs[k + 1]],
                                      "higher_below": ni if d[k] > 0 else nj})
            if d and d[-1] == 0.0:
                crossings.append({"tables": [ni, nj], "q": xs[-1]})

    meta = dict(metadata or {})
    meta.setdefault("experiment", experiment)
    meta.setdefault("version", __version__)
    meta["q_grid"] = [qp.label for qp in grid]
    meta["tables"] = {name: t.tolist() for name, t in named}
    meta["crossings"] = crossings
    return ExperimentResult(rows, meta)


def _run_scenarios(cfg: ExperimentConfig) -> ExperimentResult:
    rows, tables, crossings = [], {}, []
    for name in cfg.scenarios:
        part = run_scenario_q_sweep(scenario(name), cfg.q_list, cfg.experiment_id)
        rows.extend(part.rows)
        tables.update(part.metadata["tables"])
        crossings.extend(part.metadata["crossings"])
    meta = _metadata(cfg, x="q", q_grid=[qp.label for qp in cfg.q_list], tables=tables,
                     crossings=crossings)
    return ExperimentResult(rows, meta)


# selection bias ------------------------------------------------------------

SELECTION_MEASURES = ("NMI_q", "AMI_q", "SMI_q")


def _argmax_first(scores: Sequence[float]) -> int:
    best, best_k = -math.inf, 0
    for k, s in enumerate(scores):
        if s > best:
            best, best_k = s, k
    return best_k


def _pool_scores(t: ContingencyTable, qps) -> dict:
    out = {}
    amis = ami_q_multi(t, qps)
    try:
        smis = smi_q_multi(t, qps)
    except UndefinedMeasureError:
        smis = [-math.inf] * len(qps)
    for qp, ami, smi in zip(qps, amis, smis):
        out[("NMI_q", qp.label)] = nmi_q(t, qp)
        out[("AMI_q", qp.label)] = ami
        out[("SMI_q", qp.label)] = smi
    return out


def _selection_trial(job):
    cfg, trial = job
    seeds = np.random.SeedSequence([int(cfg.seed), int(trial)]).spawn(len(cfg.r_range) + 1)
    n = cfg.n_objects
    v = random_partition(RandomPartitionSpec(n, cfg.c_fixed), seeds[0])
    pool = []
    for r, ss in zip(cfg.r_range, seeds[1:]):
        u = random_partition(RandomPartitionSpec(n, r), ss)
        pool.append(build_contingency(u, v))
    scores = [_pool_scores(t, cfg.q_list) for t in pool]
    winners = {}
    for measure in SELECTION_MEASURES:
        for qp in cfg.q_list:
            key = (measure, qp.label)
            winners[key] = cfg.r_range[_argmax_first([s[key] for s in scores])]
    sample = None
    if trial % cfg.sample_every == 0:
        sample = {
            "trial": trial,
            "pool": [
                {"r": r, "counts": t.tolist(), "values": {f"{m}|{q}": val for (m, q), val in s.items()}}
                for r, t, s in zip(cfg.r_range, pool, scores)
            ],
            "selected": {f"{m}|{q}": r for (m, q), r in winners.items()},
        }
    return winners, sample


def run_selection_bias(cfg: ExperimentConfig) -> ExperimentResult:
    """How often each r wins when a measure picks the best of a pool of random candidates.

    Per trial one random reference V and one random U per r in ``r_range``
    are drawn; each measure selects its highest-scoring U (ties to the
    lowest r). ``mean`` is the selection frequency of r and ``std`` the
    standard deviation of the selection indicator.
    """
    _require(cfg, "selection-bias")
    outputs = _map(_selection_trial, [(cfg, k) for k in range(cfg.n_trials)], cfg.n_jobs)
    rows = []
    for measure in SELECTION_MEASURES:
        for qp in cfg.q_list:
            picks = [w[(measure, qp.label)] for w, _ in outputs]
            for r in cfg.r_range:
                p = sum(1 for x in picks if x == r) / cfg.n_trials
                rows.append(ResultRow(cfg.experiment_id, measure, qp.label, float(r), p,
                                      math.sqrt(p * (1.0 - p)), cfg.n_trials))
    samples = [s for _, s in outputs if s is not None]
    return ExperimentResult(rows, _metadata(cfg, x="r", tie_break="lowest r"), samples)


_RUNNERS = {
    "baseline-vary-r": run_baseline_vary_r,
    "baseline-vary-size": run_baseline_vary_size,
    "approx-quality": run_approx_quality,
    "scenario-q-sweep": _run_scenarios,
    "selection-bias": run_selection_bias,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return _RUNNERS[cfg.experiment_id](cfg)


def _measure_fn(cfg: ExperimentConfig) -> Callable[[ContingencyTable], dict]:
    if cfg.experiment_id == "approx-quality":
        return lambda t: _approx_measures(t, cfg.q_list)
    if cfg.experiment_id == "selection-bias":
        return lambda t: _pool_scores(t, cfg.q_list)
    return lambda t: _baseline_measures(t, cfg.q_list)


def recompute_samples(result: ExperimentResult, rtol: float = 1e-12) -> list:
    """Re-evaluate stored sample tables through the library; returns mismatches.

    An empty list means every stored value was reproduced.
    """
    cfg = ExperimentConfig.from_dict(result.metadata["config"])
    fn = _measure_fn(cfg)
    items = []
    for s in result.samples:
        if "pool" in s:
            items.extend((s["trial"], e["counts"], e["values"]) for e in s["pool"])
        else:
            items.append((s["trial"], s["counts"], s["values"]))
    bad = []
    for trial, counts, stored in items:
        fresh = {f"{m}|{q}": v for (m, q), v in fn(from_counts(counts)).items()}
        for key, value in stored.items():
            new = fresh[key]
            if not (new == value or abs(new - value) <= rtol * max(1.0, abs(value))):
                bad.append({"trial": trial, "key": key, "stored": value, "recomputed": new})
    return bad
