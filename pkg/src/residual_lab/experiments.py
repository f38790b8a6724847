"""Configuration-driven runs: the epsilon sweep, the lemma verification suite
and the initial-condition study."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, MapError, ResidualLabError
from .estimators import (asyvar_fit, build_transition_grid, decomposition_check, delta_moment,
                         green_kubo, increment_independence, mixing_time, mixing_time_for,
                         psi2_growth, ratio_estimate, stationarity_test, tail_diagnostic,
                         theoretical_asyvar)
from .maps import MapSpec, resolve_map, validate_map
from .process import (InitialDistribution, SimulationConfig, default_threads, noiseless_ensemble,
                      simulate_ensemble)

log = logging.getLogger(__name__)

EXP_SCHEMA = "exp/v1"

DEFAULT_EPSILONS = tuple(float(e) for e in np.logspace(-1, -5, 9))
DEFAULT_INITIALS = ("point(0)", "point(0.37)", "uniform", "gaussian(0,5)")

# sizes of the verify checks; any of them can be overridden under `verify:`
VERIFY_DEFAULTS = {
    "stationarity": {"epsilon": 0.05, "n_samples": 10**6, "steps": [1, 4, 16], "bins": 64},
    "decomposition": {"epsilon": 0.01, "n_paths": 10**5, "n_steps": 1000},
    "varS": {"epsilon": 0.05, "n_steps": 1000, "n_paths": 10**6},
    "delta_moment": {"epsilon": 0.01, "n_samples": 10**7},
    "independence": {"epsilon": 0.05, "n_steps": 64, "n_paths": 20000, "lags": [1, 2]},
    "mixing": {"eps_lo": 1e-3, "eps_hi": 1e-1},
    "green_kubo": {"n_max": 12, "grid_size": 1 << 16, "tol": 1e-3},
    "reproducibility": {"epsilon": 0.01, "n_steps": 200, "n_paths": 40000, "threads": [1, 3]},
    "psi2": {"epsilon": 0.1, "steps": [1, 2, 4, 8, 16, 32, 64], "n_paths": 10**5},
}


def _strictly_decreasing(xs):
    return all(a > b for a, b in zip(xs, xs[1:]))


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a sweep / verify / initial-condition run.

    ``n_steps`` is ``"auto"`` (schedule ``max(min_steps, 20 t_mix(eps))``),
    an integer, or one integer per epsilon.  ``n_paths`` is an integer, one
    integer per epsilon, or ``"auto"``: a pilot run of ``pilot_paths`` sizes
    the ensemble so that the stderr reaches ``target_stderr`` (capped at
    ``max_paths``).
    """

    maps: tuple
    epsilons: tuple = DEFAULT_EPSILONS
    n_steps: object = "auto"
    n_paths: object = 100_000
    v: tuple | None = None
    seed: int = 0
    initial: InitialDistribution = field(default_factory=InitialDistribution)
    output_dir: str = "out"
    window_fraction: float = 0.5
    n_batches: int = 16
    min_steps: int = 2000
    target_stderr: float = 0.01
    pilot_paths: int = 16384
    max_paths: int = 1_000_000
    initials: tuple = DEFAULT_INITIALS
    verify: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.maps:
            raise ConfigError("experiment needs at least one map")
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or not _strictly_decreasing(eps):
            raise ConfigError("epsilons must be a nonempty strictly decreasing list")
        if any(not 0 <= e <= 1 for e in eps):
            raise ConfigError("epsilons must lie in [0, 1]")
        object.__setattr__(self, "epsilons", eps)
        for name in ("n_steps", "n_paths"):
            val = getattr(self, name)
            if isinstance(val, (list, tuple)):
                if len(val) != len(eps):
                    raise ConfigError(f"{name} needs one entry per epsilon")
                object.__setattr__(self, name, tuple(int(x) for x in val))
        if isinstance(self.n_steps, tuple) and any(b < a for a, b in zip(self.n_steps,
                                                                           self.n_steps[1:])):
            raise ConfigError("horizons must not decrease as epsilon decreases")
        if isinstance(self.n_paths, str) and self.n_paths != "auto":
            raise ConfigError("n_paths must be 'auto', an integer or a list")
        unknown = set(self.verify) - set(VERIFY_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown verify sections: {sorted(unknown)}")

    def map_specs(self):
        return [resolve_map(m) for m in self.maps]

    def paths_for(self, i):
        if self.n_paths == "auto":
            return None
        return self.n_paths[i] if isinstance(self.n_paths, tuple) else int(self.n_paths)

    def verify_params(self, name):
        out = dict(VERIFY_DEFAULTS[name])
        out.update(self.verify.get(name, {}) or {})
        return out

    def digest(self) -> str:
        text = json.dumps(self.source or _config_dict(self), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


def _config_dict(cfg: ExperimentConfig):
    return {
        "schema": EXP_SCHEMA, "maps": list(cfg.maps), "epsilons": list(cfg.epsilons),
        "n_steps": cfg.n_steps if isinstance(cfg.n_steps, (str, int)) else list(cfg.n_steps),
        "n_paths": cfg.n_paths if isinstance(cfg.n_paths, (str, int)) else list(cfg.n_paths),
        "v": None if cfg.v is None else list(cfg.v), "seed": cfg.seed,
        "initial": cfg.initial.to_dict(), "output_dir": cfg.output_dir,
        "window_fraction": cfg.window_fraction, "n_batches": cfg.n_batches,
        "min_steps": cfg.min_steps, "target_stderr": cfg.target_stderr,
        "pilot_paths": cfg.pilot_paths, "max_paths": cfg.max_paths, "initials": list(cfg.initials), "verify": cfg.verify,
    }


def config_from_dict(doc, base_dir=None) -> ExperimentConfig:
    if not isinstance(doc, dict) or doc.get("schema") != EXP_SCHEMA:
        raise ConfigError(f"expected a mapping with schema {EXP_SCHEMA!r}")
    known = {"schema", "maps", "epsilons", "n_steps", "n_paths", "v", "seed", "initial",
             "output_dir", "window_fraction", "n_batches", "min_steps", "target_stderr",
             "pilot_paths", "max_paths", "initials", "verify"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown exp/v1 fields: {sorted(extra)}")
    maps = doc.get("maps")
    if isinstance(maps, str):
        maps = [maps]
    if not maps:
        raise ConfigError("exp/v1 config needs `maps`")
    resolved = []
    for m in maps:
        cand = Path(base_dir) / m if base_dir is not None else None
        resolved.append(str(cand) if cand is not None and cand.exists() else m)
    try:
        cfg = ExperimentConfig(
            maps=tuple(resolved),
            epsilons=tuple(doc.get("epsilons", DEFAULT_EPSILONS)),
            n_steps=doc.get("n_steps", "auto"),
            n_paths=doc.get("n_paths", 100_000),
            v=None if doc.get("v") is None else tuple(float(c) for c in np.atleast_1d(doc["v"])),
            seed=int(doc.get("seed", 0)) % (1 << 64),
            initial=InitialDistribution.parse(doc.get("initial", "uniform")),
            output_dir=str(doc.get("output_dir", "out")),
            window_fraction=float(doc.get("window_fraction", 0.5)),
            n_batches=int(doc.get("n_batches", 16)),
            min_steps=int(doc.get("min_steps", 2000)),
            target_stderr=float(doc.get("target_stderr", 0.01)),
            pilot_paths=int(doc.get("pilot_paths", 16384)),
            max_paths=int(doc.get("max_paths", 1_000_000)),
            initials=tuple(doc.get("initials", DEFAULT_INITIALS)),
            verify=dict(doc.get("verify", {}) or {}),
            source=doc,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad exp/v1 value: {exc}") from exc
    if isinstance(cfg.n_steps, str) and cfg.n_steps != "auto":
        raise ConfigError("n_steps must be 'auto', an integer or a list")
    for m in cfg.maps:
        resolve_map(m)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc, Path(path).parent)


# --- sweep -------------------------------------------------------------------


@dataclass
class SweepRow:
    map: str
    epsilon: float
    initial: str
    asyvar_hat: float
    stderr: float
    theory_value: float
    n_steps: int
    n_paths: int
    seed: int
    t_mix: int | None = None
    t_mix_extrapolated: bool = False
    error: str = ""
    wall_time: float = 0.0


SWEEP_COLUMNS = ("map", "epsilon", "initial", "asyvar_hat", "stderr", "theory_value", "n_steps",
                 "n_paths", "seed", "t_mix", "t_mix_extrapolated", "error")


def horizon(cfg: ExperimentConfig, map: MapSpec, i: int, eps: float, cache=None):
    """``(n_steps, t_mix, extrapolated)`` for epsilon index i."""
    if isinstance(cfg.n_steps, tuple):
        return cfg.n_steps[i], None, False
    if isinstance(cfg.n_steps, int):
        return int(cfg.n_steps), None, False
    if eps == 0:
        return cfg.min_steps, None, False
    key = (map.name, eps)
    if cache is not None and key in cache:
        res = cache[key]
    else:
        res = mixing_time_for(map, eps)
        if cache is not None:
            cache[key] = res
    return max(cfg.min_steps, 20 * res.t_mix), res.t_mix, res.extrapolated


def _run_cell(map, eps, init, n_steps, n_paths, cfg, threads):
    """``(estimate, n_paths)``; ``n_paths=None`` sizes the ensemble from a pilot."""
    def run(paths):
        sim = SimulationConfig(map, eps, n_steps, paths, init, v=cfg.v, seed=cfg.seed,
                               n_batches=cfg.n_batches)
        moments = noiseless_ensemble(sim) if eps == 0 else simulate_ensemble(sim, threads=threads)
        return asyvar_fit(moments, cfg.window_fraction)

    if n_paths is not None:
        return run(n_paths), n_paths
    pilot = run(cfg.pilot_paths)
    # stderr ~ 1/sqrt(paths); 20% headroom
    need = int(math.ceil(1.2 * cfg.pilot_paths * (pilot.stderr / cfg.target_stderr) ** 2))
    need = min(cfg.max_paths, need)
    if need <= cfg.pilot_paths:
        return pilot, cfg.pilot_paths
    return run(need), need


def _theory(map, v):
    try:
        return theoretical_asyvar(map, v)
    except MapError:
        return float("nan")


def sweep_rows(cfg: ExperimentConfig, threads=None, cell_workers: int = 1):
    """All (map, epsilon) rows in deterministic order."""
    threads = default_threads() if threads is None else threads
    cell_workers = max(1, int(cell_workers))
    inner = max(1, threads // cell_workers)
    cache = {}
    jobs = []
    for map in cfg.map_specs():
        theory = _theory(map, cfg.v)
        for i, eps in enumerate(cfg.epsilons):
            jobs.append((map, i, eps, theory))

    def run(job):
        map, i, eps, theory = job
        t0 = time.perf_counter()
        n_paths = cfg.paths_for(i)
        row = SweepRow(map.name, eps, cfg.initial.label, float("nan"), float("nan"), theory,
                       0, n_paths, cfg.seed)
        try:
            n_steps, t_mix, extrap = horizon(cfg, map, i, eps, cache)
            row.n_steps, row.t_mix, row.t_mix_extrapolated = n_steps, t_mix, extrap
            est, row.n_paths = _run_cell(map, eps, cfg.initial, n_steps, n_paths, cfg, inner)
            row.asyvar_hat, row.stderr = est.slope, est.stderr
        except ResidualLabError as exc:
            row.error = f"{type(exc).__name__}: {exc}"
            log.error("sweep cell %s eps=%g failed: %s", map.name, eps, exc)
        row.wall_time = time.perf_counter() - t0
        return row

    if cell_workers == 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=cell_workers) as pool:
        return list(pool.map(run, jobs))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = asdict(r) if not isinstance(r, dict) else r
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


PLOT_SCRIPT = '''\
"""Plot asymptotic variance against epsilon from sweep.csv (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
rows = [r for r in csv.DictReader(l for l in open(path) if not l.startswith("#"))]
fig, ax = plt.subplots()
for name in dict.fromkeys(r["map"] for r in rows):
    sel = [r for r in rows if r["map"] == name and not r["error"]]
    eps = [float(r["epsilon"]) for r in sel]
    val = [float(r["asyvar_hat"]) for r in sel]
    err = [2 * float(r["stderr"]) for r in sel]
    line = ax.errorbar(eps, val, yerr=err, marker="o", label=name)
    ax.axhline(float(sel[0]["theory_value"]), ls="--", color=line[0].get_color())
ax.set_xscale("log")
ax.set_xlabel("epsilon")
ax.set_ylabel("asymptotic variance")
ax.legend()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
'''


def sweep_epsilon(cfg: ExperimentConfig, out_dir=None, threads=None, cell_workers: int = 1):
    """Run the sweep and write ``sweep.csv``, ``timings.csv`` and ``plot_sweep.py``.

    ``sweep.csv`` depends only on the config (wall times live in
    ``timings.csv``), so reruns are byte-identical.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sweep_rows(cfg, threads, cell_workers)
    header = [f"residual-lab sweep ({EXP_SCHEMA})", f"config_sha256: {cfg.digest()}",
              "n_steps schedule: max(min_steps, 20 * t_mix(eps)) unless given explicitly",
              "asyvar_hat: OLS slope of var(v.X_n) over the final window; stderr: batch means"]
    (out / "sweep.csv").write_text(rows_to_csv(rows, SWEEP_COLUMNS, header))
    timings = [{"map": r.map, "epsilon": r.epsilon, "wall_time": r.wall_time} for r in rows]
    (out / "timings.csv").write_text(rows_to_csv(timings, ("map", "epsilon", "wall_time")))
    (out / "plot_sweep.py").write_text(PLOT_SCRIPT)
    return rows


# --- initial-condition study -------------------------------------------------


INIT_COLUMNS = ("map", "epsilon", "initial", "asyvar_hat", "stderr", "theory_value", "n_steps",
                "n_paths", "seed", "error")


def initial_condition_study(cfg: ExperimentConfig, threads=None):
    """Asymptotic variance from each initial law in ``cfg.initials`` at every epsilon.

    Returns ``(rows, max_z)`` where ``max_z[(map, eps)]`` is the largest
    pairwise ``|a - b| / sqrt(se_a^2 + se_b^2)``.
    """
    threads = default_threads() if threads is None else threads
    rows, max_z = [], {}
    for map in cfg.map_specs():
        theory = _theory(map, cfg.v)
        for i, eps in enumerate(cfg.epsilons):
            n_steps, _, _ = horizon(cfg, map, i, eps)
            n_paths = cfg.paths_for(i)
            cell = []
            for spec in cfg.initials:
                init = InitialDistribution.parse(spec)
                row = SweepRow(map.name, eps, init.label, float("nan"), float("nan"), theory,
                               n_steps, n_paths, cfg.seed)
                try:
                    d = map.dimension
                    if init.kind != "uniform" and len(init.x0) == 1 and d > 1:
                        init = InitialDistribution(init.kind, init.x0 * d, init.sigma)
                    est, row.n_paths = _run_cell(map, eps, init, n_steps, n_paths, cfg, threads)
                    row.asyvar_hat, row.stderr = est.slope, est.stderr
                except ResidualLabError as exc:
                    row.error = f"{type(exc).__name__}: {exc}"
                rows.append(row)
                cell.append(row)
            z = 0.0
            ok = [r for r in cell if not r.error]
            for a in range(len(ok)):
                for b in range(a + 1, len(ok)):
                    se = math.hypot(ok[a].stderr, ok[b].stderr)
                    diff = abs(ok[a].asyvar_hat - ok[b].asyvar_hat)
                    z = max(z, diff / se if se > 0 else (0.0 if diff == 0 else math.inf))
            max_z[(map.name, eps)] = z
    return rows, max_z


def initial_study_csv(cfg, rows) -> str:
    header = [f"residual-lab init-study ({EXP_SCHEMA})", f"config_sha256: {cfg.digest()}"]
    return rows_to_csv(rows, INIT_COLUMNS, header)


# --- verification suite ------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    status: str  # pass | fail | n/a | skipped | error
    measured: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def ok(self):
        return self.status in ("pass", "n/a")


@dataclass
class VerifyReport:
    map: str
    checks: list

    @property
    def passed(self):
        return all(c.ok for c in self.checks)

    def to_text(self) -> str:
        lines = [f"map: {self.map}", f"passed: {str(self.passed).lower()}", "checks:"]
        for c in self.checks:
            lines.append(f"  - name: {c.name}")
            lines.append(f"    status: {c.status}")
            if c.measured:
                lines.append("    measured:")
                for k, v in c.measured.items():
                    lines.append(f"      {k}: {_yaml_scalar(v)}")
            if c.detail:
                lines.append(f"    detail: {json.dumps(c.detail)}")
        return "\n".join(lines)


def _yaml_scalar(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_yaml_scalar(x) for x in v) + "]"
    return str(v)


CHECK_ORDER = (
    "map_validation", "stationarity", "decomposition_identity", "r_bound", "lemma_varS",
    "delta_moment_scaling", "increment_independence", "mixing_time_growth", "green_kubo_plateau",
    "reproducibility_threads", "psi2_closed_form", "psi2_growth",
)


def _check_validation(map, cfg, ctx):
    rep = validate_map(map)
    ctx["validation"] = rep
    return CheckResult("map_validation", "pass" if rep.passed else "fail",
                       {"gap_volume": str(rep.gap_volume), "overlap_volume": str(rep.overlap_volume),
                        "bernoulli": map.bernoulli is not None},
                       "; ".join(rep.problems))


def _check_stationarity(map, cfg, ctx):
    p = cfg.verify_params("stationarity")
    res = stationarity_test(map, p["epsilon"], p["steps"], p["n_samples"], p["bins"], cfg.seed)
    return CheckResult("stationarity", "pass" if res.min_p > 1e-3 else "fail",
                       {"steps": list(res.steps), "p_values": list(res.p_values),
                        "n_samples": res.n_samples, "bins": res.bins})


def _decomposition(map, cfg, ctx):
    if "decomposition" not in ctx:
        p = cfg.verify_params("decomposition")
        sim = SimulationConfig(map, p["epsilon"], p["n_steps"], p["n_paths"], seed=cfg.seed)
        ctx["decomposition"] = decomposition_check(sim)
    return ctx["decomposition"]


def _check_identity(map, cfg, ctx):
    dc = _decomposition(map, cfg, ctx)
    return CheckResult("decomposition_identity", "pass" if dc.identity_violations == 0 else "fail",
                       {"paths": dc.n_paths, "steps": dc.n_steps,
                        "violations": dc.identity_violations,
                        "float_route_inexact": dc.float_inexact,
                        "float_route_max_error": dc.float_max_error})


def _check_rbound(map, cfg, ctx):
    dc = _decomposition(map, cfg, ctx)
    return CheckResult("r_bound", "pass" if dc.bound_violations == 0 else "fail",
                       {"violations": dc.bound_violations, "max_abs_drift": dc.max_abs_R_drift})


def _check_varS(map, cfg, ctx):
    if map.bernoulli is None:
        return CheckResult("lemma_varS", "n/a", detail="claimed only for Bernoulli maps")
    p = cfg.verify_params("varS")
    sim = SimulationConfig(map, p["epsilon"], p["n_steps"], p["n_paths"], v=cfg.v, seed=cfg.seed,
                           record_decomposition=True, n_batches=cfg.n_batches)
    est = ratio_estimate(simulate_ensemble(sim), quantity="S")
    theory = theoretical_asyvar(map, cfg.v)
    z = est.zscore(theory)
    return CheckResult("lemma_varS", "pass" if abs(z) <= 3 else "fail",
                       {"var_S_over_n": est.slope, "stderr": est.stderr, "theory": theory,
                        "z": z})


def _check_delta(map, cfg, ctx):
    p = cfg.verify_params("delta_moment")
    eps = p["epsilon"]
    a = delta_moment(map, eps, 1.0, p["n_samples"], cfg.seed)
    b = delta_moment(map, eps / 10, 1.0, p["n_samples"], cfg.seed)
    ratio = a.value / b.value if b.value > 0 else math.inf
    return CheckResult("delta_moment_scaling", "pass" if 6 <= ratio <= 14 else "fail",
                       {"epsilon": eps, "moment_eps": a.value, "moment_eps_over_10": b.value,
                        "ratio": ratio})


def _check_independence(map, cfg, ctx):
    if map.bernoulli is None:
        return CheckResult("increment_independence", "n/a",
                           detail="i.i.d. increments are claimed only for Bernoulli maps")
    p = cfg.verify_params("independence")
    res = increment_independence(map, p["epsilon"], p["n_steps"], p["n_paths"], p["lags"],
                                 cfg.seed)
    pmin = min(r.p_value for r in res)
    return CheckResult("increment_independence", "pass" if pmin > 1e-3 else "fail",
                       {"lags": [r.lag for r in res], "p_values": [r.p_value for r in res]})


def _check_mixing(map, cfg, ctx):
    p = cfg.verify_params("mixing")
    lo, hi = p["eps_lo"], p["eps_hi"]
    t_hi = mixing_time(build_transition_grid(map, hi)).t_mix
    t_lo = mixing_time(build_transition_grid(map, lo)).t_mix
    bound = 4 * (math.log(lo) / math.log(hi)) ** 3
    ratio = t_lo / t_hi
    return CheckResult("mixing_time_growth", "pass" if ratio <= bound else "fail",
                       {"eps_lo": lo, "eps_hi": hi, "t_mix_lo": t_lo, "t_mix_hi": t_hi,
                        "ratio": ratio, "bound": bound})


def _check_gk(map, cfg, ctx):
    p = cfg.verify_params("green_kubo")
    res = green_kubo(map, cfg.v, p["n_max"], p["grid_size"], plateau_tol=p["tol"])
    ref = res.partial_sums[8] if len(res.partial_sums) > 8 else res.partial_sums[-1]
    dev = float(np.abs(res.partial_sums[8:] - ref).max()) if len(res.partial_sums) > 8 else 0.0
    return CheckResult("green_kubo_plateau", "pass" if dev <= p["tol"] else "fail",
                       {"GK_8": float(ref), "max_dev_after_8": dev, "GK_last": float(res.partial_sums[-1]),
                        "lag1_cov": float(res.cov[1]) if len(res.cov) > 1 else 0.0})


def _check_repro(map, cfg, ctx):
    p = cfg.verify_params("reproducibility")
    sim = SimulationConfig(map, p["epsilon"], p["n_steps"], p["n_paths"], seed=cfg.seed,
                           record_decomposition=True, block_size=1024)
    outs = [simulate_ensemble(sim, threads=t).to_csv() for t in p["threads"]]
    same = all(o == outs[0] for o in outs)
    return CheckResult("reproducibility_threads", "pass" if same else "fail",
                       {"threads": list(p["threads"]), "identical": same})


def _check_psi2_closed_form(map, cfg, ctx):
    rng = np.random.default_rng(cfg.seed)
    g = tail_diagnostic(rng.standard_normal(10**6), n_boot=0)
    target_g = math.sqrt(8 / 3)
    c = tail_diagnostic(np.full(10**5, 2.0), n_boot=0)
    target_c = 2 / math.sqrt(math.log(2))
    z = tail_diagnostic(np.zeros(10**5), n_boot=0)
    ok = abs(g.c / target_g - 1) <= 0.1 and abs(c.c / target_c - 1) <= 1e-9 and z.c == 0
    return CheckResult("psi2_closed_form", "pass" if ok else "fail",
                       {"gaussian_c": g.c, "gaussian_target": target_g, "constant_c": c.c,
                        "constant_target": target_c, "zero_c": z.c})


def _check_psi2_growth(map, cfg, ctx):
    # at most linear growth: c(n) <= 2 c(1) (1 + n); the implied constant of
    # the affine bound c(n) / (c(0) + n) is reported alongside
    p = cfg.verify_params("psi2")
    steps = sorted(set([0, 1] + list(p["steps"])))
    fits = psi2_growth(map, p["epsilon"], steps, p["n_paths"], v=cfg.v, seed=cfg.seed,
                       n_boot=0)
    c = {n: fits[n].c for n in steps}
    ratio = max(c[n] / (2 * c[1] * (1 + n)) for n in steps if n >= 1)
    return CheckResult("psi2_growth", "pass" if ratio <= 1 else "fail",
                       {"steps": steps, "c": [c[n] for n in steps],
                        "implied_constant": [c[n] / (c[0] + n) for n in steps if n >= 1],
                        "max_ratio_to_bound": ratio})


CHECKS = {
    "map_validation": _check_validation, "stationarity": _check_stationarity,
    "decomposition_identity": _check_identity, "r_bound": _check_rbound,
    "lemma_varS": _check_varS, "delta_moment_scaling": _check_delta,
    "increment_independence": _check_independence, "mixing_time_growth": _check_mixing,
    "green_kubo_plateau": _check_gk, "reproducibility_threads": _check_repro,
    "psi2_closed_form": _check_psi2_closed_form, "psi2_growth": _check_psi2_growth,
}


def verify_map(map: MapSpec, cfg: ExperimentConfig, only=None) -> VerifyReport:
    """Run the checks in ``CHECK_ORDER``; a failed validation or a crash skips the rest."""
    checks = []
    ctx = {}
    halt = None
    for name in CHECK_ORDER:
        if only is not None and name not in only and name != "map_validation":
            continue
        if halt is not None:
            checks.append(CheckResult(name, "skipped", detail=halt))
            continue
        t0 = time.perf_counter()
        try:
            res = CHECKS[name](map, cfg, ctx)
        except ResidualLabError as exc:
            res = CheckResult(name, "error", detail=f"{type(exc).__name__}: {exc}")
        except Exception as exc:  # a bug or resource failure: abort the suite
            res = CheckResult(name, "error", detail="".join(
                traceback.format_exception_only(type(exc), exc)).strip())
        res.measured["seconds"] = round(time.perf_counter() - t0, 2)
        checks.append(res)
        if name == "map_validation" and res.status != "pass":
            halt = "map validation failed"
        elif res.status == "error":
            halt = f"{name} aborted"
        log.info("verify %s: %s", name, res.status)
    return VerifyReport(map.name, checks)


def verify_suite(cfg: ExperimentConfig, only=None):
    """One ``VerifyReport`` per map in the config."""
    reports = []
    for ref in cfg.maps:
        try:
            m = resolve_map(ref)
        except ResidualLabError as exc:
            reports.append(VerifyReport(str(ref), [CheckResult("map_validation", "fail",
                                                               detail=str(exc))]
                                        + [CheckResult(n, "skipped", detail="map could not be loaded")
                                           for n in CHECK_ORDER[1:]]))
            continue
        reports.append(verify_map(m, cfg, only))
    return reports
