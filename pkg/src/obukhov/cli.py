"""Scenario runner: ``obukhov run <config.json> [--check] [--out DIR] [--force]``.

A scenario is described by one JSON document::

    {
      "scenario": "figure2",
      "ladder": {"nu": 1.0, "alpha": 2.5, "N0": 1.5, "b": 1.15, "beta": 2.4, "c": 0.1, "K": 12},
      "integrator": {"rel_tol": 1e-10},
      "out": "runs/figure2",
      "plots": true,
      "sigmas": [0.2, 2.0],
      "validation": "illustrative",
      "snapshot_times": null,
      "options": {}
    }

Everything except ``scenario`` is optional.  Each run writes its trajectories
(CSV and JSON), tables, plots and a ``report.json`` into the output directory.

Exit status: 0 success, 2 configuration error, 3 numerical failure,
4 a ``--check`` acceptance test failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import barriers, diagnostics
from .errors import ConfigParse, ObukhovError
from .integrator import (IntegratorConfig, StepStats, Trajectory, galerkin_rhs, integrate,
                         integrate_backward_galerkin, roundtrip)
from .ladder import LadderParams, ValidationMode, build_ladder, figure2_params, validate_constraints
from .model import Form, ModelVariant, ShellState, variant_kernel
from .svg import Plot

__all__ = [
    "SCENARIOS",
    "STRICT_PARAMS",
    "ScenarioConfig",
    "RunReport",
    "run",
    "export_trajectory",
    "import_trajectory",
    "main",
]

SCENARIOS = ("figure2", "inviscid-blowup", "viscous-blowup", "lemma-verify", "roundtrip",
             "galerkin-study", "variant-compare")

# A parameter set inside the strict viscous ranges for which the barrier bounds,
# trapping and force decay can all be checked in double precision within seconds.
STRICT_PARAMS = LadderParams(nu=1.0, alpha=4.0, N0=1e3, b=1.2, beta=3.0, c=0.1, K=6, s=1.1)

_DEFAULT_PARAMS = {
    "figure2": figure2_params(K=12),
    "inviscid-blowup": figure2_params(K=12, nu=0.0),
    "viscous-blowup": figure2_params(K=12),
    "lemma-verify": STRICT_PARAMS,
    "roundtrip": figure2_params(K=10),
    "galerkin-study": figure2_params(K=12),
    "variant-compare": figure2_params(K=8),
}

_DEFAULT_VALIDATION = {"lemma-verify": ValidationMode.STRICT_VISCOUS}

_TOP_KEYS = ("scenario", "ladder", "integrator", "out", "plots", "sigmas", "validation",
             "snapshot_times", "options")


def _line_of(text, key):
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


@dataclass
class ScenarioConfig:
    scenario: str
    params: LadderParams
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    out: str = "obukhov-run"
    plots: bool = True
    sigmas: tuple = (0.2, 2.0)
    validation: ValidationMode = ValidationMode.ILLUSTRATIVE
    snapshot_times: tuple | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigParse(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}",
                              field="scenario")

    @classmethod
    def for_scenario(cls, scenario, **changes):
        if scenario not in SCENARIOS:
            raise ConfigParse(f"unknown scenario {scenario!r}", field="scenario")
        base = dict(scenario=scenario, params=_DEFAULT_PARAMS[scenario],
                    validation=_DEFAULT_VALIDATION.get(scenario, ValidationMode.ILLUSTRATIVE))
        base.update(changes)
        return cls(**base)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParse(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
        if not isinstance(data, dict):
            raise ConfigParse("the configuration must be a JSON object", line=1)
        for key in data:
            if key not in _TOP_KEYS:
                raise ConfigParse(f"unknown field {key!r}", field=key, line=_line_of(text, key))
        if "scenario" not in data:
            raise ConfigParse("missing field 'scenario'", field="scenario")
        scenario = data["scenario"]
        if scenario not in SCENARIOS:
            raise ConfigParse(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}",
                              field="scenario", line=_line_of(text, "scenario"))
        changes = {}

        def wrap(name, fn):
            try:
                return fn()
            except (TypeError, ValueError, KeyError) as exc:
                raise ConfigParse(str(exc), field=name, line=_line_of(text, name)) from None

        if "ladder" in data:
            base = _DEFAULT_PARAMS[scenario].to_dict()
            ladder = data["ladder"]
            if not isinstance(ladder, dict):
                raise ConfigParse("'ladder' must be an object", field="ladder", line=_line_of(text, "ladder"))
            for key in ladder:
                if key not in base:
                    raise ConfigParse(f"unknown ladder field {key!r}", field=f"ladder.{key}",
                                      line=_line_of(text, key))
            changes["params"] = wrap("ladder", lambda: LadderParams.from_dict({**base, **ladder}))
        if "integrator" in data:
            changes["integrator"] = wrap("integrator", lambda: IntegratorConfig.from_dict(data["integrator"]))
        if "out" in data:
            changes["out"] = wrap("out", lambda: str(data["out"]))
        if "plots" in data:
            changes["plots"] = bool(data["plots"])
        if "sigmas" in data:
            changes["sigmas"] = wrap("sigmas", lambda: tuple(float(s) for s in data["sigmas"]))
        if "validation" in data:
            changes["validation"] = wrap("validation", lambda: ValidationMode(data["validation"]))
        if data.get("snapshot_times") is not None:
            changes["snapshot_times"] = wrap("snapshot_times",
                                             lambda: tuple(float(t) for t in data["snapshot_times"]))
        if "options" in data:
            if not isinstance(data["options"], dict):
                raise ConfigParse("'options' must be an object", field="options",
                                  line=_line_of(text, "options"))
            changes["options"] = dict(data["options"])
        cfg = cls.for_scenario(scenario, **changes)
        try:
            build_ladder(cfg.params, cfg.validation)
        except ObukhovError as exc:
            raise ConfigParse(str(exc), field="ladder", line=_line_of(text, "ladder")) from None
        return cfg

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigParse(f"cannot read {path}: {exc.strerror}") from None
        return cls.from_json(text)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "ladder": self.params.to_dict(),
            "integrator": self.integrator.to_dict(),
            "out": self.out,
            "plots": self.plots,
            "sigmas": list(self.sigmas),
            "validation": self.validation.value,
            "snapshot_times": None if self.snapshot_times is None else list(self.snapshot_times),
            "options": dict(self.options),
        }


@dataclass
class RunReport:
    scenario: str
    config: dict
    results: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    manifest: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def check(self, name, passed, value=None, threshold=None, detail=None):
        entry = {"name": name, "passed": bool(passed), "value": value, "threshold": threshold}
        if detail is not None:
            entry["detail"] = detail
        self.checks.append(entry)
        return bool(passed)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def failed(self):
        return [c["name"] for c in self.checks if not c["passed"]]

    def to_dict(self):
        return {"scenario": self.scenario, "config": self.config, "passed": self.passed,
                "checks": self.checks, "results": self.results, "manifest": self.manifest,
                "timings": self.timings, "notes": self.notes}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if hasattr(obj, "value") and not isinstance(obj, (int, str)):
        return obj.value
    return obj


# -- trajectory files ----------------------------------------------------------------


def export_trajectory(traj: Trajectory, path, fmt=None, ladder=None, config=None):
    """Write a trajectory as CSV (``t, x_0..x_K``) or JSON; returns a manifest entry.

    Values are written with ``repr`` so that ``import_trajectory`` restores them
    bit for bit.  The CSV starts with a comment line naming the form and the
    ladder hash; the JSON additionally carries the ladder, the integrator
    configuration and the step data needed for dense output.
    """
    if len(traj.t) == 0:
        raise ValueError("cannot export an empty trajectory")
    fmt = fmt or os.path.splitext(str(path))[1].lstrip(".").lower()
    digest = ladder.params.digest() if ladder is not None else traj.meta.get("ladder_hash", "none")
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(f"# form={Form(traj.form).value} ladder={digest}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x_{k}" for k in range(traj.size)])
        for ti, xi in zip(traj.t, traj.x):
            w.writerow([repr(float(ti))] + [repr(float(v)) for v in xi])
        text = buf.getvalue()
    elif fmt == "json":
        doc = {
            "form": Form(traj.form).value,
            "ladder_hash": digest,
            "ladder": ladder.params.to_dict() if ladder is not None else traj.meta.get("ladder"),
            "config": config.to_dict() if config is not None else None,
            "status": traj.status,
            "stats": traj.stats.to_dict(),
            "t": [float(v) for v in traj.t],
            "x": [[float(v) for v in row] for row in traj.x],
            "node_t": [float(v) for v in traj.node_t],
            "node_x": [[float(v) for v in row] for row in traj.node_x],
            "slope_start": [[float(v) for v in row] for row in traj.slope_start],
            "slope_end": [[float(v) for v in row] for row in traj.slope_end],
            "meta": _jsonable(traj.meta),
        }
        text = json.dumps(doc, indent=1) + "\n"
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write trajectory: {exc.strerror}", str(path)) from None
    return {"path": str(path), "format": fmt, "rows": int(len(traj.t)), "ladder_hash": digest}


def import_trajectory(path) -> Trajectory:
    """Read a trajectory written by ``export_trajectory``."""
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)
        dim = len(doc["x"][0])
        stats = StepStats(**{k: v for k, v in doc.get("stats", {}).items()
                             if k in StepStats.__dataclass_fields__})
        meta = dict(doc.get("meta") or {})
        meta["ladder_hash"] = doc.get("ladder_hash")
        return Trajectory(form=doc["form"], t=np.array(doc["t"], dtype=float),
                          x=np.array(doc["x"], dtype=float).reshape(-1, dim),
                          node_t=np.array(doc["node_t"], dtype=float),
                          node_x=np.array(doc["node_x"], dtype=float).reshape(-1, dim),
                          slope_start=np.array(doc["slope_start"], dtype=float).reshape(-1, dim),
                          slope_end=np.array(doc["slope_end"], dtype=float).reshape(-1, dim),
                          stats=stats, status=doc.get("status", "complete"), meta=meta)
    with open(path, newline="") as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise ValueError(f"{path}: missing trajectory header line")
        tags = dict(part.split("=", 1) for part in head[1:].split())
        rows = list(csv.reader(fh))
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no snapshots")
    data = np.array([[float(v) for v in r] for r in body])
    t, x = data[:, 0], data[:, 1:]
    # Without step data the dense output degrades to linear interpolation.
    secant = np.diff(x, axis=0) / np.diff(t)[:, None] if len(t) > 1 else np.zeros((0, x.shape[1]))
    return Trajectory(form=tags["form"], t=t, x=x, node_t=t.copy(), node_x=x.copy(),
                      slope_start=secant, slope_end=secant.copy(),
                      meta={"ladder_hash": tags.get("ladder")})


# -- helpers --------------------------------------------------------------------------


class _Run:
    """Output bookkeeping shared by the scenario functions."""

    def __init__(self, cfg: ScenarioConfig, out, force):
        self.cfg = cfg
        self.out = out
        self.force = force
        self.report = RunReport(scenario=cfg.scenario, config=cfg.to_dict())
        os.makedirs(out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def add(self, entry):
        self.report.manifest.append(entry if isinstance(entry, dict) else {"path": str(entry)})

    def traj(self, traj, name, ladder):
        self.add(export_trajectory(traj, self.path(name + ".csv"), "csv", ladder, self.cfg.integrator))
        self.add(export_trajectory(traj, self.path(name + ".json"), "json", ladder, self.cfg.integrator))

    def csv(self, name, header, rows):
        self.add({"path": diagnostics.write_csv(self.path(name), header, rows), "format": "csv"})

    def plot(self, plot, name):
        if self.cfg.plots:
            self.add({"path": plot.save(self.path(name)), "format": "svg"})

    def timed(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        self.report.timings[name] = time.perf_counter() - t0
        return out


def figure2_snapshot_times(ladder):
    """``-T``, ``t_3, t_5, ...`` up to ``t_K``, and ``0``."""
    times = [-ladder.T] + [float(ladder.t_act[k]) for k in range(3, ladder.K + 1, 2)] + [0.0]
    return sorted(set(times))


def _backward(run, L, mode):
    return integrate_backward_galerkin(L, mode=mode, config=run.cfg.integrator, force=run.force)


def _l2(L, x):
    return x * L.N ** (-L.params.alpha)


# -- scenarios ----------------------------------------------------------------------


def _figure2(run: _Run):
    cfg, rep = run.cfg, run.report
    L = build_ladder(cfg.params, cfg.validation)
    p = L.params
    back = run.timed("backward", _backward, run, L, "viscous-masked")
    times = sorted(set(cfg.snapshot_times)) if cfg.snapshot_times else figure2_snapshot_times(L)
    if 0.0 not in times:
        times.append(0.0)
    x = back.interpolate(times)
    Y = x / L.N  # Y_k = N_k^(alpha-1) X_k = x_k / N_k
    profile = L.N ** (p.beta - 1)
    run.traj(back, "backward", L)
    header = ["k", "log10_N"] + [f"log10_Y(t={t!r})" for t in times]
    run.csv("profiles.csv", header,
            [[k, math.log10(L.N[k])] + [math.log10(v) if v > 0 else float("nan") for v in Y[:, k]]
             for k in range(L.size)])
    plot = Plot(title=f"Y_k(t) = N_k^(a-1) X_k(t), K = {L.K}", xlabel="N_k", ylabel="Y_k",
                xlog=True, ylog=True)
    for t, row in zip(times[:-1], Y[:-1]):
        plot.add(L.N, row, label=f"t = {t:.3g}")
    plot.add(L.N, Y[-1], label=f"t = 0: N_k^{p.beta - 1:g}", color="black", width=2.5)
    run.plot(plot, "figure2.svg")

    dev = float(np.max(np.abs(Y[-1] / profile - 1)))
    rep.check("terminal_profile", dev <= 1e-12, dev, 1e-12)
    earlier = Y[:-1]
    ratio = earlier / Y[-1]
    worst = np.unravel_index(np.argmax(ratio), ratio.shape)
    rep.check("earlier_below_terminal", bool(np.all(ratio <= 1.0)), float(ratio.max()), 1.0,
              {"t": times[worst[0]], "k": int(worst[1])})
    tails = []
    for row in earlier:
        below = row < Y[-1]
        first = int(np.argmax(below)) if below.any() else L.size
        tails.append(bool(below.any() and np.all(below[first:])))
    rep.check("single_crossing", all(tails), tails)

    # Boundedness of N_k^2 X_k(t) in k at fixed t < 0 needs modes beyond K:
    # rerun with extra modes and require an interior maximum followed by decay.
    extra = int(cfg.options.get("extension", 8))
    ext_L = build_ladder(p.replace(K=p.K + extra), cfg.validation)
    ext = run.timed("extension", _backward, run, ext_L, "viscous-masked")
    X_ext = _l2(ext_L, ext.interpolate(times[:-1]))
    w = ext_L.N ** 2 * X_ext
    bounded = []
    for row in w:
        k_star = int(np.argmax(row))
        bounded.append(bool(k_star < ext_L.K and np.all(np.diff(row[k_star:]) < 0)))
    rep.check("earlier_C2_bounded", all(bounded), bounded, None,
              {"argmax": np.argmax(w, axis=1).tolist(), "K_extended": ext_L.K})
    norms = []
    for K in (p.K, p.K + extra // 2, p.K + extra):
        LK = build_ladder(p.replace(K=K), cfg.validation)
        norms.append(diagnostics.besov_norm(_l2(LK, LK.A), p.s, LK)[0])
    rep.check("terminal_Cs_grows", bool(np.all(np.diff(norms) > 0)), norms)
    rep.results.update({
        "ladder": L.params.to_dict(), "T": L.T, "snapshot_times": times,
        "snapshot_times_note": "snapshot times and K are a design choice (-T, t_3, t_5, ..., 0)",
        "Y": Y.tolist(), "N": L.N.tolist(),
        "norms": diagnostics.norm_report(back, L, list(cfg.sigmas)).to_dict(),
        "steps": back.stats.to_dict(),
    })


def _lemma_verify(run: _Run):
    cfg, rep = run.cfg, run.report
    L = build_ladder(cfg.params, cfg.validation)
    constraints = validate_constraints(L, cfg.validation)
    rep.results["constraints"] = constraints.to_dict()
    btol = float(cfg.options.get("barrier_rel_tol", 1e-12))
    env = run.timed("barriers", barriers.build_barriers, L, IntegratorConfig(rel_tol=btol, abs_tol=1e-300))
    grid = int(cfg.options.get("grid", 512))
    bounds = run.timed("verify", barriers.verify_lemma_bounds, env, grid)
    rep.results["bounds"] = bounds.to_dict()
    for name, c in bounds.checks.items():
        rep.check(name, c.passed, c.worst_margin, -bounds.tolerance, {"k": c.worst_k, "t": c.worst_t})
    ts = barriers.lemma_grid(L, grid)
    K = L.K
    ref = L.A[K] * np.exp(0.5 * L.A[K - 1] * np.maximum(ts, L.t_act[K])) if K >= 1 else np.full_like(ts, L.A[0])
    zK = env.zeta(ts)[:, K]
    closed = float(np.max(np.abs(zK / ref - 1)))
    rep.check("zeta_K_closed_form", closed <= 1e-8, closed, 1e-8)
    rep.results["boundary_slack"] = barriers.boundary_slack(env, grid)

    membership = {}
    viscous = None
    for mode in ("inviscid", "viscous-masked"):
        traj = run.timed(f"backward-{mode}", _backward, run, L, mode)
        log = barriers.monitor_membership(traj, env, rhs=galerkin_rhs(L, mode))
        membership[mode] = log.summary(L.A)
        worst = float(np.min(log.normalized_worst(L.A)))
        rep.check(f"trapped_{mode}", not log.escaped, worst, -1e-8)
        run.traj(traj, f"backward-{mode}", L)
        if mode == "viscous-masked":
            viscous = traj
    rep.results["membership"] = membership
    if L.params.nu > 0:
        reg = diagnostics.force_regularity(viscous, L, list(cfg.sigmas) + [2.0] if 2.0 not in cfg.sigmas
                                           else list(cfg.sigmas))
        rep.results["force"] = reg.to_dict()
        s2 = reg.sigmas.index(2.0)
        rep.check("force_support", int(reg.support_violations.sum()) == 0, reg.support_violations.tolist(), 0)
        sup = reg.table[s2, 0]
        rep.check("force_decreasing_k>=3", reg.decreasing_from(3, s2, 0), sup[3:].tolist())
    plot = Plot(title="barriers relative to A_k", xlabel="-t", ylabel="value / A_k", xlog=True, ylog=True)
    tt = ts[ts < 0]
    Z, E = env.zeta(tt) / L.A, env.eta(tt) / L.A
    for k in range(1, L.size):
        plot.add(-tt, Z[:, k], label=f"zeta_{k}")
        plot.add(-tt, E[:, k], dashed=True)
    run.plot(plot, "barriers.svg")


def _roundtrip(run: _Run):
    cfg, rep = run.cfg, run.report
    L = build_ladder(cfg.params, cfg.validation)
    mode = cfg.options.get("mode", "viscous-masked")
    rt = run.timed("roundtrip", roundtrip, L, cfg.integrator, mode, run.force)
    err = rt.terminal_error
    rep.check("terminal_error", float(err.max()) <= 1e-3, float(err.max()), 1e-3)
    rep.results.update({
        "terminal_error": err.tolist(),
        "energy_backward": diagnostics.energy(rt.backward, L).to_dict(),
        "energy_forward": diagnostics.energy(rt.forward, L).to_dict(),
        "steps": {"backward": rt.backward.stats.to_dict(), "forward": rt.forward.stats.to_dict()},
        "min_value": float(min(rt.backward.x.min(), rt.forward.x.min())),
    })
    run.traj(rt.backward, "backward", L)
    run.traj(rt.forward, "forward", L)
    plot = Plot(title="round trip: x_k / A_k", xlabel="t", ylabel="x_k / A_k", ylog=True)
    for k in range(L.size):
        plot.add(rt.forward.t, rt.forward.x[:, k] / L.A[k], label=f"k = {k}" if k < 8 else "")
    run.plot(plot, "roundtrip.svg")


def _galerkin(run: _Run):
    cfg, rep = run.cfg, run.report
    K_list = [int(k) for k in cfg.options.get("K_list", [8, 10, 12])]
    mode = cfg.options.get("mode", "viscous-masked")
    gal = run.timed("galerkin", diagnostics.galerkin_convergence, cfg.params, K_list, cfg.integrator,
                    mode, workers=len(K_list), force=run.force)
    rep.results["galerkin"] = gal.to_dict()
    worst = gal.max_relative()
    rep.check("differences_below_1e-6_A_k", worst <= 1e-6, worst, 1e-6)
    rel = list(gal.relative.values())
    shrinking = all(bool(np.all(b < a)) for a, b in zip(rel, rel[1:]))
    rep.check("differences_decrease_with_K", shrinking, [r.tolist() for r in rel])
    rows = [[f"{a}-{b}", k, float(gal.pairs[(a, b)][k]), float(gal.relative[(a, b)][k])]
            for (a, b) in gal.pairs for k in range(gal.modes)]
    run.csv("galerkin.csv", ["pair", "k", "sup_abs_diff", "sup_rel_diff"], rows)


def _blowup(run: _Run, inviscid):
    cfg, rep = run.cfg, run.report
    params = cfg.params.replace(nu=0.0) if inviscid else cfg.params
    L = build_ladder(params, cfg.validation)
    mode = "inviscid" if inviscid else "viscous-masked"
    back = run.timed("backward", _backward, run, L, mode)
    horizon = float(cfg.options.get("horizon", 0.05)) * L.T
    cfg_fwd = cfg.integrator.with_events(L.event_times() + [-L.T, 0.0])
    fwd = run.timed("forward", integrate, galerkin_rhs(L, mode), back.final(), horizon, cfg_fwd,
                    on_collapse="return")
    fwd.meta.update({"mode": mode, "ladder": L.params.to_dict()})
    sigma = float(cfg.options.get("sigma", L.params.s))
    flag = diagnostics.blowup_indicator(fwd, L, sigma)
    rep.results["blowup"] = flag.to_dict()
    rep.results["energy"] = diagnostics.energy(fwd, L).to_dict()
    # A finite truncation keeps e_K bounded, so x_k <= N_k^alpha sqrt(2 e_K) for every k.
    e0 = diagnostics.energy(fwd, L).e[0]
    rep.results["energy_amplitude_bound"] = (L.N ** L.params.alpha * math.sqrt(2 * e0)).tolist()
    detected = flag.blown_up and abs(flag.t_detect) <= 0.05 * L.T
    rep.check("blowup_detected_near_0", detected, flag.t_detect, 0.05 * L.T)
    run.traj(fwd, "forward", L)
    norms = diagnostics.norm_report(fwd, L, [sigma])
    plot = Plot(title=f"C^{sigma:g} norm along the forward run", xlabel="t", ylabel="norm", ylog=True)
    plot.add(norms.t, norms.values[:, 0])
    run.plot(plot, "norm.svg")


def _variant_compare(run: _Run):
    cfg, rep = run.cfg, run.report
    opts = cfg.options
    L = build_ladder(cfg.params, cfg.validation)
    lam = float(opts.get("lam", 2.0))
    a_var = float(opts.get("variant_alpha", 1.0))
    t_end = float(opts.get("t_end", 10.0))
    n = L.size
    x0 = np.zeros(n)
    x0[0] = 1.0
    zero = np.zeros(n)
    vcfg = IntegratorConfig(rel_tol=cfg.integrator.rel_tol, abs_tol=cfg.integrator.abs_tol,
                            dense_output=tuple(np.linspace(0.0, t_end, 4001)))

    def forward(kind):
        kern = variant_kernel(ModelVariant(kind, lam), n, 0.0, a_var)
        return integrate(lambda t, X: kern(X, zero), ShellState(0.0, Form.L2, x0), t_end, vcfg)

    with ThreadPoolExecutor(3) as pool:
        kp_f = pool.submit(forward, "katz-pavlovic")
        geo_f = pool.submit(forward, "geometric-obukhov")
        se_f = pool.submit(_backward, run, L, "viscous-masked")
        kp, geo, se = kp_f.result(), geo_f.result(), se_f.result()
    theta = float(opts.get("theta", 0.5))
    arrivals = {}
    for name, traj in (("katz-pavlovic", kp), ("geometric-obukhov", geo), ("super-exp-obukhov", se)):
        arr = diagnostics.arrival_times(traj.t, traj.x, theta)
        arrivals[name] = {"arrival_times": arr.tolist(), "direction": traj.direction,
                          "cascade": diagnostics.is_cascade(traj.t, arr)}
    rep.results["arrivals"] = arrivals
    rep.results["arrival_note"] = (
        "arrival = first time, in the run's own direction of integration, at which |x_k| reaches "
        f"{theta:g} of its maximum over the run; a cascade is a strictly increasing arrival sequence")
    rep.check("kp_cascade", arrivals["katz-pavlovic"]["cascade"], arrivals["katz-pavlovic"]["arrival_times"])
    rep.check("super_exp_no_cascade_before_-T", not arrivals["super-exp-obukhov"]["cascade"],
              arrivals["super-exp-obukhov"]["arrival_times"])
    for name, traj in (("kp", kp), ("geometric", geo)):
        run.traj(traj, name, None)
    run.traj(se, "super-exp", L)
    plot = Plot(title=f"KP cascade, lambda = {lam:g}", xlabel="t", ylabel="|X_k|")
    for k in range(n):
        plot.add(kp.t, np.abs(kp.x[:, k]), label=f"k = {k}" if k < 8 else "")
    run.plot(plot, "kp.svg")


_RUNNERS = {
    "figure2": _figure2,
    "lemma-verify": _lemma_verify,
    "roundtrip": _roundtrip,
    "galerkin-study": _galerkin,
    "inviscid-blowup": lambda r: _blowup(r, True),
    "viscous-blowup": lambda r: _blowup(r, False),
    "variant-compare": _variant_compare,
}


def run(config: ScenarioConfig, out=None, force=False) -> RunReport:
    """Execute a scenario end to end and write its report and files."""
    r = _Run(config, out or config.out, force)
    t0 = time.perf_counter()
    _RUNNERS[config.scenario](r)
    r.report.timings["total"] = time.perf_counter() - t0
    report_path = r.path("report.json")
    r.report.manifest.append({"path": report_path, "format": "json"})
    with open(report_path, "w") as fh:
        json.dump(_jsonable(r.report.to_dict()), fh, indent=1)
        fh.write("\n")
    return r.report


def main(argv=None):
    parser = argparse.ArgumentParser(prog="obukhov", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario from a JSON configuration")
    p_run.add_argument("config")
    p_run.add_argument("--check", action="store_true", help="exit with status 4 if any check fails")
    p_run.add_argument("--out", help="output directory (overrides the configuration)")
    p_run.add_argument("--force", action="store_true", help="run even if the amplification budget is exceeded")
    args = parser.parse_args(argv)

    try:
        cfg = ScenarioConfig.load(args.config)
    except ConfigParse as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(cfg, out=args.out, force=args.force)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (ObukhovError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for c in report.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    print(f"report: {report.manifest[-1]['path']}")
    if args.check and not report.passed:
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
