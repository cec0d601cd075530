"""Batch experiments: sweeps over scenario parameters, channel-averaged
aggregation across RIS modes and transmission schemes, solution audits, and
text-table emission.

Experiment specs are JSON::

    {
      "config": { ... scenario config schema ... },
      "sweep": {"axis": "mu", "values": [4.0, 12.0, 40.0]},
      "modes": [
        {"ris_mode": "active", "scheme": "w/o-DSS"},
        {"ris_mode": "passive", "scheme": "w/o-DSS", "augment_budget": true},
        {"ris_mode": "none", "scheme": "w/o-DSS"}
      ],
      "realizations": 20,
      "seed_base": 1,
      "output_dir": "results"
    }

Sweep axes: mu, epsilon, P_a_max (watts), N, M, ris_x_position (meters), Q.
Every (sweep value, mode) cell reuses the same seeds so comparisons are
paired.  Two CSVs are written: ``runs.csv`` with one row per (value, mode,
realization) and ``summary.csv`` with per-cell means and standard errors.
Apart from one timestamp header line, outputs are deterministic for a fixed
spec.  Individual infeasible realizations are recorded, never fatal.

``runs.csv`` schema:
    sweep_value, mode, realization, seed, status, covert_rate, crb,
    covert_margin, ao_iterations, converged
``summary.csv`` schema:
    sweep_value, mode, n_total, n_feasible, mean_covert_rate, stderr_covert_rate
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import comm, covertness, optimizer
from .scenario import ChannelSet, SystemConfig, sample_channels, sample_targets
from .sensing import CrbUndefinedError, beampattern, build_fisher_components, \
    crb_trace, fisher_information

SWEEP_AXES = ("mu", "epsilon", "P_a_max", "N", "M", "ris_x_position", "Q")


@dataclass(frozen=True)
class Mode:
    """One comparison arm: RIS mode, transmission scheme, budget variant."""

    ris_mode: str = "active"
    scheme: str = "w/o-DSS"
    augment_budget: bool = False

    @property
    def label(self) -> str:
        tag = {"active": "A", "passive": "P", "none": "w/o-RIS"}[self.ris_mode]
        budget = "+Pr" if self.augment_budget else ""
        return f"{tag}{budget}/{self.scheme}"


@dataclass
class ExperimentSpec:
    base_config: SystemConfig
    sweep_axis: str
    sweep_values: list
    modes: list
    realizations: int = 20
    seed_base: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.sweep_values:
            raise ValueError("sweep needs at least one value")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if not self.modes:
            raise ValueError("need at least one mode")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        cfg = SystemConfig.from_dict(raw.get("config", {}))
        sweep = raw.get("sweep", {"axis": "mu", "values": [cfg.mu]})
        modes = [Mode(ris_mode=m.get("ris_mode", "active"),
                      scheme=m.get("scheme", "w/o-DSS"),
                      augment_budget=bool(m.get("augment_budget", False)))
                 for m in raw.get("modes", [{}])]
        return cls(base_config=cfg, sweep_axis=sweep["axis"],
                   sweep_values=list(sweep["values"]), modes=modes,
                   realizations=int(raw.get("realizations", 20)),
                   seed_base=int(raw.get("seed_base", 1)),
                   output_dir=raw.get("output_dir", "results"))

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def apply_sweep_value(config: SystemConfig, axis: str, value) -> SystemConfig:
    if axis == "mu":
        return config.replace(mu=float(value))
    if axis == "epsilon":
        return config.replace(epsilon=float(value))
    if axis == "P_a_max":
        return config.replace(p_a_max=float(value))
    if axis == "N":
        return config.replace(N=int(value))
    if axis == "M":
        return config.replace(M=int(value))
    if axis == "ris_x_position":
        return config.replace(pos_ris=(float(value), config.pos_ris[1]))
    if axis == "Q":
        q = int(value)
        if q > len(config.targets):
            raise ValueError(f"sweep asks for {q} targets but the config "
                             f"defines {len(config.targets)}")
        return config.replace(targets=config.targets[:q])
    raise ValueError(f"unknown sweep axis {axis!r}")


def apply_mode(config: SystemConfig, mode: Mode) -> SystemConfig:
    kw = {"ris_mode": mode.ris_mode, "scheme": mode.scheme}
    if mode.augment_budget or mode.ris_mode == "none":
        # the RIS supply is folded into the transmit budget for fairness
        kw["p_a_max"] = config.p_a_max + config.p_r_max
    return config.replace(**kw)


@dataclass
class RunRecord:
    sweep_value: float
    mode: str
    realization: int
    seed: int
    status: str
    covert_rate: float = math.nan
    crb: float = math.nan
    covert_margin: float = math.nan
    ao_iterations: int = 0
    converged: bool = False
    wall_time: float = 0.0


def _run_point(args):
    cfg, mode_label, value, realization, seed = args
    t0 = time.perf_counter()
    try:
        channels = sample_channels(cfg, seed)
        sol = optimizer.alternating_optimize(cfg, channels)
    except (optimizer.InitializationError,
            optimizer.SubproblemInfeasibleError) as exc:
        return RunRecord(sweep_value=value, mode=mode_label,
                         realization=realization, seed=seed,
                         status=f"infeasible: {type(exc).__name__}",
                         wall_time=time.perf_counter() - t0)
    return RunRecord(
        sweep_value=value, mode=mode_label, realization=realization, seed=seed,
        status="ok", covert_rate=sol.rates[1], crb=sol.crb,
        covert_margin=sol.covert_margin, ao_iterations=sol.ao_iterations,
        converged=sol.converged, wall_time=time.perf_counter() - t0)


def run_experiment(spec: ExperimentSpec, workers: int = 1,
                   progress=None) -> dict:
    """Execute the sweep and write ``runs.csv`` plus ``summary.csv``.

    Seeds are ``seed_base + realization`` for every (value, mode) cell, so all
    comparisons are paired.  Returns ``{"records": [...], "summary": [...],
    "runs_csv": path, "summary_csv": path}``.
    """
    jobs = []
    for value in spec.sweep_values:
        for mode in spec.modes:
            cfg = apply_mode(apply_sweep_value(spec.base_config,
                                               spec.sweep_axis, value), mode)
            for r in range(spec.realizations):
                jobs.append((cfg, mode.label, float(value), r,
                             spec.seed_base + r))

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_point, jobs))
    else:
        records = []
        for i, job in enumerate(jobs):
            records.append(_run_point(job))
            if progress is not None:
                progress(i + 1, len(jobs))

    records.sort(key=lambda r: (r.sweep_value, r.mode, r.realization))
    summary = summarize(records)

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs_csv = out / "runs.csv"
    summary_csv = out / "summary.csv"
    stamp = datetime.now(timezone.utc).isoformat()
    with open(runs_csv, "w", encoding="utf-8") as fh:
        fh.write(f"# generated {stamp}\n")
        fh.write("sweep_value,mode,realization,seed,status,covert_rate,crb,"
                 "covert_margin,ao_iterations,converged\n")
        for r in records:
            fh.write(f"{r.sweep_value:.10g},{r.mode},{r.realization},{r.seed},"
                     f"{r.status.split(':')[0]},{r.covert_rate:.10g},"
                     f"{r.crb:.10g},{r.covert_margin:.6g},{r.ao_iterations},"
                     f"{int(r.converged)}\n")
    with open(summary_csv, "w", encoding="utf-8") as fh:
        fh.write(f"# generated {stamp}\n")
        fh.write("sweep_value,mode,n_total,n_feasible,mean_covert_rate,"
                 "stderr_covert_rate\n")
        for row in summary:
            fh.write(f"{row['sweep_value']:.10g},{row['mode']},{row['n_total']},"
                     f"{row['n_feasible']},{row['mean_covert_rate']:.10g},"
                     f"{row['stderr_covert_rate']:.10g}\n")
    return {"records": records, "summary": summary,
            "runs_csv": str(runs_csv), "summary_csv": str(summary_csv)}


def summarize(records) -> list:
    cells = {}
    for r in records:
        cells.setdefault((r.sweep_value, r.mode), []).append(r)
    out = []
    for (value, mode), rs in sorted(cells.items()):
        rates = np.array([r.covert_rate for r in rs if r.status == "ok"])
        n_ok = len(rates)
        mean = float(rates.mean()) if n_ok else math.nan
        stderr = float(rates.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else math.nan
        out.append({"sweep_value": value, "mode": mode, "n_total": len(rs),
                    "n_feasible": n_ok, "mean_covert_rate": mean,
                    "stderr_covert_rate": stderr})
    return out


def paired_mean_rates(records, mode_a: str, mode_b: str, sweep_value=None):
    """Mean covert rates of two modes over their common feasible seeds."""
    def pick(mode):
        return {r.seed: r.covert_rate for r in records
                if r.mode == mode and r.status == "ok"
                and (sweep_value is None or r.sweep_value == sweep_value)}
    a, b = pick(mode_a), pick(mode_b)
    common = sorted(set(a) & set(b))
    if not common:
        raise ValueError(f"no common feasible seeds for {mode_a} vs {mode_b}")
    return (float(np.mean([a[s] for s in common])),
            float(np.mean([b[s] for s in common])), len(common))


# ---------------------------------------------------------------------------
# solution files and audits
# ---------------------------------------------------------------------------

def _encode_complex(x):
    a = np.asarray(x, dtype=complex)
    return {"shape": list(a.shape),
            "re": a.real.ravel().tolist(), "im": a.imag.ravel().tolist()}


def _decode_complex(doc):
    a = np.array(doc["re"], dtype=float) + 1j * np.array(doc["im"], dtype=float)
    return a.reshape(doc["shape"])


def save_solution(path, solution: comm.BeamformerSolution,
                  channels: ChannelSet, config: SystemConfig) -> None:
    """Self-describing text serialization (complex entries as re/im pairs)."""
    doc = {
        "format": "covertisac-solution-v1",
        "config": config.to_dict(),
        "channels": {name: _encode_complex(getattr(channels, name))
                     for name in ("h_ag", "h_ab", "h_aw", "h_rg", "h_rb",
                                  "h_rw", "G", "h_targets")},
        "seed": channels.seed,
        "solution": {
            "w_g": _encode_complex(solution.w_g),
            "w_b": _encode_complex(solution.w_b),
            "phi": _encode_complex(solution.phi),
            "W_s": None if solution.W_s is None else _encode_complex(solution.W_s),
            "rates": list(solution.rates) if solution.rates else None,
            "crb": solution.crb,
            "covert_margin": solution.covert_margin,
            "converged": solution.converged,
            "ao_iterations": solution.ao_iterations,
            "trace": solution.trace,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)


def load_solution(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "covertisac-solution-v1":
        raise ValueError("not a solution file")
    config = SystemConfig.from_dict(doc["config"])
    ch = {name: _decode_complex(doc["channels"][name])
          for name in ("h_ag", "h_ab", "h_aw", "h_rg", "h_rb", "h_rw",
                       "G", "h_targets")}
    channels = ChannelSet(seed=int(doc.get("seed", 0)), **ch)
    s = doc["solution"]
    solution = comm.BeamformerSolution(
        w_g=_decode_complex(s["w_g"]).ravel(),
        w_b=_decode_complex(s["w_b"]).ravel(),
        phi=_decode_complex(s["phi"]).ravel(),
        W_s=None if s.get("W_s") is None else _decode_complex(s["W_s"]),
        rates=tuple(s["rates"]) if s.get("rates") else None,
        crb=s.get("crb"), covert_margin=s.get("covert_margin"),
        trace=s.get("trace") or [], converged=bool(s.get("converged", True)),
        ao_iterations=int(s.get("ao_iterations", 0)))
    return solution, channels, config


@dataclass
class ConstraintCheck:
    name: str
    satisfied: bool
    residual: float
    detail: str = ""


@dataclass
class AuditReport:
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.satisfied for c in self.checks)

    @property
    def failed(self) -> list:
        return [c for c in self.checks if not c.satisfied]

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            flag = "PASS" if c.satisfied else "FAIL"
            lines.append(f"[{flag}] {c.name:<22} residual {c.residual:+.3e}"
                         + (f"  ({c.detail})" if c.detail else ""))
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def verify_solution(solution: comm.BeamformerSolution, channels: ChannelSet,
                    config: SystemConfig, tol: float = 1e-6,
                    targets=None) -> AuditReport:
    """Re-evaluate every design constraint from the raw vectors.

    Residuals are relative violations (<= 0 means satisfied with slack); a
    check passes when its residual does not exceed ``tol``.
    """
    rep = AuditReport()
    w_g, w_b, phi, W_s = solution.w_g, solution.w_b, solution.phi, solution.W_s

    total = solution.bs_power()
    rep.checks.append(ConstraintCheck(
        "bs_power", total <= config.p_a_max * (1 + tol),
        (total - config.p_a_max) / config.p_a_max))

    pg, pb = float(np.linalg.norm(w_g) ** 2), float(np.linalg.norm(w_b) ** 2)
    rep.checks.append(ConstraintCheck(
        "power_order", pb <= pg * (1 + tol),
        (pb - pg) / max(pg, 1e-300)))

    ok_sic = comm.sic_feasible(phi, channels)
    g_b = comm.composite_channel(phi, channels, "b")
    g_g = comm.composite_channel(phi, channels, "g")
    nb, ng = float(np.linalg.norm(g_b) ** 2), float(np.linalg.norm(g_g) ** 2)
    rep.checks.append(ConstraintCheck(
        "sic_channel_order", ok_sic or ng <= nb * (1 + tol),
        (ng - nb) / max(nb, 1e-300)))

    rates = comm.achievable_rates((w_g, w_b, phi), channels, config)
    rep.checks.append(ConstraintCheck(
        "grace_qos", rates[2] >= config.r_g_min * (1 - tol),
        (config.r_g_min - rates[2]) / config.r_g_min,
        f"R_g={rates[2]:.4f}"))
    rep.checks.append(ConstraintCheck(
        "bob_decodes_public", rates[0] >= config.r_g_min * (1 - tol),
        (config.r_g_min - rates[0]) / config.r_g_min,
        f"R_b,public={rates[0]:.4f}"))
    if rates[0] < rates[2]:
        rep.notes.append(
            "conservative SIC rate ordering R_b,public >= R_g does not hold "
            f"({rates[0]:.4f} < {rates[2]:.4f}); the public stream is still "
            "decodable at its QoS rate")

    if targets is None:
        targets = sample_targets(config, channels.seed)
    comps = build_fisher_components(targets, config)
    r_x = solution.transmit_covariance()
    try:
        crb = crb_trace(fisher_information(r_x, comps))
        rep.checks.append(ConstraintCheck(
            "crb_threshold", crb <= config.mu * (1 + tol),
            (crb - config.mu) / config.mu, f"crb={crb:.4g}"))
    except CrbUndefinedError:
        rep.checks.append(ConstraintCheck(
            "crb_threshold", False, math.inf, "Fisher matrix singular"))

    amp = np.abs(phi)
    if config.ris_mode == "passive":
        resid = float(np.abs(amp - 1.0).max())
        rep.checks.append(ConstraintCheck("reflection_amplitude",
                                          resid <= tol, resid, "|phi|=1"))
    else:
        resid = float((amp.max() - config.eta) / config.eta) if len(amp) else 0.0
        rep.checks.append(ConstraintCheck("reflection_amplitude",
                                          amp.max() <= config.eta * (1 + tol)
                                          if len(amp) else True, resid))

    if config.ris_mode == "active":
        load = comm.ris_output_power(solution, channels, config)
        rep.checks.append(ConstraintCheck(
            "ris_power", load <= config.p_r_max * (1 + tol),
            (load - config.p_r_max) / config.p_r_max))

    kappa = covertness.kappa_from_epsilon(config.epsilon)
    margin = covertness.covertness_margin(w_g, w_b, phi, channels, kappa,
                                          config, W_s=W_s)
    s0, s1 = covertness.willie_variances(w_g, w_b, phi, channels, config, W_s=W_s)
    rep.checks.append(ConstraintCheck(
        "covertness", margin <= tol * kappa * s0, margin / (kappa * s0),
        f"min DEP={covertness.min_dep(s0, s1):.4f}"))

    for name, vec in (("w_g", solution.w_g), ("w_b", solution.w_b)):
        rep.notes.append(f"{name} power {np.linalg.norm(vec) ** 2:.4g} W")
    return rep


def save_trace_csv(solution: comm.BeamformerSolution, path) -> None:
    """Per-iteration optimization log as CSV."""
    cols = ("iteration", "covert_rate", "crb", "covert_margin",
            "transmit_rank_residual", "reflect_rank_residual",
            "dinkelbach_iterations", "wall_time")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in solution.trace:
            fh.write(",".join(f"{row[c]:.10g}" if isinstance(row[c], float)
                              else str(row[c]) for c in cols) + "\n")


# ---------------------------------------------------------------------------
# beampattern emission
# ---------------------------------------------------------------------------

def emit_beampattern(solution: comm.BeamformerSolution, path,
                     resolution_deg: float = 0.5) -> np.ndarray:
    """Write the peak-normalized transmit beampattern as a two-column
    (degrees, dB) text table over [-90, 90] and return the grid in degrees."""
    grid_deg = np.arange(-90.0, 90.0 + resolution_deg / 2, resolution_deg)
    power_db = beampattern(solution.transmit_covariance(),
                           np.deg2rad(grid_deg), normalize=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# angle_deg gain_db (peak-normalized transmit beampattern)\n")
        for ang, val in zip(grid_deg, power_db):
            fh.write(f"{ang:+8.2f} {val:+10.4f}\n")
    return grid_deg


def beampattern_peaks(grid_deg, power_db, min_separation_deg: float = 2.0):
    """Interior local maxima of a beampattern as (degrees, dB) pairs.

    Plateaus count once; maxima closer than ``min_separation_deg`` merge into
    the stronger one.
    """
    power_db = np.asarray(power_db)
    n = len(power_db)
    raw = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and power_db[j + 1] == power_db[i]:
            j += 1
        left_ok = i == 0 or power_db[i - 1] < power_db[i]
        right_ok = j == n - 1 or power_db[j + 1] < power_db[j]
        if left_ok and right_ok and 0 < i and j < n - 1:
            mid = (i + j) // 2
            raw.append((float(grid_deg[mid]), float(power_db[mid])))
        i = j + 1
    merged = []
    for ang, val in sorted(raw, key=lambda p: -p[1]):
        if all(abs(ang - a) >= min_separation_deg for a, _ in merged):
            merged.append((ang, val))
    return sorted(merged)
