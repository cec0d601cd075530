"""Joint transmit/reflect covert-rate maximization.

The driver alternates two lifted semidefinite subproblems.  With the
reflection coefficients held fixed, the transmit subproblem maximizes the
covert beam's received power over PSD-lifted beamformers under power, SIC
power-order, public-user QoS, CRB (Schur trace-inverse encoding), RIS load
and covertness constraints, plus a nuclear-minus-spectral penalty that drives
the communication blocks to rank one.  With the beams fixed, the reflection
subproblem maximizes the covert SINR as a linear fractional program over the
lifted phase vector, handled by a penalized Dinkelbach loop.

Numerical conditioning: channel powers are expressed in units of a reference
noise variance, the lifted phase matrix is scaled by the amplitude cap, and
the Fisher LMI pair is preconditioned by the diagonal of a reference Fisher
matrix.  All reported quantities are unscaled back to physical units.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import comm, conic, covertness
from .scenario import ChannelSet, SystemConfig, sample_targets
from .sensing import (
    CrbUndefinedError,
    build_fisher_components,
    crb_trace,
    fim_affine_map,
    fisher_information,
)

log = logging.getLogger(__name__)

DINKELBACH_RELATIVE_TOL = 1e-8


class SubproblemInfeasibleError(RuntimeError):
    """A beamforming subproblem has an empty feasible set."""


class InitializationError(RuntimeError):
    """No feasible starting point exists for this channel realization."""


# ---------------------------------------------------------------------------
# lifted parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LiftedParameters:
    """Coefficient matrices of the two lifted subproblems.

    Transmit-side entries (from a fixed reflection vector): ``upsilon[k]`` is
    the composite-channel outer product, ``h_rr[k]`` the RIS-channel outer
    product, ``psi_trace``/``gamma`` the RIS load pieces.  Reflect-side
    entries (from fixed beams): ``lam[k][j]`` realizes ``|g_k^H w_j|^2`` as a
    trace against the lifted phase matrix, ``omega[k]`` the reflected-noise
    quadratic, ``s_diag[j]`` the per-beam RIS signal load, ``pi`` the element
    count mask, and ``c_mat[k]`` the composite-channel Gram for the SIC order.
    """

    upsilon: dict | None = None
    h_rr: dict | None = None
    psi_trace: float | None = None
    gamma: np.ndarray | None = None
    lam: dict | None = None
    omega: dict | None = None
    s_diag: list | None = None
    pi: np.ndarray | None = None
    c_mat: dict | None = None


def build_lifted(channels: ChannelSet, config: SystemConfig, phi=None,
                 beams=None) -> LiftedParameters:
    """Lift whichever side's data is supplied (reflection vector, beam list)."""
    kw = {}
    users = ("g", "b", "w")
    if phi is not None:
        phi = np.asarray(phi)
        kw["upsilon"] = {k: _outer(comm.composite_channel(phi, channels, k))
                         for k in users}
        kw["h_rr"] = {k: _outer(channels.reflected(k)) for k in users}
        kw["psi_trace"] = float(np.sum(np.abs(phi) ** 2))
        pg = phi[:, None] * channels.G
        kw["gamma"] = pg.conj().T @ pg
    if beams is not None:
        n = channels.G.shape[0]
        lam = {k: [] for k in users}
        s_diag = []
        for w in beams:
            gw = channels.G @ w
            s_diag.append(np.diag(np.concatenate([np.abs(gw) ** 2, [0.0]])))
            for k in users:
                bar = np.concatenate([channels.reflected(k).conj() * gw,
                                      [channels.direct(k).conj() @ w]])
                lam[k].append(_outer(bar))
        kw["lam"] = lam
        kw["s_diag"] = s_diag
        kw["omega"] = {k: np.diag(np.concatenate(
            [np.abs(channels.reflected(k)) ** 2, [0.0]])) for k in users}
        kw["pi"] = np.diag(np.concatenate([np.ones(n), [0.0]]))
        c_mat = {}
        for k in users:
            bar = np.vstack([channels.reflected(k).conj()[:, None] * channels.G,
                             channels.direct(k).conj()[None, :]])
            c_mat[k] = bar @ bar.conj().T
        kw["c_mat"] = c_mat
    return LiftedParameters(**kw)


def _outer(v):
    v = np.asarray(v)
    return np.outer(v, v.conj())


# ---------------------------------------------------------------------------
# penalty and Dinkelbach state
# ---------------------------------------------------------------------------

@dataclass
class PenaltyState:
    """One rank-one penalty loop: weight 1/iota grows as iota shrinks."""

    iota: float
    shrink: float
    anchors: dict          # block name -> top eigenvector of the previous iterate
    residual: float = math.inf
    stage: int = 0

    def shrink_step(self):
        self.iota *= self.shrink
        self.stage += 1


@dataclass
class DinkelbachState:
    """Ratio estimate and the last numerator/denominator evaluations."""

    u: float
    f_num: float = math.nan
    f_den: float = math.nan
    iterations: int = 0
    surrogate: float = math.inf

    def update(self, f_num: float, f_den: float):
        if f_den <= 0:
            raise RuntimeError("Dinkelbach denominator must stay positive")
        self.f_num, self.f_den = f_num, f_den
        self.u = f_num / f_den
        self.iterations += 1


@dataclass(frozen=True)
class SpectralBound:
    """Affine majorant of -||X||_2 tangent at the anchor.

    ``value(X) = -q^H X q`` where q is the anchor's top eigenvector; this
    upper-bounds the negative spectral norm for every Hermitian X and is tight
    at the anchor.
    """

    q: np.ndarray
    anchor_norm: float

    def value(self, X) -> float:
        return -float(np.real(self.q.conj() @ np.asarray(X) @ self.q))


def spectral_linearization(x_prev: np.ndarray) -> SpectralBound:
    x_prev = np.asarray(x_prev)
    w, v = np.linalg.eigh(x_prev)
    q = v[:, -1]
    q = _phase_normalize(q)
    return SpectralBound(q=q, anchor_norm=float(max(w[-1], 0.0)))


def _phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate a complex vector so its first nonzero entry is real nonnegative."""
    idx = np.flatnonzero(np.abs(v) > 1e-14 * max(np.abs(v).max(), 1e-300))
    if idx.size == 0:
        return v
    ph = v[idx[0]] / abs(v[idx[0]])
    return v * ph.conjugate()


def extract_rank_one(X: np.ndarray, randomize=None, n_candidates: int = 200,
                     seed: int = 0):
    """Principal rank-one factor of a PSD matrix.

    Returns ``(vector, residual)`` with residual the relative Frobenius mass
    outside the top eigenpair.  When the residual exceeds 1e-3 and a
    ``randomize`` scorer is supplied, Gaussian candidates drawn from the
    column space are offered to it and the best feasible one wins.
    """
    X = np.asarray(X)
    norm = float(np.linalg.norm(X))
    if norm == 0.0:
        return np.zeros(X.shape[0], dtype=complex), 0.0
    w, v = np.linalg.eigh(X)
    lam, q = float(max(w[-1], 0.0)), v[:, -1]
    vec = math.sqrt(lam) * _phase_normalize(q)
    residual = float(np.linalg.norm(X - lam * np.outer(q, q.conj())) / norm)
    if residual > 1e-3 and randomize is not None:
        rng = np.random.default_rng(seed)
        half = v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
        cands = [half @ ((rng.standard_normal(X.shape[0])
                          + 1j * rng.standard_normal(X.shape[0])) / math.sqrt(2))
                 for _ in range(n_candidates)]
        best = randomize([_phase_normalize(c) for c in cands])
        if best is not None:
            vec = best
    return vec, residual


# ---------------------------------------------------------------------------
# noise-normalized view of the scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Scaled:
    channels: ChannelSet
    sigma_ref: float
    sigma_b2: float
    sigma_g2: float
    sigma_w2: float
    sigma_r2: float
    p_r_max: float


def _noise_normalized(channels: ChannelSet, config: SystemConfig) -> _Scaled:
    # direct channels and G carry the 1/sqrt(sigma_ref); RIS-user channels do
    # not, so every cascade and reflected-noise product lands in noise units
    s = max(config.sigma_b2, config.sigma_g2, config.sigma_w2)
    r = 1.0 / math.sqrt(s)
    ch = ChannelSet(
        h_ag=channels.h_ag * r, h_ab=channels.h_ab * r, h_aw=channels.h_aw * r,
        h_rg=channels.h_rg, h_rb=channels.h_rb, h_rw=channels.h_rw,
        G=channels.G * r, h_targets=channels.h_targets, seed=channels.seed)
    return _Scaled(channels=ch, sigma_ref=s,
                   sigma_b2=config.sigma_b2 / s, sigma_g2=config.sigma_g2 / s,
                   sigma_w2=config.sigma_w2 / s, sigma_r2=config.sigma_r2 / s,
                   p_r_max=config.p_r_max / s)


# ---------------------------------------------------------------------------
# transmit subproblem
# ---------------------------------------------------------------------------

@dataclass
class TransmitResult:
    W_g: np.ndarray
    W_b: np.ndarray
    W_s_lifted: np.ndarray | None
    J: np.ndarray
    w_g: np.ndarray
    w_b: np.ndarray
    W_s: np.ndarray | None
    objective: float
    rank_residuals: dict
    stages: int
    weighted_penalty: float


class _FimScaling:
    """Diagonal preconditioner for the Fisher LMI pair."""

    def __init__(self, comps, config):
        self.amap = fim_affine_map(comps)
        ref = fisher_information((config.p_a_max / config.M)
                                 * np.eye(config.M, dtype=complex), comps)
        d = np.sqrt(np.clip(np.diag(ref), np.abs(np.diag(ref)).max() * 1e-14, None))
        self.d = d
        self.dim = self.amap.dim
        # entry tensor of D^{-1} F(.) D^{-1}
        self.tensor = self.amap.tensor / np.outer(d, d)[:, :, None, None]

    def unscale_j(self, j_scaled: np.ndarray) -> np.ndarray:
        return np.outer(self.d, self.d) * j_scaled


def _transmit_problem(phi, scaled: _Scaled, fim: _FimScaling, config, kappa,
                      scheme, bounds, weight, feasibility=False):
    lift = build_lifted(scaled.channels, config, phi=phi)
    M = config.M
    dim = fim.dim
    with_dss = scheme == "w-DSS"

    p = conic.ConicProblem()
    p.add_block("W_g", M, conic.COMPLEX_PSD)
    p.add_block("W_b", M, conic.COMPLEX_PSD)
    beam_blocks = ["W_g", "W_b"]
    cov_blocks = ["W_g", "W_b"]
    if with_dss:
        p.add_block("W_s", M, conic.COMPLEX_PSD)
        cov_blocks.append("W_s")
    p.add_block("J", dim, conic.REAL_PSD)

    eye = np.eye(M)
    p.add_affine("bs_power", {b: eye for b in cov_blocks}, "<=", config.p_a_max)
    p.add_affine("power_order", {"W_g": eye, "W_b": -eye}, ">=", 0.0)
    gam = config.gamma_th
    p.add_affine(
        "grace_qos",
        {"W_g": lift.upsilon["g"], "W_b": -gam * lift.upsilon["g"]},
        ">=",
        gam * (np.trace(lift.h_rr["g"] @ np.diag(np.abs(phi) ** 2)).real
               * scaled.sigma_r2 + scaled.sigma_g2))
    # SIC decodability: Bob must decode the public stream at its QoS rate
    # (the channel-norm ordering alone does not guarantee this)
    p.add_affine(
        "bob_decodes_public",
        {"W_g": lift.upsilon["b"], "W_b": -gam * lift.upsilon["b"]},
        ">=",
        gam * (np.trace(lift.h_rr["b"] @ np.diag(np.abs(phi) ** 2)).real
               * scaled.sigma_r2 + scaled.sigma_b2))
    if config.ris_mode == "active":
        p.add_affine("ris_power", {b: lift.gamma for b in cov_blocks}, "<=",
                     scaled.p_r_max - lift.psi_trace * scaled.sigma_r2)
    shield = {"W_g": (1.0 - kappa) * lift.upsilon["w"]}
    if with_dss:
        shield["W_s"] = (1.0 - kappa) * lift.upsilon["w"]
    ris_leak = (np.trace(lift.h_rr["w"] @ np.diag(np.abs(phi) ** 2)).real
                * scaled.sigma_r2)
    p.add_affine("covertness", {"W_b": lift.upsilon["w"], **shield}, "<=",
                 (kappa - 1.0) * (scaled.sigma_w2 + ris_leak))

    # Fisher LMI pair: F(sum of blocks) >= J and tr(J^{-1}) <= mu, both in the
    # diagonally preconditioned coordinates (beam blocks stay in watts, which
    # is what the Fisher map expects; mu is folded into the Schur corner)
    t_j = np.zeros((dim, dim, dim, dim))
    for i in range(dim):
        for j in range(dim):
            t_j[i, j, i, j] = -1.0
    tensors = {b: fim.tensor for b in cov_blocks}
    tensors["J"] = t_j
    p.add_lmi("fisher_dominates", dim, tensors)
    conic.add_trace_inverse_constraint(
        p, "J", mu=1.0, scale=np.diag(1.0 / (fim.d * math.sqrt(config.mu))))

    objective = {} if feasibility else {"W_b": lift.upsilon["b"]}
    offset = 0.0
    for b in beam_blocks:
        bound = bounds[b]
        objective[b] = objective.get(b, 0.0) - weight * (eye - _outer(bound.q))
    p.set_objective(objective, offset)
    return p, lift


def solve_transmit(phi, channels: ChannelSet, targets, config: SystemConfig,
                   scheme: str | None = None, anchors=None,
                   feasibility=False) -> TransmitResult:
    """Penalized transmit-beamforming stage at a fixed reflection vector.

    ``anchors`` carries the previous beam outer products used to seed the
    spectral linearization; the penalty weight escalates until the lifted
    communication blocks are rank one to ``config.rank_residual_target``.
    """
    scheme = scheme or config.scheme
    scaled = _noise_normalized(channels, config)
    comps = build_fisher_components(targets, config)
    fim = _FimScaling(comps, config)
    kappa = covertness.kappa_from_epsilon(config.epsilon)
    phi = np.asarray(phi, dtype=complex)

    iota = config.iota_init[0] if scheme == "w/o-DSS" else config.iota_init[2]
    pen = PenaltyState(iota=iota, shrink=config.c_1, anchors={
        "W_g": spectral_linearization(anchors["W_g"]),
        "W_b": spectral_linearization(anchors["W_b"]),
    })
    best = None
    weighted = math.inf
    lift = None
    while True:
        prob, lift = _transmit_problem(
            phi, scaled, fim, config, kappa, scheme, pen.anchors,
            weight=1.0 / pen.iota, feasibility=feasibility)
        sol = conic.solve(prob, tolerance=config.solver_tol)
        if sol.status == "infeasible":
            raise SubproblemInfeasibleError(
                "transmit subproblem infeasible: the CRB threshold, covertness "
                "level, or QoS target cannot be met at this reflection state "
                f"(mu={config.mu:g}, epsilon={config.epsilon:g})")
        if sol.status not in ("optimal", "inaccurate"):
            raise SubproblemInfeasibleError(f"transmit stage returned {sol.status}")
        blocks = {b: sol.values[b] for b in ("W_g", "W_b")}
        residuals = {b: _rank_residual(v) for b, v in blocks.items()}
        pen.residual = max(residuals.values())
        weighted = sum(max(float(np.trace(v).real) + pen.anchors[b].value(v), 0.0)
                       for b, v in blocks.items()) / pen.iota
        best = (sol, blocks, residuals)
        if pen.residual <= config.rank_residual_target:
            break
        if pen.stage + 1 >= config.penalty_max_stages:
            log.debug("transmit penalty hit the stage cap at residual %.2e",
                      pen.residual)
            break
        pen.anchors = {b: spectral_linearization(v) for b, v in blocks.items()}
        pen.shrink_step()

    sol, blocks, residuals = best
    w_g, _ = extract_rank_one(blocks["W_g"])
    w_b, _ = extract_rank_one(blocks["W_b"])
    W_s_lift = sol.values.get("W_s")
    W_s = None
    if W_s_lift is not None:
        w, v = np.linalg.eigh(W_s_lift)
        W_s = v @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    j_val = fim.unscale_j(sol.values["J"])
    objective = float(np.real(np.trace(lift.upsilon["b"] @ blocks["W_b"])))
    return TransmitResult(
        W_g=blocks["W_g"], W_b=blocks["W_b"], W_s_lifted=W_s_lift, J=j_val,
        w_g=w_g, w_b=w_b, W_s=W_s,
        objective=objective * scaled.sigma_ref,
        rank_residuals=residuals, stages=pen.stage + 1,
        weighted_penalty=weighted)


def _rank_residual(X) -> float:
    w = np.linalg.eigvalsh(X)
    top = float(max(w[-1], 0.0))
    if top <= 0:
        return 0.0
    return float(max(np.sum(np.clip(w, 0.0, None)) - top, 0.0) / top)


# ---------------------------------------------------------------------------
# reflect subproblem
# ---------------------------------------------------------------------------

@dataclass
class ReflectResult:
    U: np.ndarray
    phi: np.ndarray
    objective_ratio: float     # covert SINR of the lifted point, no penalty
    penalized_ratio: float     # final Dinkelbach ratio including the penalty
    rank_residual: float
    stages: int
    dinkelbach_iterations: int
    surrogate: float


def _reflect_problem(lift, scaled: _Scaled, config, kappa, scheme, u_ratio,
                     bound: SpectralBound, weight):
    n1 = config.N + 1
    scale = np.concatenate([np.full(config.N, config.eta), [1.0]])
    D = np.outer(scale, scale)

    def sc(A):
        return np.asarray(A) * D

    p = conic.ConicProblem()
    p.add_block("U", n1, conic.COMPLEX_PSD)
    n_beams = len(lift.s_diag)

    # diagonal caps act on the scaled variable directly: U~_nn <= 1
    for n in range(config.N):
        C = np.zeros((n1, n1))
        C[n, n] = 1.0
        sense = "==" if config.ris_mode == "passive" else "<="
        p.add_affine(f"amp_{n}", {"U": C}, sense, 1.0)
    corner = np.zeros((n1, n1))
    corner[config.N, config.N] = 1.0
    p.add_affine("corner", {"U": corner}, "==", 1.0)

    p.add_affine("sic_order", {"U": sc(lift.c_mat["b"] - lift.c_mat["g"])}, ">=", 0.0)
    gam = config.gamma_th
    p.add_affine("grace_qos", {"U": sc(lift.lam["g"][0] - gam * lift.lam["g"][1]
                                       - gam * scaled.sigma_r2 * lift.omega["g"])},
                 ">=", gam * scaled.sigma_g2)
    p.add_affine("bob_decodes_public",
                 {"U": sc(lift.lam["b"][0] - gam * lift.lam["b"][1]
                          - gam * scaled.sigma_r2 * lift.omega["b"])},
                 ">=", gam * scaled.sigma_b2)
    if config.ris_mode == "active":
        load = sum(lift.s_diag) + scaled.sigma_r2 * lift.pi
        p.add_affine("ris_power", {"U": sc(load)}, "<=", scaled.p_r_max)
    shield = sum(lift.lam["w"][j] for j in range(n_beams) if j != 1)
    p.add_affine("covertness",
                 {"U": sc(lift.lam["w"][1] + (1.0 - kappa)
                          * (shield + scaled.sigma_r2 * lift.omega["w"]))},
                 "<=", (kappa - 1.0) * scaled.sigma_w2)

    # Dinkelbach surrogate: f1 - u*(noise terms + penalty)
    eye = np.eye(n1)
    obj = (sc(lift.lam["b"][1])
           - u_ratio * (scaled.sigma_r2 * sc(lift.omega["b"])
                        + weight * (eye - _outer(bound.q))))
    p.set_objective({"U": obj}, offset=-u_ratio * scaled.sigma_b2)
    return p, scale


def _reflect_values(lift, scaled, config, u_scaled, weight, bound):
    """(f1, f2) of the penalized ratio at a scaled lifted point."""
    scale = np.concatenate([np.full(config.N, config.eta), [1.0]])
    D = np.outer(scale, scale)
    f1 = float(np.real(np.trace((np.asarray(lift.lam["b"][1]) * D) @ u_scaled)))
    noise = float(np.real(np.trace((np.asarray(lift.omega["b"]) * D) @ u_scaled))
                  * scaled.sigma_r2) + scaled.sigma_b2
    pen = float(np.real(np.trace(u_scaled))
                + SpectralBound(bound.q, bound.anchor_norm).value(u_scaled))
    return f1, noise + weight * max(pen, 0.0)


def solve_reflect(beams, channels: ChannelSet, config: SystemConfig,
                  phi_prev, scheme: str | None = None) -> ReflectResult:
    """Penalized-Dinkelbach reflection stage at fixed beams.

    ``beams`` lists the transmit columns (public, covert, then any sensing
    columns).  The previous reflection vector seeds both the penalty anchor
    and the initial ratio estimate.
    """
    scheme = scheme or config.scheme
    if config.ris_mode == "none":
        raise ValueError("no reflection stage without a RIS")
    scaled = _noise_normalized(channels, config)
    lift = build_lifted(scaled.channels, config, beams=beams)
    kappa = covertness.kappa_from_epsilon(config.epsilon)

    scale = np.concatenate([np.full(config.N, config.eta), [1.0]])
    u_vec_prev = np.concatenate([np.conj(phi_prev), [1.0]]) / scale
    u_prev_mat = _outer(u_vec_prev)

    iota = config.iota_init[1] if scheme == "w/o-DSS" else config.iota_init[3]
    pen = PenaltyState(iota=iota, shrink=config.c_2,
                       anchors={"U": spectral_linearization(u_prev_mat)})
    dink_total = 0
    current = u_prev_mat
    ratio = max(config.u_init, 0.0)
    surrogate = math.inf
    while True:
        weight = 1.0 / pen.iota
        bound = pen.anchors["U"]
        f1, f2 = _reflect_values(lift, scaled, config, current, weight, bound)
        state = DinkelbachState(u=max(f1 / f2 if f2 > 0 else config.u_init,
                                      config.u_init))
        for _ in range(config.dinkelbach_max_iter):
            prob, _ = _reflect_problem(lift, scaled, config, kappa, scheme,
                                       state.u, bound, weight)
            sol = conic.solve(prob, tolerance=config.solver_tol)
            if sol.status == "infeasible":
                raise SubproblemInfeasibleError(
                    "reflection subproblem infeasible at the current beams")
            if sol.status not in ("optimal", "inaccurate"):
                raise SubproblemInfeasibleError(
                    f"reflection stage returned {sol.status}")
            current = sol.values["U"]
            f1, f2 = _reflect_values(lift, scaled, config, current, weight, bound)
            state.surrogate = f1 - state.u * f2
            dink_total += 1
            if state.surrogate <= DINKELBACH_RELATIVE_TOL * max(1.0, f1):
                state.update(f1, f2)
                break
            state.update(f1, f2)
        ratio = state.u
        surrogate = state.surrogate
        pen.residual = _rank_residual(current)
        if pen.residual <= config.rank_residual_target:
            break
        if pen.stage + 1 >= config.penalty_max_stages:
            log.debug("reflect penalty hit the stage cap at residual %.2e",
                      pen.residual)
            break
        pen.anchors = {"U": spectral_linearization(current)}
        pen.shrink_step()

    U = np.outer(scale, scale) * current
    vec, resid = extract_rank_one(U)
    if abs(vec[-1]) < 1e-9:
        raise RuntimeError("degenerate lifted phase matrix: unit corner lost")
    vec = vec / vec[-1]
    phi = np.conj(vec[:config.N])
    amp = np.abs(phi)
    if config.ris_mode == "passive":
        phi = phi / np.where(amp > 0, amp, 1.0)
    else:
        over = amp > config.eta
        if over.any():
            phi = np.where(over, phi * (config.eta / amp), phi)
    f1_clean, f2_clean = _reflect_values(lift, scaled, config, current,
                                         0.0, pen.anchors["U"])
    return ReflectResult(U=U, phi=phi, objective_ratio=f1_clean / f2_clean,
                         penalized_ratio=ratio, rank_residual=pen.residual,
                         stages=pen.stage + 1,
                         dinkelbach_iterations=dink_total, surrogate=surrogate)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

@dataclass
class InitialPoint:
    w_g: np.ndarray
    w_b: np.ndarray
    W_s: np.ndarray | None
    phi: np.ndarray


def initialize(config: SystemConfig, channels: ChannelSet, targets=None,
               scheme: str | None = None) -> InitialPoint:
    """Feasible starting point: Bob-matched reflection phases plus a 0.75/0.25
    matched-filter power split, backed off until every constraint holds; a
    feasibility SDP takes over when no back-off works.
    """
    scheme = scheme or config.scheme
    if targets is None:
        targets = sample_targets(config, channels.seed)

    if config.ris_mode == "none":
        phi = np.zeros(config.N, dtype=complex)
    else:
        hb = channels.h_ab
        direction = (hb / np.linalg.norm(hb)) if np.linalg.norm(hb) > 0 else \
            np.linalg.svd(channels.G)[2][0].conj()
        cascade = channels.h_rb.conj() * (channels.G @ direction)
        phases = np.where(np.abs(cascade) > 0, cascade / np.abs(np.where(
            np.abs(cascade) > 0, cascade, 1.0)), 1.0)
        phi = config.eta * np.conj(phases)
        if config.ris_mode == "active":
            # back the amplitude off until the reflected power budget holds
            for _ in range(60):
                load = comm.ris_output_power(
                    (np.zeros(config.M), np.zeros(config.M), phi), channels,
                    config) + _max_signal_load(phi, channels, config)
                if load <= config.p_r_max:
                    break
                phi *= 0.7
            else:
                raise InitializationError("cannot meet the RIS power budget "
                                          "even with vanishing amplitudes")

    if not comm.sic_feasible(phi, channels):
        raise InitializationError(
            "Bob's composite channel is weaker than Grace's for this "
            "realization; resample channels (the roles are never swapped "
            "silently)")

    g_g = comm.composite_channel(phi, channels, "g")
    g_b = comm.composite_channel(phi, channels, "b")
    kappa = covertness.kappa_from_epsilon(config.epsilon)

    for scale in 0.9 ** np.arange(0, 40):
        w_g = math.sqrt(0.75 * config.p_a_max * scale) * g_g / np.linalg.norm(g_g)
        w_b = math.sqrt(0.25 * config.p_a_max * scale) * g_b / np.linalg.norm(g_b)
        if _point_feasible(w_g, w_b, None, phi, channels, targets, config, kappa):
            return InitialPoint(w_g=w_g, w_b=w_b,
                                W_s=np.zeros((config.M, config.M), dtype=complex)
                                if scheme == "w-DSS" else None,
                                phi=phi)

    # matched filtering cannot satisfy the constraint set; fall back to a
    # penalized feasibility solve at the chosen reflection state
    anchors = {
        "W_g": 0.75 * config.p_a_max * _outer(g_g / np.linalg.norm(g_g)),
        "W_b": 0.25 * config.p_a_max * _outer(g_b / np.linalg.norm(g_b)),
    }
    try:
        res = solve_transmit(phi, channels, targets, config, scheme=scheme,
                             anchors=anchors, feasibility=True)
    except SubproblemInfeasibleError as exc:
        raise InitializationError(
            f"no feasible starting point: {exc}") from exc
    w_g, w_b, W_s = _repair_beams(res.w_g, res.w_b, res.W_s, phi, channels,
                                  config, kappa)
    return InitialPoint(w_g=w_g, w_b=w_b, W_s=W_s, phi=phi)


def _max_signal_load(phi, channels, config):
    # worst-case reflected signal power over unit-power transmit directions
    pg = phi[:, None] * channels.G
    return config.p_a_max * float(np.linalg.norm(pg, 2) ** 2)


def _point_feasible(w_g, w_b, W_s, phi, channels, targets, config, kappa,
                    tol=1e-9) -> bool:
    total = float(np.linalg.norm(w_g) ** 2 + np.linalg.norm(w_b) ** 2)
    if W_s is not None:
        total += float(np.linalg.norm(W_s) ** 2)
    if total > config.p_a_max * (1 + tol):
        return False
    if np.linalg.norm(w_g) ** 2 < np.linalg.norm(w_b) ** 2 * (1 - 1e-12):
        return False
    rates = comm.achievable_rates((w_g, w_b, phi), channels, config)
    if rates[2] < config.r_g_min * (1 - 1e-9):
        return False
    if rates[0] < config.r_g_min * (1 - 1e-9):
        return False
    if config.ris_mode == "active":
        sol = (w_g, w_b, phi) if W_s is None else (w_g, w_b, phi, W_s)
        if comm.ris_output_power(sol, channels, config) > config.p_r_max * (1 + tol):
            return False
    if covertness.covertness_margin(w_g, w_b, phi, channels, kappa, config,
                                    W_s=W_s) > tol * config.sigma_w2:
        return False
    r_x = np.outer(w_g, w_g.conj()) + np.outer(w_b, w_b.conj())
    if W_s is not None:
        r_x = r_x + W_s @ W_s.conj().T
    comps = build_fisher_components(targets, config)
    try:
        if crb_trace(fisher_information(r_x, comps)) > config.mu * (1 + 1e-9):
            return False
    except CrbUndefinedError:
        return False
    return True


def _repair_beams(w_g, w_b, W_s, phi, channels, config, kappa):
    """Tiny post-extraction projections that restore active constraints."""
    total = float(np.linalg.norm(w_g) ** 2 + np.linalg.norm(w_b) ** 2)
    if W_s is not None:
        total += float(np.linalg.norm(W_s) ** 2)
    if total > config.p_a_max:
        s = math.sqrt(config.p_a_max / total) * (1 - 1e-12)
        w_g, w_b = w_g * s, w_b * s
        if W_s is not None:
            W_s = W_s * s
    if np.linalg.norm(w_b) > np.linalg.norm(w_g):
        w_b = w_b * (np.linalg.norm(w_g) / np.linalg.norm(w_b)) * (1 - 1e-12)
    margin = covertness.covertness_margin(w_g, w_b, phi, channels, kappa,
                                          config, W_s=W_s)
    if margin > 0:
        g_w = comm.composite_channel(phi, channels, "w")
        leak = float(np.abs(g_w.conj() @ w_b) ** 2)
        budget = leak - margin
        if budget <= 0:
            w_b = np.zeros_like(w_b)
        elif margin > 1e-4 * leak:
            log.warning("covertness violated beyond repair tolerance "
                        "(margin %.3e of leak %.3e)", margin, leak)
        else:
            w_b = w_b * math.sqrt(budget / leak) * (1 - 1e-12)
    return w_g, w_b, W_s


# ---------------------------------------------------------------------------
# alternating optimization driver
# ---------------------------------------------------------------------------

def alternating_optimize(config: SystemConfig, channels: ChannelSet,
                         scheme: str | None = None,
                         targets=None) -> comm.BeamformerSolution:
    """Block-coordinate ascent over transmit beams and reflection coefficients.

    Runs until the covert-rate gain drops below ``xi_1`` or the iteration cap
    is reached; a candidate iterate that fails to improve the extracted-vector
    covert rate is rejected so the recorded trace is non-decreasing.  Returns
    the best feasible iterate with its per-iteration trace.
    """
    scheme = scheme or config.scheme
    if targets is None:
        targets = sample_targets(config, channels.seed)
    kappa = covertness.kappa_from_epsilon(config.epsilon)
    comps = build_fisher_components(targets, config)

    init = initialize(config, channels, targets=targets, scheme=scheme)
    w_g, w_b, W_s, phi = init.w_g, init.w_b, init.W_s, init.phi
    rate = comm.achievable_rates((w_g, w_b, phi), channels, config)[1]

    trace = []
    converged = False
    iterations = 0
    lifted_sinr = None
    for s in range(1, config.ao_max_iter + 1):
        t0 = time.perf_counter()
        anchors = {"W_g": _outer(w_g), "W_b": _outer(w_b)}
        tx = solve_transmit(phi, channels, targets, config, scheme=scheme,
                            anchors=anchors)
        cand_wg, cand_wb, cand_ws = _repair_beams(
            tx.w_g, tx.w_b, tx.W_s, phi, channels, config, kappa)

        dink_iters = 0
        reflect_residual = 0.0
        cand_phi = phi
        cand_lifted = None
        if config.ris_mode != "none":
            beams = [cand_wg, cand_wb]
            if cand_ws is not None:
                beams.extend(cand_ws[:, j] for j in range(config.M))
            rx = solve_reflect(beams, channels, config, phi_prev=phi,
                               scheme=scheme)
            cand_phi = rx.phi
            dink_iters = rx.dinkelbach_iterations
            reflect_residual = rx.rank_residual
            cand_lifted = rx.objective_ratio
        else:
            # lifted covert SINR straight from the transmit objective
            cand_lifted = tx.objective / config.sigma_b2

        cand_rate = comm.achievable_rates((cand_wg, cand_wb, cand_phi),
                                          channels, config)[1]
        wall = time.perf_counter() - t0
        iterations = s

        if cand_rate < rate - 1e-12:
            # solver noise produced a regression; keep the previous iterate
            converged = True
            trace.append(_trace_row(s, rate, comps, w_g, w_b, W_s, phi,
                                    channels, config, kappa, tx, dink_iters,
                                    reflect_residual, wall))
            break

        gain = cand_rate - rate
        w_g, w_b, W_s, phi, rate = cand_wg, cand_wb, cand_ws, cand_phi, cand_rate
        lifted_sinr = cand_lifted
        trace.append(_trace_row(s, rate, comps, w_g, w_b, W_s, phi, channels,
                                config, kappa, tx, dink_iters,
                                reflect_residual, wall))
        if gain <= config.xi_1:
            converged = True
            break

    if not converged:
        log.warning("alternating optimization hit the iteration cap (%d); "
                    "returning the best feasible iterate", config.ao_max_iter)

    rates = comm.achievable_rates((w_g, w_b, phi), channels, config)
    r_x = np.outer(w_g, w_g.conj()) + np.outer(w_b, w_b.conj())
    if W_s is not None:
        r_x = r_x + W_s @ W_s.conj().T
    try:
        crb = crb_trace(fisher_information(r_x, comps))
    except CrbUndefinedError:
        crb = math.inf
    margin = covertness.covertness_margin(w_g, w_b, phi, channels, kappa,
                                          config, W_s=W_s)
    return comm.BeamformerSolution(
        w_g=w_g, w_b=w_b, phi=phi, W_s=W_s, rates=rates, crb=crb,
        covert_margin=margin, trace=trace, converged=converged,
        ao_iterations=iterations, lifted_sinr=lifted_sinr)


def _trace_row(iteration, rate, comps, w_g, w_b, W_s, phi, channels, config,
               kappa, tx: TransmitResult, dink_iters, reflect_residual, wall):
    r_x = np.outer(w_g, w_g.conj()) + np.outer(w_b, w_b.conj())
    if W_s is not None:
        r_x = r_x + W_s @ W_s.conj().T
    try:
        crb = crb_trace(fisher_information(r_x, comps))
    except CrbUndefinedError:
        crb = math.inf
    return {
        "iteration": iteration,
        "covert_rate": rate,
        "crb": crb,
        "covert_margin": covertness.covertness_margin(
            w_g, w_b, phi, channels, kappa, config, W_s=W_s),
        "transmit_rank_residual": max(tx.rank_residuals.values()),
        "reflect_rank_residual": reflect_residual,
        "dinkelbach_iterations": dink_iters,
        "wall_time": wall,
    }
