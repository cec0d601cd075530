"""NOMA communication metrics: composite channels, SINRs, achievable rates,
SIC feasibility, and the RIS output power.

The dedicated sensing beams (present only in the w-DSS scheme) are known
sequences pre-cancelled at both receivers, so no rate expression depends on
them; they do count toward the RIS amplifier load.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import ChannelSet, SystemConfig


@dataclass
class BeamformerSolution:
    """Joint transmit/reflect design plus the metrics recorded for it.

    ``phi`` holds the diagonal of the reflection matrix.  ``trace`` is the
    per-AO-iteration log (dicts with iteration, covert rate, CRB, margin,
    penalty residuals, Dinkelbach iteration count, wall time).
    """

    w_g: np.ndarray
    w_b: np.ndarray
    phi: np.ndarray
    W_s: np.ndarray | None = None
    rates: tuple[float, float, float] | None = None   # (R_b_sg, R_b_sb, R_g_sg)
    crb: float | None = None
    covert_margin: float | None = None
    trace: list = field(default_factory=list)
    converged: bool = True
    ao_iterations: int = 0
    lifted_sinr: float | None = None   # covert SINR of the last lifted stage

    @property
    def covert_rate(self) -> float | None:
        return None if self.rates is None else self.rates[1]

    def transmit_covariance(self) -> np.ndarray:
        r = np.outer(self.w_g, self.w_g.conj()) + np.outer(self.w_b, self.w_b.conj())
        if self.W_s is not None:
            r = r + self.W_s @ self.W_s.conj().T
        return r

    def bs_power(self) -> float:
        p = float(np.linalg.norm(self.w_g) ** 2 + np.linalg.norm(self.w_b) ** 2)
        if self.W_s is not None:
            p += float(np.linalg.norm(self.W_s) ** 2)
        return p


def composite_channel(phi, channels: ChannelSet, k: str) -> np.ndarray:
    """Effective BS-to-node-k channel g_k with the RIS cascade folded in.

    Defined through g_k^H = h_ak^H + h_rk^H Phi G.
    """
    phi = np.asarray(phi)
    return channels.direct(k) + channels.G.conj().T @ (phi.conj() * channels.reflected(k))


def _sinr_triplet(w_g, w_b, phi, channels, config):
    g_b = composite_channel(phi, channels, "b")
    g_g = composite_channel(phi, channels, "g")
    phi = np.asarray(phi)
    ris_b = float(np.sum(np.abs(channels.h_rb.conj() * phi) ** 2)) * config.sigma_r2
    ris_g = float(np.sum(np.abs(channels.h_rg.conj() * phi) ** 2)) * config.sigma_r2
    p_bg = float(np.abs(g_b.conj() @ w_g) ** 2)
    p_bb = float(np.abs(g_b.conj() @ w_b) ** 2)
    p_gg = float(np.abs(g_g.conj() @ w_g) ** 2)
    p_gb = float(np.abs(g_g.conj() @ w_b) ** 2)
    sinr_b_sg = p_bg / (p_bb + ris_b + config.sigma_b2)
    sinr_b_sb = p_bb / (ris_b + config.sigma_b2)
    sinr_g_sg = p_gg / (p_gb + ris_g + config.sigma_g2)
    return sinr_b_sg, sinr_b_sb, sinr_g_sg


def achievable_rates(sol, channels: ChannelSet, config: SystemConfig):
    """(R_b_sg, R_b_sb, R_g_sg) in bits/s/Hz.

    Accepts either a :class:`BeamformerSolution` or a ``(w_g, w_b, phi)``
    triple; identical in both schemes since the sensing beams are cancelled.
    """
    if isinstance(sol, BeamformerSolution):
        w_g, w_b, phi = sol.w_g, sol.w_b, sol.phi
    else:
        w_g, w_b, phi = sol
    sinrs = _sinr_triplet(w_g, w_b, phi, channels, config)
    return tuple(float(np.log2(1.0 + s)) for s in sinrs)


def sic_feasible(phi, channels: ChannelSet) -> bool:
    """Whether Bob's composite channel dominates Grace's in norm."""
    g_b = composite_channel(phi, channels, "b")
    g_g = composite_channel(phi, channels, "g")
    return float(np.linalg.norm(g_b) ** 2) >= float(np.linalg.norm(g_g) ** 2)


def ris_output_power(sol, channels: ChannelSet, config: SystemConfig) -> float:
    """Amplifier load of the RIS: reflected signal power plus reflected noise."""
    if isinstance(sol, BeamformerSolution):
        w_g, w_b, phi, W_s = sol.w_g, sol.w_b, sol.phi, sol.W_s
    else:
        w_g, w_b, phi = sol[:3]
        W_s = sol[3] if len(sol) > 3 else None
    phi = np.asarray(phi)
    cols = [w_g, w_b]
    if W_s is not None:
        cols.extend(W_s[:, j] for j in range(W_s.shape[1]))
    signal = sum(float(np.sum(np.abs(phi * (channels.G @ w)) ** 2)) for w in cols)
    return signal + float(np.sum(np.abs(phi) ** 2)) * config.sigma_r2
