"""Multi-target echo model: Fisher information, CRB trace, and beampatterns.

The Fisher information matrix for the stacked parameter vector
``[theta_1..Q, Re(alpha)_1..Q, Im(alpha)_1..Q, f_D1..Q]`` is an exactly linear
function of the transmit covariance.  :func:`fisher_information` assembles it
in closed form from Hadamard products of target-side matrices;
:class:`FimAffineMap` caches the action on a Hermitian basis so conic solvers
can pose linear-matrix-inequality constraints on it.

Note on the reflection-factor cross block: the closed form used here is the
one implied by differentiating the noise-free echo (the alpha derivative of
the echo carries no reflection-factor diagonal), which is what the
finite-difference oracle in the test suite validates against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .scenario import SystemConfig, path_loss, steering_vector, steering_vector_derivative

log = logging.getLogger(__name__)


class CrbUndefinedError(ValueError):
    """Raised when the Fisher matrix is singular or indefinite."""


@dataclass(frozen=True)
class FisherComponents:
    """Target-side matrices from which the FIM is linear in the covariance.

    ``A`` (M x Q) stacks the amplitude-scaled steering vectors, ``A_dot`` their
    angle derivatives, ``V`` is the diagonal of complex reflection factors,
    ``Z`` the receiver noise covariance, and ``Sigma1..3`` the Q x Q
    Doppler-sum matrices over the L-symbol interval.
    """

    A: np.ndarray
    A_dot: np.ndarray
    V: np.ndarray
    Z: np.ndarray
    Sigma1: np.ndarray
    Sigma2: np.ndarray
    Sigma3: np.ndarray
    L: int
    T: float

    @property
    def Q(self) -> int:
        return self.A.shape[1]

    @property
    def M(self) -> int:
        return self.A.shape[0]


def doppler_sum_matrices(dopplers: np.ndarray, L: int, T: float):
    """Sigma_k[i, j] = sum_{l=1..L} (2*pi*l*T)^k * exp(j*2*pi*(fD_j - fD_i)*l*T)."""
    l = np.arange(1, L + 1, dtype=float)
    dw = 2.0 * np.pi * (dopplers[None, :] - dopplers[:, None])
    phase = np.exp(1j * dw[:, :, None] * (l * T)[None, None, :])
    w = 2.0 * np.pi * T * l
    s1 = phase.sum(axis=2)
    s2 = (w[None, None, :] * phase).sum(axis=2)
    s3 = ((w ** 2)[None, None, :] * phase).sum(axis=2)
    return s1, s2, s3


def build_fisher_components(targets, config: SystemConfig) -> FisherComponents:
    """Assemble steering matrices, reflection diagonal, and Doppler sums.

    Every target must carry a sampled reflection factor (``alpha``).
    """
    targets = tuple(targets)
    if not targets:
        raise ValueError("need at least one target")
    if any(t.alpha is None for t in targets):
        raise ValueError("targets must carry sampled reflection factors; "
                         "use scenario.sample_targets")
    amps = np.array([np.sqrt(path_loss(t.distance, config.chi_bs_target, config.L0))
                     for t in targets])
    A = np.stack([amps[q] * steering_vector(t.theta, config.M)
                  for q, t in enumerate(targets)], axis=1)
    A_dot = np.stack([amps[q] * steering_vector_derivative(t.theta, config.M)
                      for q, t in enumerate(targets)], axis=1)
    V = np.diag([t.alpha for t in targets]).astype(complex)
    Z = config.sigma_a2 * np.eye(config.M)
    dopplers = np.array([t.doppler(config.f_c) for t in targets])
    s1, s2, s3 = doppler_sum_matrices(dopplers, config.L, config.T)
    return FisherComponents(A=A, A_dot=A_dot, V=V, Z=Z,
                            Sigma1=s1, Sigma2=s2, Sigma3=s3,
                            L=config.L, T=config.T)


def fisher_information(r_x: np.ndarray, comps: FisherComponents) -> np.ndarray:
    """Assemble the real symmetric 4Q x 4Q FIM for transmit covariance ``r_x``.

    Linear in ``r_x`` and PSD whenever ``r_x`` is PSD.  The output is
    symmetrized by averaging with its transpose to remove rounding asymmetry.
    """
    M, Q = comps.M, comps.Q
    if r_x.shape != (M, M):
        raise ValueError(f"covariance must be {M}x{M}, got {r_x.shape}")
    A, Ad, V = comps.A, comps.A_dot, comps.V
    Vc = V.conj()
    zi = 1.0 / comps.Z[0, 0]        # Z = sigma_a2 * I
    rc = r_x.conj()

    aza = zi * (A.conj().T @ A)
    azad = zi * (A.conj().T @ Ad)
    adza = zi * (Ad.conj().T @ A)
    adzad = zi * (Ad.conj().T @ Ad)
    ara = A.conj().T @ rc @ A
    arad = A.conj().T @ rc @ Ad
    adra = Ad.conj().T @ rc @ A
    adrad = Ad.conj().T @ rc @ Ad

    s1, s2, s3 = comps.Sigma1, comps.Sigma2, comps.Sigma3
    f11 = (adzad * (Vc @ ara @ V) + adza * (Vc @ arad @ V)
           + azad * (Vc @ adra @ V) + aza * (Vc @ adrad @ V)) * s1
    # no right reflection factor: the alpha-derivative of the echo has no V
    f12 = (adza * (Vc @ ara) + aza * (Vc @ adra)) * s1
    f14 = (adza * (Vc @ ara @ V) + aza * (Vc @ adra @ V)) * s2
    f22 = aza * ara * s1
    f24 = aza * (ara @ V) * s2
    f44 = aza * (Vc @ ara @ V) * s3

    F = 2.0 * np.block([
        [f11.real, f12.real, -f12.imag, -f14.imag],
        [f12.real.T, f22.real, -f22.imag, -f24.imag],
        [-f12.imag.T, -f22.imag.T, f22.real, f24.real],
        [-f14.imag.T, -f24.imag.T, f24.real.T, f44.real],
    ])
    return (F + F.T) / 2.0


def crb_trace(F: np.ndarray) -> float:
    """tr(F^{-1}) through a Cholesky factorization of the symmetric FIM.

    Raises :class:`CrbUndefinedError` if F is singular or indefinite rather
    than returning infinity.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError("F must be square")
    if not np.allclose(F, F.T, rtol=1e-8, atol=1e-12 * max(1.0, np.abs(F).max())):
        raise ValueError("F must be symmetric")
    try:
        c, low = scipy.linalg.cho_factor(F, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise CrbUndefinedError("CRB undefined: Fisher matrix is singular or "
                                "indefinite") from exc
    inv = scipy.linalg.cho_solve((c, low), np.eye(F.shape[0]), check_finite=False)
    diag = np.diag(c)
    cond_est = (diag.max() / diag.min()) ** 2
    if cond_est > 1e14:
        log.warning("Fisher matrix badly conditioned (cond >= %.2e); "
                    "CRB trace may be inaccurate", cond_est)
    return float(np.trace(inv))


def _hermitian_basis(n: int):
    """Real-coefficient basis of n x n Hermitian matrices with coordinate maps."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(("d", i, i, e))
    for i in range(n):
        for j in range(i + 1, n):
            re = np.zeros((n, n), dtype=complex)
            re[i, j] = re[j, i] = 1.0
            basis.append(("re", i, j, re))
            im = np.zeros((n, n), dtype=complex)
            im[i, j] = 1j
            im[j, i] = -1j
            basis.append(("im", i, j, im))
    return basis


class FimAffineMap:
    """Cached linear map from Hermitian covariances to Fisher matrices.

    Stores the FIM of every Hermitian basis element so that evaluation is a
    real linear combination, and exposes the entry-coefficient tensor
    ``K[i, j]`` (Hermitian M x M) with ``F(R)[i, j] == Re tr(K[i, j] @ R)`` for
    use in LMI constraints.
    """

    def __init__(self, comps: FisherComponents):
        self.comps = comps
        n = comps.M
        self._basis = _hermitian_basis(n)
        self._images = [fisher_information(b[3], comps) for b in self._basis]
        self.dim = 4 * comps.Q

        # entry-coefficient tensor: F(R)[i,j] = Re(sum_kl K[i,j,k,l] R[k,l])
        K = np.zeros((self.dim, self.dim, n, n), dtype=complex)
        for (kind, i, j, _), img in zip(self._basis, self._images):
            if kind == "d":
                K[:, :, i, i] += img
            elif kind == "re":
                K[:, :, i, j] += img / 2.0
                K[:, :, j, i] += img / 2.0
            else:
                K[:, :, i, j] += -1j * img / 2.0
                K[:, :, j, i] += 1j * img / 2.0
        self.tensor = K

    def coordinates(self, r_x: np.ndarray) -> np.ndarray:
        coords = []
        for kind, i, j, _ in self._basis:
            if kind == "d":
                coords.append(r_x[i, i].real)
            elif kind == "re":
                coords.append(r_x[i, j].real)
            else:
                coords.append(r_x[i, j].imag)
        return np.array(coords)

    def evaluate(self, r_x: np.ndarray) -> np.ndarray:
        coords = self.coordinates(r_x)
        F = np.zeros((self.dim, self.dim))
        for c, img in zip(coords, self._images):
            if c != 0.0:
                F += c * img
        return F

    def basis_image(self, index: int) -> np.ndarray:
        return self._images[index]


def fim_affine_map(comps: FisherComponents) -> FimAffineMap:
    return FimAffineMap(comps)


def beampattern(r_x: np.ndarray, angle_grid, normalize: bool = False) -> np.ndarray:
    """Power radiated toward each bearing under the echo model's convention.

    A target at bearing theta is excited through a(theta)^T x, so the power
    it sees is a(theta)^T R_x a(theta)^*; evaluating a(theta)^H R_x a(theta)
    instead would display every lobe at the mirrored bearing.  With
    ``normalize=True`` the output is in dB with the peak at 0 dB.
    """
    r_x = np.asarray(r_x)
    m_ant = r_x.shape[0]
    powers = np.empty(len(angle_grid))
    for i, theta in enumerate(np.asarray(angle_grid, dtype=float)):
        a = steering_vector(theta, m_ant)
        powers[i] = max(float(np.real(a @ r_x @ a.conj())), 0.0)
    if normalize:
        peak = powers.max()
        if peak <= 0:
            raise ValueError("cannot normalize an all-zero beampattern")
        return 10.0 * np.log10(np.maximum(powers, 1e-300) / peak)
    return powers
