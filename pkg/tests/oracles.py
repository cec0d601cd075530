"""Independent oracles shared by the unit and acceptance suites.

These deliberately avoid the library's assembly paths: the Fisher oracle
differentiates the raw echo model numerically, the Doppler-sum oracle loops,
and the KL oracle integrates densities with quadrature.
"""

import numpy as np
from scipy import integrate


def echo_matrix(theta, alpha, dopplers, amps, x_mat, l, T):
    """Noise-free echo at symbol l for transmit matrix x_mat (columns = streams)."""
    m_ant = x_mat.shape[0]
    m = np.arange(m_ant)
    A = np.stack([amps[q] * np.exp(1j * np.pi * m * np.sin(theta[q]))
                  for q in range(len(theta))], axis=1)
    V = np.diag(alpha)
    E = np.diag(np.exp(1j * 2 * np.pi * dopplers * l * T))
    return A @ V @ E @ A.T @ x_mat


def finite_difference_fim(r_x, theta, alpha, dopplers, amps, sigma_a2, L, T):
    """FIM via central differences of the echo model.

    Uses an exact Hermitian square root of ``r_x`` as the per-symbol transmit
    matrix so the sample covariance equals ``r_x`` at every symbol.
    """
    Q = len(theta)
    w, U = np.linalg.eigh(r_x)
    x_mat = U @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T

    xi0 = np.concatenate([theta, np.real(alpha), np.imag(alpha), dopplers])
    steps = np.concatenate([
        np.full(Q, 1e-6), np.full(2 * Q, 1e-6), np.full(Q, 1e-6 / T),
    ])

    def unpack(xi):
        return (xi[0:Q], xi[Q:2 * Q] + 1j * xi[2 * Q:3 * Q], xi[3 * Q:4 * Q])

    n_par = 4 * Q
    jac = np.zeros((L, n_par) + x_mat.shape, dtype=complex)
    for a in range(n_par):
        dp = np.zeros(n_par)
        dp[a] = steps[a]
        for li, l in enumerate(range(1, L + 1)):
            tp, ap, fp = unpack(xi0 + dp)
            tm, am, fm = unpack(xi0 - dp)
            jac[li, a] = (echo_matrix(tp, ap, fp, amps, x_mat, l, T)
                          - echo_matrix(tm, am, fm, amps, x_mat, l, T)) / (2 * steps[a])

    F = np.zeros((n_par, n_par))
    for a in range(n_par):
        for b in range(a, n_par):
            s = sum(np.real(np.trace(jac[li, a].conj().T @ jac[li, b]))
                    for li in range(L))
            F[a, b] = F[b, a] = 2.0 * s / sigma_a2
    return F


def doppler_sum_direct(dopplers, L, T, power):
    """Direct loop evaluation of the Doppler-sum matrices."""
    Q = len(dopplers)
    out = np.zeros((Q, Q), dtype=complex)
    for i in range(Q):
        for j in range(Q):
            for l in range(1, L + 1):
                out[i, j] += (2 * np.pi * l * T) ** power * np.exp(
                    1j * 2 * np.pi * (dopplers[j] - dopplers[i]) * l * T)
    return out


def kl_gaussian_quadrature(sigma0_sq, sigma1_sq):
    """KL divergence between two circular complex Gaussians by 1-D quadrature.

    The densities depend on |y|^2 only, so integrate over r = |y|^2 with the
    exponential radial law p_i(r) = exp(-r/s_i)/s_i.
    """
    def integrand(r):
        p0 = np.exp(-r / sigma0_sq) / sigma0_sq
        log_ratio = (np.log(sigma1_sq / sigma0_sq)
                     - r / sigma0_sq + r / sigma1_sq)
        return p0 * log_ratio

    val, _ = integrate.quad(integrand, 0.0, np.inf, limit=200)
    return val


def rate_triplet_monte_carlo(w_g, w_b, phi, channels, config, n_symbols, seed):
    """Symbol-level SINR estimates for the three NOMA rates.

    Simulates the received samples with unit-variance symbols and RIS noise,
    then forms SINRs from empirical signal/interference powers.
    """
    rng = np.random.default_rng(seed)
    Phi = np.diag(phi)
    out = {}
    for k, (h_a, h_r, sig2) in {
        "b": (channels.h_ab, channels.h_rb, config.sigma_b2),
        "g": (channels.h_ag, channels.h_rg, config.sigma_g2),
    }.items():
        g = h_a + channels.G.conj().T @ Phi.conj().T @ h_r
        s_g = (rng.standard_normal(n_symbols) + 1j * rng.standard_normal(n_symbols)) / np.sqrt(2)
        s_b = (rng.standard_normal(n_symbols) + 1j * rng.standard_normal(n_symbols)) / np.sqrt(2)
        z_r = (rng.standard_normal((n_symbols, len(h_r)))
               + 1j * rng.standard_normal((n_symbols, len(h_r)))) * np.sqrt(config.sigma_r2 / 2)
        z_k = (rng.standard_normal(n_symbols) + 1j * rng.standard_normal(n_symbols)) * np.sqrt(sig2 / 2)
        sig_g = (g.conj() @ w_g) * s_g
        sig_b = (g.conj() @ w_b) * s_b
        ris_noise = z_r @ (Phi.conj().T @ h_r).conj()
        denom_common = np.mean(np.abs(ris_noise + z_k) ** 2)
        out[k] = {
            "p_g": np.mean(np.abs(sig_g) ** 2),
            "p_b": np.mean(np.abs(sig_b) ** 2),
            "noise": denom_common,
        }
    sinr_b_sg = out["b"]["p_g"] / (out["b"]["p_b"] + out["b"]["noise"])
    sinr_b_sb = out["b"]["p_b"] / out["b"]["noise"]
    sinr_g_sg = out["g"]["p_g"] / (out["g"]["p_b"] + out["g"]["noise"])
    return tuple(np.log2(1.0 + s) for s in (sinr_b_sg, sinr_b_sb, sinr_g_sg))
