"""Scenario layer: system configuration, geometry, and random channel generation.

Everything downstream consumes the immutable :class:`SystemConfig` plus a
:class:`ChannelSet` drawn by :func:`sample_channels`.  All randomness is a pure
function of ``(config, seed)`` so paired experiments can reuse realizations.

Configuration files are JSON.  File-level units are human-friendly and get
converted on load: powers in dBm, angles in degrees, RIS amplification as a
power gain in dB (``eta_sq_db``).  Internally everything is SI / linear.

File schema (all keys optional, missing ones fall back to defaults)::

    {
      "M": 8, "N": 16, "L": 1024,
      "P_a_max_dbm": 30.0, "P_r_max_dbm": 25.0,
      "sigma_b2_dbm": -90.0, "sigma_g2_dbm": -90.0, "sigma_w2_dbm": -90.0,
      "sigma_r2_dbm": -90.0, "sigma_a2_dbm": -90.0,
      "R_g_min": 1.0, "epsilon": 0.1, "mu": 0.08,
      "eta_sq_db": 40.0,
      "f_c_hz": 3.0e9, "T_s": 1.0e-6, "L0_db": -30.0,
      "chi": {"bs_user": 3.5, "bs_target": 2.3, "ris": 2.2},
      "beta": {"bs_user": 0.0, "ris": 1.995},
      "positions": {"alice": [0,0], "ris": [75,30], "bob": [80,10],
                    "grace": [90,0], "willie": [70,5]},
      "targets": [{"angle_deg": -35, "distance_m": 40, "velocity_mps": 6,
                   "rcs_var": 1.0}, ...],
      "tolerances": {"xi_1": 1e-2, "xi_2": 1e-4, "xi_3": 1e-4,
                     "solver": 1e-8},
      "penalty": {"iota_init": [100,100,100,100], "c_1": 1e-2, "c_2": 1e-2},
      "dinkelbach": {"u_init": 1e-3, "max_iterations": 30},
      "scheme": "w/o-DSS", "ris_mode": "active"
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
import numpy as np

SPEED_OF_LIGHT = 299792458.0

SCHEMES = ("w/o-DSS", "w-DSS")
RIS_MODES = ("active", "passive", "none")


# ---------------------------------------------------------------------------
# unit helpers
# ---------------------------------------------------------------------------

def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0 - 3.0)


def watts_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        raise ValueError("power must be positive to express in dBm")
    return 10.0 * math.log10(p_w) + 30.0


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


# ---------------------------------------------------------------------------
# core operations
# ---------------------------------------------------------------------------

def steering_vector(theta: float, size: int) -> np.ndarray:
    """Uniform-linear-array response with half-wavelength spacing.

    Element ``m`` (0-based) equals ``exp(j*pi*m*sin(theta))``; every entry has
    unit modulus so ``||a||^2 == size`` exactly.
    """
    if size < 1:
        raise ValueError("array size must be >= 1")
    m = np.arange(size)
    return np.exp(1j * np.pi * m * np.sin(theta))


def steering_vector_derivative(theta: float, size: int) -> np.ndarray:
    """Entrywise derivative of :func:`steering_vector` with respect to theta."""
    if size < 1:
        raise ValueError("array size must be >= 1")
    m = np.arange(size)
    return 1j * np.pi * m * np.cos(theta) * np.exp(1j * np.pi * m * np.sin(theta))


def path_loss(d: float, chi: float, l0: float = 1e-3) -> float:
    """Distance power-law path loss ``l0 * d**(-chi)`` (linear power gain)."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return l0 * d ** (-chi)


def doppler_frequency(v: float, f_c: float) -> float:
    """Round-trip Doppler shift ``2*v*f_c/c`` in Hz for radial velocity v."""
    return 2.0 * v * f_c / SPEED_OF_LIGHT


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Target:
    """One moving point target.

    ``alpha`` is the complex reflection factor; it is None until a realization
    draws it (variance ``rcs_var``).  ``doppler(f_c)`` derives the round-trip
    Doppler frequency.
    """

    theta: float            # azimuth from the BS x-axis, radians
    distance: float         # BS-target range, meters
    velocity: float         # radial velocity, m/s
    rcs_var: float = 1.0    # variance of the reflection factor
    alpha: complex | None = None

    def doppler(self, f_c: float) -> float:
        return doppler_frequency(self.velocity, f_c)


_PAPER_TARGETS = (
    Target(theta=math.radians(-35.0), distance=40.0, velocity=6.0),
    Target(theta=math.radians(0.0), distance=50.0, velocity=14.0),
    Target(theta=math.radians(35.0), distance=35.0, velocity=10.0),
)


@dataclass(frozen=True)
class SystemConfig:
    """All scenario scalars; immutable and hashable-by-identity.

    Power-like values are stored in watts, angles in radians, Rician factors
    linear.  ``ris_mode='passive'`` normalizes ``eta=1`` and treats the RIS
    noise as zero; ``ris_mode='none'`` zeroes every RIS channel on sampling.
    """

    M: int = 8                       # transmit/receive antennas
    N: int = 16                      # RIS elements
    L: int = 1024                    # symbols per CPI
    p_a_max: float = dbm_to_watts(30.0)
    p_r_max: float = dbm_to_watts(25.0)
    sigma_b2: float = 1e-12
    sigma_g2: float = 1e-12
    sigma_w2: float = 1e-12
    sigma_r2: float = 1e-12
    sigma_a2: float = 1e-12
    r_g_min: float = 1.0             # bits/s/Hz
    epsilon: float = 0.1
    mu: float = 0.08
    eta: float = 100.0               # per-element max amplitude, linear
    f_c: float = 3e9
    T: float = 1e-6                  # symbol period, seconds
    L0: float = 1e-3                 # reference path loss at 1 m
    chi_bs_user: float = 3.5
    chi_bs_target: float = 2.3
    chi_ris: float = 2.2
    beta_bs_user: float = 0.0
    beta_ris: float = db_to_linear(3.0)
    pos_alice: tuple[float, float] = (0.0, 0.0)
    pos_ris: tuple[float, float] = (75.0, 30.0)
    pos_bob: tuple[float, float] = (80.0, 10.0)
    pos_grace: tuple[float, float] = (90.0, 0.0)
    pos_willie: tuple[float, float] = (70.0, 5.0)
    targets: tuple[Target, ...] = _PAPER_TARGETS
    xi_1: float = 1e-2               # AO stop on covert-rate increase
    xi_2: float = 1e-4               # transmit penalty stop
    xi_3: float = 1e-4               # reflection penalty stop
    solver_tol: float = 1e-8
    iota_init: tuple[float, float, float, float] = (100.0, 100.0, 100.0, 100.0)
    c_1: float = 1e-2
    c_2: float = 1e-2
    u_init: float = 1e-3
    dinkelbach_max_iter: int = 30
    scheme: str = "w/o-DSS"
    ris_mode: str = "active"
    ao_max_iter: int = 30
    penalty_max_stages: int = 8
    rank_residual_target: float = 1e-7

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.ris_mode not in RIS_MODES:
            raise ValueError(f"ris_mode must be one of {RIS_MODES}, got {self.ris_mode!r}")
        for name in ("M", "N", "L"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not self.targets:
            raise ValueError("at least one target is required")
        for name in ("p_a_max", "p_r_max", "sigma_b2", "sigma_g2", "sigma_w2",
                     "sigma_a2", "eta", "f_c", "T", "L0", "mu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.sigma_r2 < 0:
            raise ValueError("sigma_r2 must be nonnegative")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.ris_mode in ("passive", "none"):
            # passive elements neither amplify nor inject noise
            object.__setattr__(self, "eta", 1.0)
            object.__setattr__(self, "sigma_r2", 0.0)
        object.__setattr__(self, "targets", tuple(self.targets))

    @property
    def Q(self) -> int:
        return len(self.targets)

    @property
    def gamma_th(self) -> float:
        """SINR threshold implied by Grace's rate requirement."""
        return 2.0 ** self.r_g_min - 1.0

    # -- geometry ----------------------------------------------------------

    def distance(self, a: tuple[float, float], b: tuple[float, float]) -> float:
        d = math.hypot(b[0] - a[0], b[1] - a[1])
        if d <= 0:
            raise ValueError("degenerate geometry: two nodes share a position")
        return d

    def angle(self, origin: tuple[float, float], dest: tuple[float, float]) -> float:
        return math.atan2(dest[1] - origin[1], dest[0] - origin[0])

    def replace(self, **kw) -> "SystemConfig":
        return replace(self, **kw)

    # -- serialization -----------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "SystemConfig":
        kw = {}
        for key in ("M", "N", "L"):
            if key in raw:
                kw[key] = int(raw[key])
        dbm_map = {
            "P_a_max_dbm": "p_a_max", "P_r_max_dbm": "p_r_max",
            "sigma_b2_dbm": "sigma_b2", "sigma_g2_dbm": "sigma_g2",
            "sigma_w2_dbm": "sigma_w2", "sigma_r2_dbm": "sigma_r2",
            "sigma_a2_dbm": "sigma_a2",
        }
        for src, dst in dbm_map.items():
            if src in raw:
                kw[dst] = dbm_to_watts(float(raw[src]))
        scalar_map = {
            "R_g_min": "r_g_min", "epsilon": "epsilon", "mu": "mu",
            "f_c_hz": "f_c", "T_s": "T",
            "scheme": "scheme", "ris_mode": "ris_mode",
            "ao_max_iter": "ao_max_iter",
            "penalty_max_stages": "penalty_max_stages",
            "rank_residual_target": "rank_residual_target",
        }
        for src, dst in scalar_map.items():
            if src in raw:
                kw[dst] = raw[src]
        if "eta_sq_db" in raw:
            kw["eta"] = math.sqrt(db_to_linear(float(raw["eta_sq_db"])))
        if "L0_db" in raw:
            kw["L0"] = db_to_linear(float(raw["L0_db"]))
        if "chi" in raw:
            chi = raw["chi"]
            kw["chi_bs_user"] = float(chi.get("bs_user", 3.5))
            kw["chi_bs_target"] = float(chi.get("bs_target", 2.3))
            kw["chi_ris"] = float(chi.get("ris", 2.2))
        if "beta" in raw:
            beta = raw["beta"]
            if "bs_user" in beta:
                kw["beta_bs_user"] = float(beta["bs_user"])
            if "ris" in beta:
                kw["beta_ris"] = float(beta["ris"])
            elif "ris_db" in beta:
                kw["beta_ris"] = db_to_linear(float(beta["ris_db"]))
        if "positions" in raw:
            pos = raw["positions"]
            for node in ("alice", "ris", "bob", "grace", "willie"):
                if node in pos:
                    kw[f"pos_{node}"] = tuple(float(c) for c in pos[node])
        if "targets" in raw:
            kw["targets"] = tuple(
                Target(
                    theta=math.radians(float(t["angle_deg"])),
                    distance=float(t["distance_m"]),
                    velocity=float(t.get("velocity_mps", 0.0)),
                    rcs_var=float(t.get("rcs_var", 1.0)),
                )
                for t in raw["targets"]
            )
        if "tolerances" in raw:
            tol = raw["tolerances"]
            for src, dst in (("xi_1", "xi_1"), ("xi_2", "xi_2"),
                             ("xi_3", "xi_3"), ("solver", "solver_tol")):
                if src in tol:
                    kw[dst] = float(tol[src])
        if "penalty" in raw:
            pen = raw["penalty"]
            if "iota_init" in pen:
                it = pen["iota_init"]
                if np.isscalar(it):
                    it = [it] * 4
                kw["iota_init"] = tuple(float(x) for x in it)
            for src, dst in (("c_1", "c_1"), ("c_2", "c_2")):
                if src in pen:
                    kw[dst] = float(pen[src])
        if "dinkelbach" in raw:
            dk = raw["dinkelbach"]
            if "u_init" in dk:
                kw["u_init"] = float(dk["u_init"])
            if "max_iterations" in dk:
                kw["dinkelbach_max_iter"] = int(dk["max_iterations"])
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "SystemConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "M": self.M, "N": self.N, "L": self.L,
            "P_a_max_dbm": watts_to_dbm(self.p_a_max),
            "P_r_max_dbm": watts_to_dbm(self.p_r_max),
            "sigma_b2_dbm": watts_to_dbm(self.sigma_b2),
            "sigma_g2_dbm": watts_to_dbm(self.sigma_g2),
            "sigma_w2_dbm": watts_to_dbm(self.sigma_w2),
            "sigma_r2_dbm": watts_to_dbm(self.sigma_r2) if self.sigma_r2 > 0 else -400.0,
            "sigma_a2_dbm": watts_to_dbm(self.sigma_a2),
            "R_g_min": self.r_g_min, "epsilon": self.epsilon, "mu": self.mu,
            "eta_sq_db": 20.0 * math.log10(self.eta) if self.eta > 0 else 0.0,
            "f_c_hz": self.f_c, "T_s": self.T,
            "L0_db": 10.0 * math.log10(self.L0),
            "chi": {"bs_user": self.chi_bs_user, "bs_target": self.chi_bs_target,
                    "ris": self.chi_ris},
            "beta": {"bs_user": self.beta_bs_user, "ris": self.beta_ris},
            "positions": {"alice": list(self.pos_alice), "ris": list(self.pos_ris),
                          "bob": list(self.pos_bob), "grace": list(self.pos_grace),
                          "willie": list(self.pos_willie)},
            "targets": [{"angle_deg": math.degrees(t.theta),
                         "distance_m": t.distance,
                         "velocity_mps": t.velocity,
                         "rcs_var": t.rcs_var} for t in self.targets],
            "tolerances": {"xi_1": self.xi_1, "xi_2": self.xi_2,
                           "xi_3": self.xi_3, "solver": self.solver_tol},
            "penalty": {"iota_init": list(self.iota_init),
                        "c_1": self.c_1, "c_2": self.c_2},
            "dinkelbach": {"u_init": self.u_init,
                           "max_iterations": self.dinkelbach_max_iter},
            "scheme": self.scheme, "ris_mode": self.ris_mode,
            "ao_max_iter": self.ao_max_iter,
            "penalty_max_stages": self.penalty_max_stages,
            "rank_residual_target": self.rank_residual_target,
        }


def paper_config(**overrides) -> SystemConfig:
    """Full-scale configuration (M=8, N=16, L=1024, three targets)."""
    return SystemConfig(**overrides)


def desk_config(**overrides) -> SystemConfig:
    """Reduced-scale configuration used by the test and acceptance suites.

    M=4, N=8, L=16, two targets.  Two knobs depart from the full-scale
    defaults so the mixed-unit CRB trace stays O(10) at this size: the symbol
    period is stretched to 4 ms (the Doppler rows otherwise carry ~1e6x less
    weight than the angle rows) and the sensing-receiver noise floor drops to
    -110 dBm (the short 16-symbol interval otherwise starves the echo).
    ``mu`` defaults to a level feasible across reflection-factor draws.
    """
    kw = dict(
        M=4, N=8, L=16,
        targets=_PAPER_TARGETS[:2],
        T=4e-3,
        sigma_a2=1e-14,
        mu=12.0,
    )
    kw.update(overrides)
    return SystemConfig(**kw)


@dataclass(frozen=True)
class ChannelSet:
    """One realization of every communication and sensing channel.

    Direct BS-user channels ``h_a*`` have length M, RIS-user channels ``h_r*``
    length N, ``G`` is the N x M BS-RIS matrix, and ``h_targets`` stacks the
    LoS BS-target channels as rows (Q x M).
    """

    h_ag: np.ndarray
    h_ab: np.ndarray
    h_aw: np.ndarray
    h_rg: np.ndarray
    h_rb: np.ndarray
    h_rw: np.ndarray
    G: np.ndarray
    h_targets: np.ndarray
    seed: int

    def direct(self, k: str) -> np.ndarray:
        return {"g": self.h_ag, "b": self.h_ab, "w": self.h_aw}[k]

    def reflected(self, k: str) -> np.ndarray:
        return {"g": self.h_rg, "b": self.h_rb, "w": self.h_rw}[k]

    def target_matrix(self) -> np.ndarray:
        """Steering matrix A with one column per target (M x Q)."""
        return self.h_targets.T.copy()


def _rng(seed: int, domain: int) -> np.random.Generator:
    # independent named streams so channels/targets never share RNG state
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(domain,)))


def _rician_vector(rng, size, gain, beta, theta):
    los = steering_vector(theta, size)
    nlos = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)
    mix = math.sqrt(beta / (1.0 + beta)) * los + math.sqrt(1.0 / (1.0 + beta)) * nlos
    return math.sqrt(gain) * mix


def sample_channels(config: SystemConfig, seed: int) -> ChannelSet:
    """Draw one channel realization; bit-identical for identical (config, seed).

    The draw order is fixed (G, then direct links, then RIS links) so that
    different ``ris_mode`` settings of an otherwise identical config share the
    same direct-channel realization; 'none' mode zeroes the RIS channels after
    drawing them.
    """
    rng = _rng(seed, 0)
    a, r = config.pos_alice, config.pos_ris

    d_ar = config.distance(a, r)
    gain_ar = path_loss(d_ar, config.chi_ris, config.L0)
    theta_ar = config.angle(a, r)   # departure at the BS
    theta_ra = config.angle(r, a)   # arrival at the RIS
    los_G = np.outer(steering_vector(theta_ra, config.N),
                     steering_vector(theta_ar, config.M).conj())
    nlos_G = (rng.standard_normal((config.N, config.M))
              + 1j * rng.standard_normal((config.N, config.M))) / math.sqrt(2.0)
    b_ar = config.beta_ris
    G = math.sqrt(gain_ar) * (math.sqrt(b_ar / (1.0 + b_ar)) * los_G
                              + math.sqrt(1.0 / (1.0 + b_ar)) * nlos_G)

    users = {"g": config.pos_grace, "b": config.pos_bob, "w": config.pos_willie}
    direct = {}
    for k, pos in users.items():
        gain = path_loss(config.distance(a, pos), config.chi_bs_user, config.L0)
        direct[k] = _rician_vector(rng, config.M, gain, config.beta_bs_user,
                                   config.angle(a, pos))
    reflected = {}
    for k, pos in users.items():
        gain = path_loss(config.distance(r, pos), config.chi_ris, config.L0)
        reflected[k] = _rician_vector(rng, config.N, gain, config.beta_ris,
                                      config.angle(r, pos))

    if config.ris_mode == "none":
        G = np.zeros_like(G)
        reflected = {k: np.zeros_like(v) for k, v in reflected.items()}

    # LoS target channels: amplitude gain = sqrt(power path loss)
    h_targets = np.stack([
        math.sqrt(path_loss(t.distance, config.chi_bs_target, config.L0))
        * steering_vector(t.theta, config.M)
        for t in config.targets
    ])

    return ChannelSet(
        h_ag=direct["g"], h_ab=direct["b"], h_aw=direct["w"],
        h_rg=reflected["g"], h_rb=reflected["b"], h_rw=reflected["w"],
        G=G, h_targets=h_targets, seed=seed,
    )


def sample_targets(config: SystemConfig, seed: int) -> tuple[Target, ...]:
    """Return the configured targets with reflection factors drawn for this seed."""
    rng = _rng(seed, 1)
    out = []
    for t in config.targets:
        alpha = math.sqrt(t.rcs_var / 2.0) * (rng.standard_normal()
                                              + 1j * rng.standard_normal())
        out.append(replace(t, alpha=complex(alpha)))
    return tuple(out)
