"""Measurement protocol simulations: indirect FID, spectra, polarization.

The FID protocols prepare carbon coherence with a microwave sequence on the
m_S = 0 <-> -1 transition, let it precess, convert it back to an electron
population and read that population out.  Readout signals follow the
convention in which ideal preparation at tau = 0 yields 1/2 (half the m_S = 0
population), so simulated traces line up with the closed-form two-cosine
expressions without rescaling.

Protocols that visit other electron manifolds run in the 6-level
electron (+1, 0, -1) x 13C space at fixed m_N = +1.  Free evolution there is
taken in the interaction frame of the electron energies: manifold-diagonal
dynamics are exact, while phases of inter-manifold coherences (which
time-average out of every measured population) are dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from .errors import NoConvergence, NonPositiveInput, NonuniformGrid
from .fidelity import ideal_uc_unitary, rho0_state, rot_half, u90_gate
from .propagation import PulseSequence, sequence_propagator
from .signals import FidTrace, Spectrum
from .spin_model import (
    E2,
    E3,
    SX2,
    SY2,
    SystemParams,
    TWO_PI,
    build_hamiltonian_subspace,
    build_hamiltonian_subspace_plus,
    nuclear_block_hamiltonians,
    nuclear_frequencies,
)

DEFAULT_UC_RECORD_US = 200.0
DEFAULT_UC_PRIME_RECORD_US = 300.0
DEFAULT_STEP_US = 1.0

# 6-level basis order: (+1,up), (+1,down), (0,up), (0,down), (-1,up), (-1,down)
_SWAP_01 = np.zeros((6, 6), dtype=complex)
for _i in range(2):
    _SWAP_01[_i, _i + 2] = 1.0
    _SWAP_01[_i + 2, _i] = 1.0
_SWAP_01[4, 4] = _SWAP_01[5, 5] = 1.0


def default_tau_grid(record_us: float, step_us: float = DEFAULT_STEP_US) -> np.ndarray:
    return np.arange(0.0, record_us, step_us)


def _validate_grid(tau_grid) -> np.ndarray:
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size == 0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be non-empty and strictly increasing")
    return tau


def analytic_fid(kind: str, params: SystemParams, tau_grid) -> FidTrace:
    """Closed-form FID signals: mean 1/4 plus two cosines at the pair of
    transition frequencies probed by the protocol."""
    tau = _validate_grid(tau_grid)
    nu_c, nu_m, nu_p = nuclear_frequencies(params)
    if kind == "uc":
        pair = (nu_c, nu_m)
    elif kind == "uc_prime":
        pair = (nu_m, nu_p)
    else:
        raise ValueError("kind must be 'uc' or 'uc_prime'")
    signal = 0.25 + (np.cos(TWO_PI * pair[0] * tau) + np.cos(TWO_PI * pair[1] * tau)) / 8.0
    return FidTrace(tau, signal, "analytic")


def _batched_propagators(matrix: np.ndarray, times: np.ndarray) -> np.ndarray:
    """exp(-i 2 pi H t) for every t, shape (T, d, d)."""
    w, v = np.linalg.eigh(matrix)
    phases = np.exp(-1j * TWO_PI * np.outer(times, w))
    return (v[None, :, :] * phases[:, None, :]) @ v.conj().T


def _free_propagators_6(params: SystemParams, times: np.ndarray) -> np.ndarray:
    """Blockwise free evolution of the 6-level space (interaction frame)."""
    h_plus, h_zero, h_minus = nuclear_block_hamiltonians(params)
    out = np.zeros((times.size, 6, 6), dtype=complex)
    out[:, 0:2, 0:2] = _batched_propagators(h_plus, times)
    out[:, 2:4, 2:4] = _batched_propagators(h_zero, times)
    out[:, 4:6, 4:6] = _batched_propagators(h_minus, times)
    return out


def _embed_lower(u4: np.ndarray) -> np.ndarray:
    """4-dim operator on {|0>, |-1>} x C -> 6-dim (identity on m_S = +1)."""
    u6 = np.eye(6, dtype=complex)
    u6[2:6, 2:6] = u4
    return u6


_UPPER_PERM = np.array([2, 3, 0, 1])  # {|0>,|+1>}-manifold basis -> 6-dim indices


def _embed_upper(u4: np.ndarray) -> np.ndarray:
    """4-dim operator on {|0>, |+1>} x C (basis |0,up>,|0,down>,|+1,up>,|+1,down>)
    -> 6-dim (identity on m_S = -1)."""
    u6 = np.eye(6, dtype=complex)
    for i in range(4):
        for j in range(4):
            u6[_UPPER_PERM[i], _UPPER_PERM[j]] = u4[i, j]
    return u6


def _prep_unitary(params: SystemParams, seq: PulseSequence | None, dagger: bool) -> np.ndarray:
    if seq is None:
        u = ideal_uc_unitary(params)
        return u.conj().T if dagger else u
    return sequence_propagator(build_hamiltonian_subspace(params), seq)


def fid_uc(
    params: SystemParams,
    seq_uc: PulseSequence | None = None,
    seq_uc_dag: PulseSequence | None = None,
    tau_grid=None,
) -> FidTrace:
    """FID of carbon coherence in the m_S = {0, -1} manifolds.

    Pipeline per delay tau: prepare from rho0 with seq_uc (ideal coherence
    generator when None), precess freely, convert back with seq_uc_dag,
    report half the m_S = 0 population.  Spectral peaks sit at nu_C and
    nu_minus.
    """
    tau = _validate_grid(tau_grid if tau_grid is not None else default_tau_grid(DEFAULT_UC_RECORD_US))
    h = build_hamiltonian_subspace(params)
    u_prep = _prep_unitary(params, seq_uc, dagger=False)
    u_read = _prep_unitary(params, seq_uc_dag, dagger=True)
    rho1 = u_prep @ rho0_state().matrix @ u_prep.conj().T
    frees = _batched_propagators(h.matrix, tau)
    rho_tau = frees @ rho1 @ frees.conj().transpose(0, 2, 1)
    rho_f = u_read[None] @ rho_tau @ u_read.conj().T[None]
    signal = (rho_f[:, 0, 0] + rho_f[:, 1, 1]).real / 2.0
    return FidTrace(tau, np.clip(signal, 0.0, 1.0), "uc_readout")


def fid_uc_prime(
    params: SystemParams,
    seq_uc: PulseSequence | None = None,
    seq_uc_dag: PulseSequence | None = None,
    tau_grid=None,
) -> FidTrace:
    """FID of carbon coherence in the m_S = {-1, +1} manifolds.

    The prepared coherence is sandwiched between ideal 180-degree swaps of
    the m_S = 0 and +1 populations, so the free precession probes nu_minus
    and nu_plus.
    """
    tau = _validate_grid(
        tau_grid if tau_grid is not None else default_tau_grid(DEFAULT_UC_PRIME_RECORD_US)
    )
    u_prep = _prep_unitary(params, seq_uc, dagger=False)
    u_read = _prep_unitary(params, seq_uc_dag, dagger=True)
    rho1 = u_prep @ rho0_state().matrix @ u_prep.conj().T
    rho6 = np.zeros((6, 6), dtype=complex)
    rho6[2:6, 2:6] = rho1
    rho6 = _SWAP_01 @ rho6 @ _SWAP_01
    frees = _free_propagators_6(params, tau)
    rho_tau = frees @ rho6 @ frees.conj().transpose(0, 2, 1)
    rho_back = _SWAP_01[None] @ rho_tau @ _SWAP_01[None]
    rho4 = rho_back[:, 2:6, 2:6]
    rho_f = u_read[None] @ rho4 @ u_read.conj().T[None]
    signal = (rho_f[:, 0, 0] + rho_f[:, 1, 1]).real / 2.0
    return FidTrace(tau, np.clip(signal, 0.0, 1.0), "uc_prime_readout")


_U90_TAGS = {0: "u90_ms0", -1: "u90_ms-1", +1: "u90_ms+1"}


def _ideal_180y_lower() -> np.ndarray:
    """Instantaneous 180-degree y-rotation of the electron pseudo-spin on the
    {|0>, |-1>} manifold, nuclear state untouched."""
    return np.kron(rot_half(SY2, math.pi), E2)


def fid_u90(
    params: SystemParams,
    subspace: int,
    seq_u90: PulseSequence | None = None,
    seq_ut: PulseSequence | None = None,
    tau_grid=None,
    initial_polarization: float = 1.0,
) -> FidTrace:
    """Standard carbon FID starting from a z-polarized 13C spin.

    subspace 0: excite with seq_u90 (ideal pi/2 rotation when None), wait,
    read out.  subspace -1: seq_u90 is the 180-degree transfer pulse applied
    before and after the wait (ideal when None); the tilted m_S = -1 axis
    itself generates the coherence.  subspace +1: excite, ideal swaps to
    m_S = +1 around the wait.

    The readout is seq_ut applied on the {|0>, |+1>} manifold followed by the
    m_S = 0 population; when None an ideal inverse rotation plus carbon-state
    readout (population of |0,up>) is used.
    """
    if subspace not in _U90_TAGS:
        raise ValueError("subspace must be 0, -1 or +1")
    if not -1.0 <= initial_polarization <= 1.0:
        raise ValueError("initial polarization must lie in [-1, 1]")
    tau = _validate_grid(tau_grid if tau_grid is not None else default_tau_grid(DEFAULT_UC_RECORD_US))
    p = initial_polarization
    rho6 = np.zeros((6, 6), dtype=complex)
    rho6[2, 2] = (1.0 + p) / 2.0
    rho6[3, 3] = (1.0 - p) / 2.0

    h_lower = build_hamiltonian_subspace(params)

    if subspace == -1:
        if seq_u90 is None:
            transfer = _embed_lower(_ideal_180y_lower())
        else:
            transfer = _embed_lower(sequence_propagator(h_lower, seq_u90))
        pre, post = transfer, transfer
    else:
        if seq_u90 is None:
            excite = _embed_lower(u90_gate())
        else:
            excite = _embed_lower(sequence_propagator(h_lower, seq_u90))
        if subspace == +1:
            pre = _SWAP_01 @ excite
            post = _SWAP_01
        else:
            pre, post = excite, np.eye(6, dtype=complex)

    rho6 = pre @ rho6 @ pre.conj().T
    frees = _free_propagators_6(params, tau)
    rho_tau = frees @ rho6 @ frees.conj().transpose(0, 2, 1)
    rho_tau = post[None] @ rho_tau @ post.conj().T[None]

    if seq_ut is None:
        read = np.kron(E3, rot_half(SX2, math.pi / 2.0).conj().T)
        rho_f = read[None] @ rho_tau @ read.conj().T[None]
        signal = rho_f[:, 2, 2].real
    else:
        h_upper = build_hamiltonian_subspace_plus(params)
        read = _embed_upper(sequence_propagator(h_upper, seq_ut))
        rho_f = read[None] @ rho_tau @ read.conj().T[None]
        signal = (rho_f[:, 2, 2] + rho_f[:, 3, 3]).real
    return FidTrace(tau, np.clip(signal, 0.0, 1.0), _U90_TAGS[subspace])


def spectrum_from_fid(
    fid: FidTrace,
    window: str = "hann",
    zerofill_factor: int = 4,
    exp_rate: float | None = None,
) -> Spectrum:
    """Magnitude spectrum of a FID on a uniform grid.

    The mean is subtracted first (the constant offsets of the readout
    protocols would otherwise bury the lowest line under the zero-frequency
    peak), then the window is applied, the record zero-filled and the
    discrete Fourier transform taken.  Frequency resolution is the inverse
    of the zero-filled record length.
    """
    tau = fid.tau_us
    if tau.size < 2:
        raise NonuniformGrid("need at least two samples")
    steps = np.diff(tau)
    dt = steps[0]
    if np.any(np.abs(steps - dt) > 1e-9 * dt):
        raise NonuniformGrid("tau grid must be uniformly spaced")
    if zerofill_factor < 1:
        raise ValueError("zerofill_factor must be at least 1")
    y = fid.signal - fid.signal.mean()
    n = y.size
    if window == "none":
        w = np.ones(n)
    elif window == "hann":
        w = np.hanning(n)
    elif window == "exponential":
        if exp_rate is None or exp_rate < 0:
            raise ValueError("exponential window needs a non-negative exp_rate (1/us)")
        w = np.exp(-exp_rate * (tau - tau[0]))
    else:
        raise ValueError("window must be 'none', 'hann' or 'exponential'")
    n_fft = int(n * zerofill_factor)
    amp = np.abs(np.fft.rfft(y * w, n=n_fft))
    freq = np.fft.rfftfreq(n_fft, d=dt)
    meta = {
        "window": window,
        "zerofill_factor": int(zerofill_factor),
        "record_length_us": float(n * dt),
        "dt_us": float(dt),
        "n_samples": int(n),
        "protocol": fid.protocol,
    }
    if exp_rate is not None:
        meta["exp_rate_per_us"] = float(exp_rate)
    return Spectrum(freq, amp, meta)


@dataclass(frozen=True)
class PolarizationModel:
    """Three-term pumping model p(d) = c0 - c1 exp(-(alpha+beta) d)
    + c2 exp(-2 gamma d) for the nuclear polarization after a laser pulse of
    duration d (microseconds)."""

    c0: float
    c1: float
    c2: float
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("pumping rates must be non-negative")

    @property
    def pump_rate(self) -> float:
        """Combined fast rate alpha + beta (only the sum is identifiable)."""
        return self.alpha + self.beta


def paper_polarization_model() -> PolarizationModel:
    """The fitted pumping model used as the default for the polarize command."""
    return PolarizationModel(c0=0.31, c1=0.51, c2=0.50, alpha=1.10, beta=0.41, gamma=0.022)


def polarization_curve(model: PolarizationModel, d_grid) -> np.ndarray:
    d = np.asarray(d_grid, dtype=float)
    return model.c0 - model.c1 * np.exp(-model.pump_rate * d) + model.c2 * np.exp(-2.0 * model.gamma * d)


def polarization_curve_max(
    model: PolarizationModel, d_lo: float = 0.0, d_hi: float = 50.0
) -> tuple[float, float]:
    """Maximizer and maximum of the polarization curve on [d_lo, d_hi]."""
    grid = np.linspace(d_lo, d_hi, 2048)
    values = polarization_curve(model, grid)
    i = int(np.argmax(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(
        lambda d: -polarization_curve(model, d), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    d_star = float(res.x)
    candidates = [(float(polarization_curve(model, d)), float(d)) for d in (d_lo, d_hi, d_star)]
    p_star, d_best = max(candidates)
    return d_best, p_star


def _polarization_residual(x, d, p):
    c0, c1, c2, rate, gamma = x
    return c0 - c1 * np.exp(-rate * d) + c2 * np.exp(-2.0 * gamma * d) - p


def fit_polarization(data) -> PolarizationModel:
    """Least-squares fit of the three-term pumping model to (d, p) samples.

    The model is linear in the amplitudes given the rates, so a coarse grid
    over (rate, gamma) with linear solves picks the starting point, followed
    by a damped nonlinear least-squares polish with non-negative rates.  Only
    the sum alpha + beta is identifiable; it is reported in `alpha` with
    `beta` set to zero.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 6:
        raise ValueError("need at least 6 (d, p) samples")
    d, p = arr[:, 0], arr[:, 1]
    if np.any(d < 0) or d.max() <= d.min():
        raise ValueError("laser durations must be non-negative and span a range")

    best = None
    for rate in np.geomspace(1e-2, 30.0, 25):
        for gamma in np.geomspace(1e-4, 3.0, 25):
            design = np.column_stack([np.ones_like(d), -np.exp(-rate * d), np.exp(-2.0 * gamma * d)])
            coef, *_ = np.linalg.lstsq(design, p, rcond=None)
            resid = design @ coef - p
            score = float(resid @ resid)
            if best is None or score < best[0]:
                best = (score, np.array([*coef, rate, gamma]))
    x0 = best[1]
    result = least_squares(
        _polarization_residual,
        x0,
        args=(d, p),
        bounds=([-np.inf, -np.inf, -np.inf, 0.0, 0.0], np.inf),
        xtol=1e-14,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=2000,
    )
    if not result.success or not np.all(np.isfinite(result.x)):
        raise NoConvergence(f"polarization fit did not converge: {result.message}")
    c0, c1, c2, rate, gamma = result.x
    # the two exponentials can trade roles with negated amplitudes; pin the
    # labeling so the c1 term carries the faster rate
    if rate < 2.0 * gamma:
        c1, c2 = -c2, -c1
        rate, gamma = 2.0 * gamma, rate / 2.0
    return PolarizationModel(
        c0=float(c0), c1=float(c1), c2=float(c2), alpha=float(rate), beta=0.0, gamma=float(gamma)
    )


def fit_fid_amplitude(data, nu_mhz: float) -> tuple[float, float, float]:
    """Fit a + b sin(2 pi nu tau + c) with the frequency held fixed.

    Linear in (a, b cos c, b sin c); b is reported non-negative with c
    adjusted accordingly.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 5:
        raise ValueError("need at least 5 (tau, P) samples")
    if nu_mhz <= 0:
        raise NonPositiveInput("frequency must be positive")
    tau, y = arr[:, 0], arr[:, 1]
    phase = TWO_PI * nu_mhz * tau
    design = np.column_stack([np.ones_like(tau), np.sin(phase), np.cos(phase)])
    if np.linalg.matrix_rank(design) < 3:
        raise NoConvergence("design matrix is rank deficient; cannot separate amplitude and phase")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a, u, v = coef
    b = math.hypot(u, v)
    c = math.atan2(v, u) if b > 1e-15 else 0.0
    return float(a), float(b), float(c)


@dataclass(frozen=True)
class FidelityEstimates:
    """Amplitude-ratio fidelity estimates; `unphysical` flags any value > 1."""

    f_180: float
    f_u90: float
    f_uc: float
    unphysical: bool


def estimate_experimental_fidelities(
    b0: float, b1: float, bm1: float, f: float
) -> FidelityEstimates:
    """Fidelities from fitted FID amplitudes (b0, b1, bm1) of the three
    subspace protocols and the spectrum scale factor f.

    F_180 = sqrt(b1/b0), F_U90 = sqrt(b1/bm1), F_Uc = sqrt(f)/F_180.
    """
    for name, value in (("b0", b0), ("b1", b1), ("bm1", bm1), ("f", f)):
        if value <= 0:
            raise NonPositiveInput(f"{name} must be positive")
    f_180 = math.sqrt(b1 / b0)
    f_u90 = math.sqrt(b1 / bm1)
    f_uc = math.sqrt(f) / f_180
    return FidelityEstimates(
        f_180=f_180,
        f_u90=f_u90,
        f_uc=f_uc,
        unphysical=any(v > 1.0 for v in (f_180, f_u90, f_uc)),
    )


def ideal_reset(rho4: np.ndarray) -> np.ndarray:
    """Laser reset: electron projected to |0> with the carbon state kept."""
    carbon = rho4[0:2, 0:2] + rho4[2:4, 2:4]
    out = np.zeros_like(rho4)
    out[0:2, 0:2] = carbon
    return out


@dataclass(frozen=True)
class PolarizationOutcome:
    """Result of one polarizing-sequence simulation."""

    polarization: float
    peak_ratio: float


def polarization_protocol_sim(
    params: SystemParams,
    seq_up,
    reset_model=ideal_reset,
) -> PolarizationOutcome:
    """Apply the polarizing sequence to rho0, reset the electron, and report
    the carbon polarization p = P(0,up) - P(0,down).

    seq_up is a PulseSequence or a ready-made 4x4 unitary.  peak_ratio is the
    |0,up> population relative to its value in rho0 (the height ratio of the
    polarized to unpolarized reference line); it is evaluated before the
    reset.
    """
    if isinstance(seq_up, PulseSequence):
        h = build_hamiltonian_subspace(params)
        u = sequence_propagator(h, seq_up)
    else:
        u = np.asarray(seq_up, dtype=complex)
    rho = u @ rho0_state().matrix @ u.conj().T
    ratio = float(rho[0, 0].real / 0.5)
    after = reset_model(rho)
    p = float((after[0, 0] - after[1, 1]).real)
    return PolarizationOutcome(polarization=p, peak_ratio=ratio)
