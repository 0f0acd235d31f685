"""Exact unitary propagation of states under pulse sequences.

A sequence alternates free-precession delays and constant-amplitude microwave
pulses on the electron pseudo-spin.  All propagators are built by Hermitian
eigendecomposition, U = V exp(-i 2 pi w t) V^dag, which is exact at any
duration; the factor 2*pi enters here and nowhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .spin_model import Hamiltonian, PSEUDO_SX, PSEUDO_SY, PSEUDO_SZ, TWO_PI


@dataclass(frozen=True)
class Delay:
    """Free-precession segment of duration `us` microseconds."""

    us: float


@dataclass(frozen=True)
class Pulse:
    """Microwave pulse of duration `us` and carrier phase `phase_rad`."""

    us: float
    phase_rad: float


@dataclass(frozen=True)
class PulseSequence:
    """Alternating delays and pulses at a fixed Rabi frequency (MHz).

    Segment layout is free: builders produce the canonical
    delay-pulse-delay-pulse order with zero-length segments permitted.
    Phases are normalized into [0, 2pi) on construction.
    """

    rabi_mhz: float
    segments: tuple

    def __post_init__(self):
        if self.rabi_mhz < 0:
            raise ValueError("Rabi frequency must be non-negative")
        normalized = []
        for seg in self.segments:
            if seg.us < 0:
                raise ValueError("segment durations must be non-negative")
            if isinstance(seg, Pulse):
                seg = Pulse(seg.us, seg.phase_rad % TWO_PI)
            normalized.append(seg)
        object.__setattr__(self, "segments", tuple(normalized))

    @property
    def total_duration_us(self) -> float:
        return float(sum(seg.us for seg in self.segments))

    def delays(self) -> list[Delay]:
        return [s for s in self.segments if isinstance(s, Delay)]

    def pulses(self) -> list[Pulse]:
        return [s for s in self.segments if isinstance(s, Pulse)]

    @classmethod
    def from_arrays(cls, rabi_mhz, taus, ts, phis) -> "PulseSequence":
        """Canonical layout: delay tau_k before pulse (t_k, phi_k), k = 1..n."""
        if not (len(taus) == len(ts) == len(phis)):
            raise ValueError("taus, ts, phis must have equal length")
        segments = []
        for tau, t, phi in zip(taus, ts, phis):
            segments.append(Delay(float(tau)))
            segments.append(Pulse(float(t), float(phi)))
        return cls(float(rabi_mhz), tuple(segments))

    def to_json_dict(self) -> dict:
        segs = []
        for seg in self.segments:
            if isinstance(seg, Delay):
                segs.append({"kind": "delay", "us": seg.us})
            else:
                segs.append({"kind": "pulse", "us": seg.us, "phase_rad": seg.phase_rad})
        return {"rabi_mhz": self.rabi_mhz, "segments": segs}

    @classmethod
    def from_json_dict(cls, data: dict) -> "PulseSequence":
        segments = []
        for seg in data["segments"]:
            if seg["kind"] == "delay":
                segments.append(Delay(seg["us"]))
            elif seg["kind"] == "pulse":
                segments.append(Pulse(seg["us"], seg["phase_rad"]))
            else:
                raise ValueError(f"unknown segment kind {seg['kind']!r}")
        return cls(data["rabi_mhz"], tuple(segments))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PulseSequence":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True, eq=False)
class DensityState:
    """Density matrix: trace one, Hermitian, positive semidefinite."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-10:
            raise ValueError("density matrix must have unit trace")
        if np.linalg.norm(m - m.conj().T) > 1e-10 * max(np.linalg.norm(m), 1.0):
            raise ValueError("density matrix must be Hermitian")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise ValueError("density matrix must be positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, ket) -> "DensityState":
        v = np.asarray(ket, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)


@dataclass(frozen=True)
class BlochVector:
    """Bloch-sphere components of one spin-1/2 subsystem."""

    x: float
    y: float
    z: float
    subsystem: str

    def __post_init__(self):
        if self.subsystem not in ("electron", "carbon"):
            raise ValueError("subsystem must be 'electron' or 'carbon'")
        if self.x**2 + self.y**2 + self.z**2 > 1.0 + 1e-9:
            raise ValueError("Bloch vector norm exceeds 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def expm_herm(matrix: np.ndarray, t_us: float) -> np.ndarray:
    """exp(-i 2 pi H t) for Hermitian H (MHz) via eigendecomposition."""
    w, v = np.linalg.eigh(matrix)
    return (v * np.exp(-1j * TWO_PI * w * t_us)) @ v.conj().T


def free_propagator(h: Hamiltonian, tau_us: float) -> np.ndarray:
    """Propagator of free precession for tau_us microseconds."""
    if tau_us < 0:
        raise ValueError("delay must be non-negative")
    return expm_herm(h.matrix, tau_us)


def drive_operator(rabi_mhz: float, phase_rad: float) -> np.ndarray:
    """Microwave drive rabi * (s_x cos(phi) + s_y sin(phi)) on the 4-dim space."""
    return rabi_mhz * (PSEUDO_SX * math.cos(phase_rad) + PSEUDO_SY * math.sin(phase_rad))


def pulse_propagator(
    h: Hamiltonian,
    rabi_mhz: float,
    phase_rad: float,
    t_us: float,
    detuning_mhz: float = 0.0,
) -> np.ndarray:
    """Propagator of a rectangular pulse: exp(-i 2 pi (H + drive) t).

    detuning_mhz is the carrier offset below the transition frequency; it adds
    -detuning * s_z to the rotating-frame generator and defaults to zero
    (resonant carrier).
    """
    if h.dim != 4:
        raise DimensionMismatch("pulse propagation requires the 4-dim subspace Hamiltonian")
    if t_us < 0:
        raise ValueError("pulse duration must be non-negative")
    gen = h.matrix + drive_operator(rabi_mhz, phase_rad)
    if detuning_mhz != 0.0:
        gen = gen - detuning_mhz * PSEUDO_SZ
    return expm_herm(gen, t_us)


def sequence_propagator(h: Hamiltonian, seq: PulseSequence) -> np.ndarray:
    """Time-ordered product of the segment propagators (rightmost acts first)."""
    u = np.eye(h.dim, dtype=complex)
    for seg in seq.segments:
        if isinstance(seg, Delay):
            u = free_propagator(h, seg.us) @ u
        else:
            u = pulse_propagator(h, seq.rabi_mhz, seg.phase_rad, seg.us) @ u
    return u


def evolve(rho: DensityState, u: np.ndarray) -> DensityState:
    """Unitary conjugation rho -> U rho U^dag."""
    if u.shape != (rho.dim, rho.dim):
        raise DimensionMismatch(f"propagator shape {u.shape} does not match state dim {rho.dim}")
    return DensityState(u @ rho.matrix @ u.conj().T)


def _bloch_from_2x2(m: np.ndarray, subsystem: str) -> BlochVector:
    x = 2.0 * m[0, 1].real
    y = 2.0 * m[1, 0].imag
    z = (m[0, 0] - m[1, 1]).real
    return BlochVector(float(x), float(y), float(z), subsystem)


def bloch_vector(rho: DensityState, subsystem: str) -> BlochVector:
    """Bloch components of the electron pseudo-spin or the 13C spin.

    The electron z-component is the population difference P(|0>) - P(|-1>),
    i.e. |0> is pseudo-spin up.
    """
    if rho.dim != 4:
        raise DimensionMismatch("bloch_vector expects a 4-dim state")
    m = rho.matrix
    if subsystem == "carbon":
        sub = m[0:2, 0:2] + m[2:4, 2:4]
    elif subsystem == "electron":
        sub = np.array(
            [
                [m[0, 0] + m[1, 1], m[0, 2] + m[1, 3]],
                [m[2, 0] + m[3, 1], m[2, 2] + m[3, 3]],
            ]
        )
    else:
        raise ValueError("subsystem must be 'electron' or 'carbon'")
    return _bloch_from_2x2(sub, subsystem)


def trajectory(h: Hamiltonian, seq: PulseSequence, rho0: DensityState, dt_us: float = 0.01):
    """Bloch-sphere trajectory sampled every dt_us within each segment plus at
    every segment boundary.

    Returns a list of (time_us, electron BlochVector, carbon BlochVector).
    The default step resolves the fastest nuclear precession comfortably.
    """
    if dt_us <= 0:
        raise ValueError("dt must be positive")
    samples = []

    def record(t, state):
        samples.append((float(t), bloch_vector(state, "electron"), bloch_vector(state, "carbon")))

    state = rho0
    t0 = 0.0
    record(t0, state)
    for seg in seq.segments:
        if isinstance(seg, Delay):
            gen = h.matrix
        else:
            gen = h.matrix + drive_operator(seq.rabi_mhz, seg.phase_rad)
        w, v = np.linalg.eigh(gen)
        n_steps = int(math.floor(seg.us / dt_us + 1e-12))
        rel_times = [dt_us * k for k in range(1, n_steps + 1)]
        if not rel_times or rel_times[-1] < seg.us:
            rel_times.append(seg.us)
        for rel in rel_times:
            u = (v * np.exp(-1j * TWO_PI * w * rel)) @ v.conj().T
            record(t0 + rel, evolve(state, u))
        u_full = (v * np.exp(-1j * TWO_PI * w * seg.us)) @ v.conj().T
        state = evolve(state, u_full)
        t0 += seg.us
    return samples
