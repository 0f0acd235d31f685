"""Sampled signals: FID traces and magnitude spectra, with CSV/JSON round trips.

CSV files are the plotting interface: one header row, then `repr(float)`
columns so that reading a file back reproduces the arrays bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadGrid


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FidTrace:
    """Free-induction-decay record: populations sampled on a delay grid."""

    tau_us: np.ndarray
    signal: np.ndarray
    protocol: str = "analytic"

    def __post_init__(self):
        tau = _frozen_array(self.tau_us)
        sig = _frozen_array(self.signal)
        if tau.ndim != 1 or tau.size == 0 or np.any(np.diff(tau) <= 0):
            raise BadGrid("tau grid must be non-empty and strictly increasing")
        if sig.shape != tau.shape:
            raise BadGrid("signal and tau grid must have the same length")
        if np.any(sig < -1e-9) or np.any(sig > 1 + 1e-9):
            raise ValueError("signal values must lie in [0, 1]")
        object.__setattr__(self, "tau_us", tau)
        object.__setattr__(self, "signal", sig)

    def to_csv(self, path) -> None:
        write_csv(path, ("tau_us", "signal"), (self.tau_us, self.signal))

    @classmethod
    def from_csv(cls, path, protocol: str = "analytic") -> "FidTrace":
        cols = read_csv(path, ("tau_us", "signal"))
        return cls(cols[0], cols[1], protocol)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "tau_us": [float(x) for x in self.tau_us],
            "signal": [float(x) for x in self.signal],
        }


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Magnitude spectrum on a frequency grid, with processing metadata."""

    freq_mhz: np.ndarray
    amplitude: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        freq = _frozen_array(self.freq_mhz)
        amp = _frozen_array(self.amplitude)
        if freq.ndim != 1 or freq.size == 0 or np.any(np.diff(freq) <= 0):
            raise BadGrid("frequency grid must be non-empty and strictly increasing")
        if amp.shape != freq.shape:
            raise BadGrid("amplitude and frequency grid must have the same length")
        object.__setattr__(self, "freq_mhz", freq)
        object.__setattr__(self, "amplitude", amp)

    @property
    def resolution_mhz(self) -> float:
        return float(self.freq_mhz[1] - self.freq_mhz[0]) if self.freq_mhz.size > 1 else 0.0

    def to_csv(self, path) -> None:
        write_csv(path, ("freq_mhz", "amplitude"), (self.freq_mhz, self.amplitude))

    @classmethod
    def from_csv(cls, path, metadata: dict | None = None) -> "Spectrum":
        cols = read_csv(path, ("freq_mhz", "amplitude"))
        return cls(cols[0], cols[1], metadata or {})

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "freq_mhz": [float(x) for x in self.freq_mhz],
            "amplitude": [float(x) for x in self.amplitude],
        }


def write_csv(path, header, columns) -> None:
    """Write columns of floats with a header row; repr() keeps full precision."""
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for i in range(cols[0].size):
        lines.append(",".join(repr(float(c[i])) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path, expected_header=None) -> list[np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = tuple(text[0].split(","))
    if expected_header is not None and header != tuple(expected_header):
        raise ValueError(f"unexpected CSV header {header!r} in {path}")
    rows = [[float(v) for v in line.split(",")] for line in text[1:]]
    data = np.array(rows, dtype=float)
    return [data[:, j] for j in range(data.shape[1])]


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def local_maxima(amplitude: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima."""
    a = np.asarray(amplitude)
    if a.size < 3:
        return np.array([], dtype=int)
    inner = (a[1:-1] > a[:-2]) & (a[1:-1] > a[2:])
    return np.nonzero(inner)[0] + 1


def top_peaks(spectrum: Spectrum, n: int) -> list[tuple[float, float]]:
    """The n largest local maxima as (frequency, amplitude), amplitude-sorted."""
    idx = local_maxima(spectrum.amplitude)
    order = idx[np.argsort(-spectrum.amplitude[idx], kind="stable")][:n]
    return [(float(spectrum.freq_mhz[i]), float(spectrum.amplitude[i])) for i in order]


def fwhm(spectrum: Spectrum, freq: float) -> float:
    """Full width at half maximum of the peak nearest `freq`, by interpolation."""
    f, a = spectrum.freq_mhz, spectrum.amplitude
    i = int(np.argmin(np.abs(f - freq)))
    # climb to the local top in case freq sits on a shoulder
    while 0 < i < f.size - 1 and (a[i + 1] > a[i] or a[i - 1] > a[i]):
        i += 1 if a[i + 1] > a[i] else -1
    half = a[i] / 2.0
    lo = i
    while lo > 0 and a[lo] > half:
        lo -= 1
    hi = i
    while hi < a.size - 1 and a[hi] > half:
        hi += 1
    def cross(j, k):
        if a[j] == a[k]:
            return f[j]
        return f[j] + (half - a[j]) * (f[k] - f[j]) / (a[k] - a[j])
    return float(cross(hi - 1, hi) - cross(lo + 1, lo)) if hi > lo else 0.0
