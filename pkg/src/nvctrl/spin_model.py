"""Spin model of the NV electron / 14N / 13C register.

Conventions used throughout the package:

* Every Hamiltonian is stored divided by 2*pi, in MHz.  Propagators apply the
  2*pi exactly once (see :mod:`nvctrl.propagation`), so MHz times microseconds
  gives cycles.
* The working 4-dimensional computational basis is fixed to
  ``|0,up>, |0,down>, |-1,up>, |-1,down>`` where the first label is the
  electron spin projection m_S and the arrow is the 13C state.
* Larmor frequencies are entered as positive magnitudes; the structural minus
  signs of the Zeeman terms are applied inside the builders.
* The quantization-axis angles use the two-argument arctangent so the quadrant
  is well defined when the denominator changes sign; they are reported in
  degrees in (-180, 180].
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import BadGrid, DegenerateAxis
from .signals import Spectrum

# Default physical constants (MHz, mT).  The gyromagnetic ratios are CODATA
# values; frequency overrides on SystemParams supersede the B*gamma products.
D_SPLITTING_MHZ = 2870.0
GAMMA_E_MHZ_PER_MT = 28.0249
GAMMA_C13_MHZ_PER_MT = 0.0107084
GAMMA_N14_MHZ_PER_MT = 0.0030766
A_N14_MHZ = -2.16
P_N14_MHZ = -4.95

TWO_PI = 2.0 * math.pi

# Spin-1/2 operators (units of hbar = 1)
SX2 = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
SY2 = np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex)
SZ2 = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)
E2 = np.eye(2, dtype=complex)
E3 = np.eye(3, dtype=complex)

# Spin-1 z operator in the basis m = +1, 0, -1
SZ1 = np.diag([1.0, 0.0, -1.0]).astype(complex)

# Electron pseudo-spin-1/2 operators on the {|0>, |-1>} manifold, extended to
# the 4-dimensional working space (electron index times 13C index).
PSEUDO_SX = np.kron(SX2, E2)
PSEUDO_SY = np.kron(SY2, E2)
PSEUDO_SZ = np.kron(SZ2, E2)
CARBON_IX = np.kron(E2, SX2)
CARBON_IZ = np.kron(E2, SZ2)

BASIS_LABELS_4 = ("|0,up>", "|0,down>", "|-1,up>", "|-1,down>")
BASIS_LABELS_4_PLUS = ("|0,up>", "|0,down>", "|+1,up>", "|+1,down>")


@dataclass(frozen=True)
class SystemParams:
    """Physical constants and couplings of one NV / 14N / 13C system.

    Defaults describe the register used for all built-in examples: a weakly
    coupled 13C (|A| < 0.2 MHz) in a 14.8 mT field.  Frequencies in MHz,
    field in mT, gyromagnetic ratios in MHz/mT.
    """

    d_mhz: float = D_SPLITTING_MHZ
    b_mt: float = 14.8
    gamma_e: float = GAMMA_E_MHZ_PER_MT
    gamma_c: float = GAMMA_C13_MHZ_PER_MT
    a_n: float = A_N14_MHZ
    p_quad: float = P_N14_MHZ
    a_zz: float = -0.152
    a_zx: float = 0.110
    nu_e_override: float | None = None
    nu_c_override: float | None = None
    nu_n_override: float | None = None

    def __post_init__(self):
        if not self.d_mhz > 0:
            raise ValueError("zero-field splitting must be positive")
        if self.b_mt < 0:
            raise ValueError("static field must be non-negative")

    @property
    def nu_e(self) -> float:
        """Electron Larmor frequency (MHz)."""
        return self.gamma_e * self.b_mt if self.nu_e_override is None else self.nu_e_override

    @property
    def nu_c(self) -> float:
        """13C Larmor frequency (MHz)."""
        return self.gamma_c * self.b_mt if self.nu_c_override is None else self.nu_c_override

    @property
    def nu_n(self) -> float:
        """14N Larmor frequency (MHz)."""
        return GAMMA_N14_MHZ_PER_MT * self.b_mt if self.nu_n_override is None else self.nu_n_override

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SystemParams keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SystemParams":
        return cls.from_dict(json.loads(text))

    def with_updates(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Hermitian operator in a declared basis, stored as H/2pi in MHz."""

    dim: int
    matrix: np.ndarray
    basis_labels: tuple[str, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} does not match dim {self.dim}")
        if len(self.basis_labels) != self.dim:
            raise ValueError("basis_labels length must equal dim")
        scale = max(np.linalg.norm(m), 1.0)
        if np.linalg.norm(m - m.conj().T) > 1e-12 * scale:
            raise ValueError("matrix is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "basis_labels", tuple(self.basis_labels))

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending, MHz) and eigenvector columns."""
        return np.linalg.eigh(self.matrix)


@dataclass(frozen=True, eq=False)
class EigenStructure:
    """Quantization-axis angles, nuclear transition frequencies, eigenvectors.

    Angles in degrees; theta_zero is identically zero because the nuclear
    axis in the m_S = 0 manifold is the z-axis.  The eigvecs dict holds the
    2-component nuclear eigenstates phi_plus/psi_plus/phi_minus/psi_minus.
    """

    theta_plus: float
    theta_minus: float
    nu_c: float
    nu_minus: float
    nu_plus: float
    eigvecs: dict
    theta_zero: float = 0.0


def nuclear_frequencies(params: SystemParams) -> tuple[float, float, float]:
    """Nuclear transition frequencies (nu_C, nu_minus, nu_plus) in MHz.

    nu_C applies when the electron is in m_S = 0 and
    nu_pm = sqrt(A_zx^2 + (nu_C -/+ A_zz)^2) when it is in m_S = +/-1.
    """
    nu_c = params.nu_c
    nu_minus = math.hypot(params.a_zx, nu_c + params.a_zz)
    nu_plus = math.hypot(params.a_zx, nu_c - params.a_zz)
    return nu_c, nu_minus, nu_plus


def _axis_angle_deg(a_zx: float, denom: float) -> float:
    if a_zx == 0.0 and denom == 0.0:
        raise DegenerateAxis("quantization axis undefined: A_zx = 0 and A_zz = -/+ nu_C")
    deg = math.degrees(math.atan2(a_zx, denom))
    if deg <= -180.0:
        deg += 360.0
    return deg


def quantization_angles(params: SystemParams) -> tuple[float, float]:
    """Tilt angles (theta_plus, theta_minus) of the nuclear axis, in degrees.

    theta_pm = atan2(A_zx, A_zz -/+ nu_C), reported in (-180, 180].
    """
    nu_c = params.nu_c
    theta_plus = _axis_angle_deg(params.a_zx, params.a_zz - nu_c)
    theta_minus = _axis_angle_deg(params.a_zx, params.a_zz + nu_c)
    return theta_plus, theta_minus


def rotation_y(theta_rad: float) -> np.ndarray:
    """Spin-1/2 rotation exp(-i theta I_y) about the y-axis."""
    c, s = math.cos(theta_rad / 2.0), math.sin(theta_rad / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def eigenstructure(params: SystemParams) -> EigenStructure:
    """Angles, transition frequencies and nuclear eigenstates in one record."""
    theta_plus, theta_minus = quantization_angles(params)
    nu_c, nu_minus, nu_plus = nuclear_frequencies(params)
    up = np.array([1.0, 0.0], dtype=complex)
    down = np.array([0.0, 1.0], dtype=complex)
    vecs = {}
    for tag, theta in (("plus", theta_plus), ("minus", theta_minus)):
        ry = rotation_y(math.radians(theta))
        vecs[f"phi_{tag}"] = ry @ up
        vecs[f"psi_{tag}"] = ry @ down
    return EigenStructure(
        theta_plus=theta_plus,
        theta_minus=theta_minus,
        nu_c=nu_c,
        nu_minus=nu_minus,
        nu_plus=nu_plus,
        eigvecs=vecs,
    )


def build_hamiltonian_full(params: SystemParams) -> Hamiltonian:
    """Static Hamiltonian of the full electron (S=1) x 14N (I=1) x 13C (I=1/2)
    system, 18-dimensional, H/2pi in MHz.

    Terms: D S_z^2 - nu_e S_z + P (I_z^N)^2 - nu_N I_z^N - nu_C I_z
    + A_N S_z I_z^N + A_zz S_z I_z + A_zx S_z I_x.
    """
    sz_e = np.kron(np.kron(SZ1, E3), E2)
    sz2_e = sz_e @ sz_e
    izn = np.kron(np.kron(E3, SZ1), E2)
    izn2 = izn @ izn
    iz_c = np.kron(np.kron(E3, E3), SZ2)
    ix_c = np.kron(np.kron(E3, E3), SX2)
    h = (
        params.d_mhz * sz2_e
        - params.nu_e * sz_e
        + params.p_quad * izn2
        - params.nu_n * izn
        - params.nu_c * iz_c
        + params.a_n * sz_e @ izn
        + params.a_zz * sz_e @ iz_c
        + params.a_zx * sz_e @ ix_c
    )
    labels = tuple(
        f"|{ms},{mn},{c}>"
        for ms in ("+1", "0", "-1")
        for mn in ("+1", "0", "-1")
        for c in ("up", "down")
    )
    return Hamiltonian(18, h, labels)


def build_hamiltonian_ec(params: SystemParams) -> Hamiltonian:
    """Electron-13C Hamiltonian at fixed m_N = +1, 6-dimensional.

    H/2pi = D S_z^2 - (nu_e - A_N) S_z - nu_C I_z + A_zz S_z I_z + A_zx S_z I_x
    over (m_S = +1, 0, -1) x (up, down).
    """
    sz_e = np.kron(SZ1, E2)
    iz_c = np.kron(E3, SZ2)
    ix_c = np.kron(E3, SX2)
    h = (
        params.d_mhz * sz_e @ sz_e
        - (params.nu_e - params.a_n) * sz_e
        - params.nu_c * iz_c
        + params.a_zz * sz_e @ iz_c
        + params.a_zx * sz_e @ ix_c
    )
    labels = tuple(f"|{ms},{c}>" for ms in ("+1", "0", "-1") for c in ("up", "down"))
    return Hamiltonian(6, h, labels)


def build_hamiltonian_subspace(params: SystemParams) -> Hamiltonian:
    """Working 4-dimensional Hamiltonian on the {|0>, |-1>} manifold, in the
    rotating frame of the resonant m_S = 0 <-> -1 carrier.

    H_s/2pi = (-nu_C - A_zz/2) I_z + A_zz s_z I_z + A_zx s_z I_x - (A_zx/2) I_x
    with s_z the electron pseudo-spin-1/2 operator.
    """
    nu_c = params.nu_c
    h = (
        (-nu_c - params.a_zz / 2.0) * CARBON_IZ
        + params.a_zz * PSEUDO_SZ @ CARBON_IZ
        + params.a_zx * PSEUDO_SZ @ CARBON_IX
        - (params.a_zx / 2.0) * CARBON_IX
    )
    return Hamiltonian(4, h, BASIS_LABELS_4)


def build_hamiltonian_subspace_plus(params: SystemParams) -> Hamiltonian:
    """Rotating-frame Hamiltonian of the {|0>, |+1>} manifold, 4-dimensional.

    Basis |0,up>, |0,down>, |+1,up>, |+1,down>; used to model pulses resonant
    with the m_S = 0 <-> +1 transition (e.g. the two-pulse readout gate).
    """
    nu_c = params.nu_c
    h = (
        (-nu_c + params.a_zz / 2.0) * CARBON_IZ
        - params.a_zz * PSEUDO_SZ @ CARBON_IZ
        - params.a_zx * PSEUDO_SZ @ CARBON_IX
        + (params.a_zx / 2.0) * CARBON_IX
    )
    return Hamiltonian(4, h, BASIS_LABELS_4_PLUS)


def nuclear_block_hamiltonians(params: SystemParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-manifold 2x2 nuclear Hamiltonians (h_plus, h_zero, h_minus) in MHz.

    These are the restrictions of the electron-13C Hamiltonian to fixed
    m_S = +1, 0, -1, with the electron energy offsets dropped.
    """
    nu_c = params.nu_c
    h_plus = (params.a_zz - nu_c) * SZ2 + params.a_zx * SX2
    h_zero = -nu_c * SZ2
    h_minus = (-nu_c - params.a_zz) * SZ2 - params.a_zx * SX2
    return h_plus, h_zero, h_minus


def diagonalizing_transform(params: SystemParams) -> np.ndarray:
    """Unitary over (m_S = +1, 0, -1) x 13C that rotates each manifold's
    nuclear axis onto z: block-diagonal R_y(theta_plus), identity, R_y(theta_minus).

    Conjugating the electron-13C Hamiltonian as U^dag H U leaves each electron
    block diagonal in the 13C index.
    """
    theta_plus, theta_minus = quantization_angles(params)
    u = np.zeros((6, 6), dtype=complex)
    u[0:2, 0:2] = rotation_y(math.radians(theta_plus))
    u[2:4, 2:4] = E2
    u[4:6, 4:6] = rotation_y(math.radians(theta_minus))
    return u


def esr_lines(params: SystemParams, branch: int) -> list[tuple[float, float]]:
    """The four ESR lines of the m_S = 0 <-> branch transition at m_N = +1.

    Returns (offset from the branch center in MHz, transition probability)
    pairs; the probabilities sum to 2.
    """
    if branch not in (+1, -1):
        raise ValueError("branch must be +1 or -1")
    theta_plus, theta_minus = quantization_angles(params)
    nu_c, nu_minus, nu_plus = nuclear_frequencies(params)
    nu_b = nu_plus if branch == +1 else nu_minus
    theta = math.radians(theta_plus if branch == +1 else theta_minus)
    s2 = math.sin(theta / 2.0) ** 2
    c2 = math.cos(theta / 2.0) ** 2
    return [
        ((nu_b + nu_c) / 2.0, s2),
        (-(nu_b - nu_c) / 2.0, c2),
        ((nu_b - nu_c) / 2.0, c2),
        (-(nu_b + nu_c) / 2.0, s2),
    ]


def esr_spectrum(lines, linewidth: float, grid) -> Spectrum:
    """Render stick lines as a sum of Lorentzians (linewidth = FWHM, MHz);
    peak heights are proportional to the line probabilities."""
    if linewidth <= 0:
        raise ValueError("linewidth must be positive")
    f = np.asarray(grid, dtype=float)
    if f.ndim != 1 or f.size == 0 or np.any(np.diff(f) <= 0):
        raise BadGrid("grid must be non-empty and strictly increasing")
    hwhm = linewidth / 2.0
    amp = np.zeros_like(f)
    for center, prob in lines:
        amp += prob * hwhm**2 / ((f - center) ** 2 + hwhm**2)
    return Spectrum(f, amp, {"kind": "esr", "linewidth_mhz": float(linewidth)})
