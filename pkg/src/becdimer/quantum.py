"""Exact quantum engine for the two-mode Bose-Hubbard dimer.

N bosons on two linearly coupled modes live in the (N+1)-dimensional
symmetric Fock space spanned by |n, N-n> with n atoms in mode 1. The
Hamiltonian

    H = -J (a1+ a2 + a2+ a1) + (U/2) (a1+ a1+ a1 a1 + a2+ a2+ a2 a2)

is real symmetric tridiagonal in this basis, so states are propagated
exactly through its spectral decomposition. hbar = 1 throughout; J and
U carry units of 1/s and times are in seconds.

Collective spin components are Jx = (a2+ a1 + a1+ a2)/2,
Jy = i(a2+ a1 - a1+ a2)/2, Jz = (a1+ a1 - a2+ a2)/2, total spin N/2.
The atomic coherent state |phi, z> uses mode-1 amplitude sqrt((1+z)/2)
and mode-2 amplitude sqrt((1-z)/2) e^{i phi}; with this sign the U = 0
Ehrenfest dynamics coincides with the classical flow in `meanfield`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import binom

__all__ = [
    "ModelParams",
    "Spectrum",
    "StateVector",
    "SpinMoments",
    "DiagonalizationError",
    "NoMeanSpinError",
    "build_hamiltonian",
    "diagonalize",
    "coherent_state",
    "evolve",
    "spdm",
    "condensate_fraction",
    "epr_entanglement",
    "entanglement_semiclassical",
    "spin_moments",
    "squeezing_xi2",
    "husimi_q",
    "max_overlap",
    "mean_imbalance",
]

# mean-spin length below this fraction of N counts as vanishing
SPIN_EPS = 1e-9


class DiagonalizationError(RuntimeError):
    """The tridiagonal eigensolver failed to converge."""


class NoMeanSpinError(ValueError):
    """Spin squeezing is undefined because the mean spin vector vanishes."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the dimer.

    Exactly one of U (on-site interaction) and lam (dimensionless
    Lambda = U*N/(2J)) must be given; the other is derived.
    """

    N: int
    J: float
    U: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        if not np.isfinite(self.J) or self.J <= 0:
            raise ValueError("J must be positive and finite")
        if (self.U is None) == (self.lam is None):
            raise ValueError("give exactly one of U and lam")
        if self.U is None:
            if not np.isfinite(self.lam):
                raise ValueError("lam must be finite")
            object.__setattr__(self, "U", 2.0 * self.J * self.lam / self.N)
        else:
            if not np.isfinite(self.U):
                raise ValueError("U must be finite")
            object.__setattr__(self, "lam", self.U * self.N / (2.0 * self.J))


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of the Hamiltonian.

    energies are ascending; vectors holds real orthonormal eigenvectors
    in columns, each with its largest-magnitude component positive.
    """

    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class StateVector:
    """Pure state in the Fock basis |n, N-n>, amplitude index n."""

    N: int
    amps: np.ndarray


@dataclass(frozen=True)
class SpinMoments:
    """First and symmetrized second moments of (Jx, Jy, Jz)."""

    mean: np.ndarray
    cov: np.ndarray


def build_hamiltonian(params: ModelParams) -> np.ndarray:
    """Dense (N+1)x(N+1) Hamiltonian matrix; real symmetric tridiagonal."""
    N, J, U = params.N, params.J, params.U
    n = np.arange(N + 1, dtype=float)
    diag = 0.5 * U * (n * (n - 1.0) + (N - n) * (N - n - 1.0))
    off = -J * np.sqrt((n[:-1] + 1.0) * (N - n[:-1]))
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def _check_tridiagonal(H: np.ndarray):
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("Hamiltonian must be a square matrix")
    if np.iscomplexobj(H):
        raise ValueError("Hamiltonian must be real")
    if not np.array_equal(H, H.T):
        raise ValueError("Hamiltonian must be symmetric")
    mask = np.abs(np.subtract.outer(np.arange(H.shape[0]), np.arange(H.shape[0]))) > 1
    if np.any(H[mask] != 0.0):
        raise ValueError("Hamiltonian must be tridiagonal")


def diagonalize(H: np.ndarray) -> Spectrum:
    """Full eigendecomposition of a real symmetric tridiagonal matrix."""
    _check_tridiagonal(H)
    d = np.ascontiguousarray(H.diagonal().astype(float))
    if H.shape[0] == 1:
        return Spectrum(energies=d.copy(), vectors=np.ones((1, 1)))
    e = np.ascontiguousarray(H.diagonal(1).astype(float))
    try:
        w, v = scipy.linalg.eigh_tridiagonal(d, e)
    except scipy.linalg.LinAlgError as err:  # pragma: no cover - hardware dependent
        raise DiagonalizationError(f"tridiagonal eigensolver did not converge: {err}") from err
    # deterministic gauge: largest-magnitude component of each vector positive
    for k in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, k])))
        if v[i, k] < 0.0:
            v[:, k] = -v[:, k]
    return Spectrum(energies=w, vectors=v)


def coherent_state(N: int, phi: float, z: float) -> StateVector:
    """Atomic (SU(2)) coherent state with relative phase phi and imbalance z.

    Amplitudes c_n = sqrt(C(N,n)) a^n b^(N-n), a = sqrt((1+z)/2),
    b = sqrt((1-z)/2) e^{i phi}. All N atoms share one single-particle
    state, so the state is a pure condensate.
    """
    if not -1.0 <= z <= 1.0:
        raise ValueError("z must lie in [-1, 1]")
    n = np.arange(N + 1)
    a = np.sqrt((1.0 + z) / 2.0)
    bmod = np.sqrt((1.0 - z) / 2.0)
    amps = (
        np.sqrt(binom(N, n))
        * a ** n
        * bmod ** (N - n)
        * np.exp(1j * phi * (N - n))
    )
    amps = amps / np.linalg.norm(amps)
    return StateVector(N=N, amps=amps)


def evolve(psi: StateVector, t: float, spec: Spectrum) -> StateVector:
    """Propagate psi for time t (seconds) through the spectral decomposition."""
    if psi.amps.shape[0] != spec.dim:
        raise ValueError("state and spectrum dimensions do not match")
    alpha = spec.vectors.T @ psi.amps
    phases = np.exp(-1j * spec.energies * t)
    return StateVector(N=psi.N, amps=spec.vectors @ (phases * alpha))


def spdm(psi: StateVector) -> np.ndarray:
    """Single-particle density matrix rho_ij = <ai+ aj>/N, a 2x2 array."""
    N = psi.N
    c = psi.amps
    n = np.arange(N + 1)
    p = np.abs(c) ** 2
    rho11 = float(np.sum(p * n)) / N
    lad = np.sqrt((n[:-1] + 1.0) * (N - n[:-1]))
    rho12 = np.sum(np.conj(c[1:]) * c[:-1] * lad) / N
    return np.array([[rho11, rho12], [np.conj(rho12), 1.0 - rho11]])


def condensate_fraction(rho: np.ndarray) -> float:
    """Largest eigenvalue of the 2x2 SPDM; 1/2 (fragmented) to 1 (pure BEC)."""
    half_diff = 0.5 * float(rho[0, 0].real - rho[1, 1].real)
    c = 0.5 + np.sqrt(half_diff ** 2 + abs(rho[0, 1]) ** 2)
    return float(min(max(c, 0.5), 1.0))


def epr_entanglement(psi: StateVector) -> float:
    """EPR entanglement witness E = |<a1+ a2>|^2 - <n1 n2>; E > 0 is entangled."""
    N = psi.N
    c = psi.amps
    n = np.arange(N + 1)
    lad = np.sqrt((n[:-1] + 1.0) * (N - n[:-1]))
    coh = np.sum(np.conj(c[1:]) * c[:-1] * lad)
    nn = float(np.sum(np.abs(c) ** 2 * n * (N - n)))
    return float(abs(coh) ** 2 - nn)


def entanglement_semiclassical(c: float, N: int) -> float:
    """Semiclassical counterpart N^2 (c^2 - c); never positive for c in [1/2, 1]."""
    return N * N * (c * c - c)


def _ladder_vectors(psi: StateVector):
    N = psi.N
    c = psi.amps
    n = np.arange(N + 1, dtype=float)
    up = np.zeros_like(c)
    up[1:] = np.sqrt(n[1:] * (N - n[1:] + 1.0)) * c[:-1]
    down = np.zeros_like(c)
    down[:-1] = np.sqrt((n[:-1] + 1.0) * (N - n[:-1])) * c[1:]
    jx = 0.5 * (up + down)
    jy = -0.5j * (up - down)
    jz = (n - N / 2.0) * c
    return jx, jy, jz


def spin_moments(psi: StateVector) -> SpinMoments:
    """Mean spin vector and symmetrized 3x3 covariance of (Jx, Jy, Jz)."""
    jc = np.stack(_ladder_vectors(psi))
    mean = np.real(np.conj(psi.amps) @ jc.T)
    second = np.real(np.conj(jc) @ jc.T)
    cov = second - np.outer(mean, mean)
    return SpinMoments(mean=mean, cov=cov)


def squeezing_xi2(m: SpinMoments, N: int) -> float:
    """Spin squeezing parameter: N times the minimal variance transverse to
    the mean spin, over the squared mean spin length. Coherent states give 1."""
    length = float(np.linalg.norm(m.mean))
    if length <= SPIN_EPS * N:
        raise NoMeanSpinError("mean spin vector vanishes; squeezing undefined")
    u = m.mean / length
    k = int(np.argmin(np.abs(u)))
    e1 = np.zeros(3)
    e1[k] = 1.0
    e1 = e1 - (e1 @ u) * u
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    a = float(e1 @ m.cov @ e1)
    b = float(e1 @ m.cov @ e2)
    d = float(e2 @ m.cov @ e2)
    lam_min = 0.5 * (a + d - np.sqrt((a - d) ** 2 + 4.0 * b * b))
    lam_min = max(lam_min, 0.0)
    return float(N * lam_min / length ** 2)


def husimi_q(psi: StateVector, phi: float, z: float) -> float:
    """Husimi function Q(phi, z) = |<phi,z|psi>|^2.

    With the SU(2) measure, (N+1)/(4 pi) * Int Q dphi dz = 1.
    """
    chi = coherent_state(psi.N, phi, z)
    return float(abs(np.vdot(chi.amps, psi.amps)) ** 2)


def max_overlap(phi: float, z: float, spec: Spectrum) -> float:
    """Largest overlap |<v_k|phi,z>| of a coherent state with any eigenstate."""
    chi = coherent_state(spec.dim - 1, phi, z)
    return float(np.max(np.abs(spec.vectors.T @ chi.amps)))


def mean_imbalance(psi: StateVector) -> float:
    """Normalized population imbalance <Jz>/(N/2) in [-1, 1]."""
    n = np.arange(psi.N + 1)
    p = np.abs(psi.amps) ** 2
    return float(np.sum(p * (n - psi.N / 2.0)) / (psi.N / 2.0))
