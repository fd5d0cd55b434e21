"""Classical mean-field dynamics of the dimer.

The Gross-Pitaevskii limit of the two-mode model is a classical spin on
the unit sphere with Hamiltonian (dimensionless)

    H(phi, z) = Lambda z^2 / 2 - sqrt(1 - z^2) cos(phi)

where z is the population imbalance and phi the relative phase. The
dimensionless flow runs at rate 2J in physical seconds, so

    dz/dt = -2J sqrt(1 - z^2) sin(phi)
    dphi/dt = 2J (Lambda z + z cos(phi) / sqrt(1 - z^2)).

Integration happens in Cartesian Bloch coordinates
s = (sqrt(1-z^2) cos phi, -sqrt(1-z^2) sin phi, z), where the same flow
reads ds/dt = 2J s x grad H with grad H = (-1, 0, Lambda s_z). This form
is regular at the poles and conserves |s| and H exactly in exact
arithmetic; a fixed-step RK4 with per-step renormalization keeps both
to high accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhasePoint",
    "Trajectory",
    "FixedPoint",
    "bloch_from_phase",
    "phase_from_bloch",
    "h_cl",
    "h_cl_bloch",
    "eom_rhs",
    "integrate",
    "fixed_points",
    "separatrix_energy",
    "separatrix_z_at_zero_phase",
    "classify_regime",
    "is_self_trapped",
    "iso_energy_contours",
]

TWO_PI = 2.0 * np.pi

DEFAULT_J = 10.0


@dataclass(frozen=True)
class PhasePoint:
    """Point (phi, z) of the classical phase space; phi stored mod 2 pi."""

    phi: float
    z: float

    def __post_init__(self):
        if not -1.0 <= self.z <= 1.0:
            raise ValueError("z must lie in [-1, 1]")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "z", float(self.z))


@dataclass(frozen=True)
class FixedPoint:
    point: PhasePoint
    stability: str


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: times (s), phase-space coordinates, initial energy."""

    times: np.ndarray
    phis: np.ndarray
    zs: np.ndarray
    energy: float


def bloch_from_phase(p: PhasePoint) -> np.ndarray:
    r = np.sqrt(max(1.0 - p.z * p.z, 0.0))
    return np.array([r * np.cos(p.phi), -r * np.sin(p.phi), p.z])


def phase_from_bloch(s: np.ndarray) -> PhasePoint:
    z = float(min(max(s[2], -1.0), 1.0))
    return PhasePoint(phi=float(np.arctan2(-s[1], s[0])) % TWO_PI, z=z)


def h_cl(p: PhasePoint, lam: float) -> float:
    """Dimensionless classical energy at a phase-space point."""
    return float(0.5 * lam * p.z ** 2 - np.sqrt(1.0 - p.z ** 2) * np.cos(p.phi))


def h_cl_bloch(s: np.ndarray, lam: float):
    """Classical energy from Cartesian Bloch coordinates (vectorized)."""
    s = np.asarray(s, dtype=float)
    return 0.5 * lam * s[..., 2] ** 2 - s[..., 0]


def eom_rhs(s: np.ndarray, lam: float, J: float = DEFAULT_J) -> np.ndarray:
    """Time derivative of the Bloch vector, per physical second.

    Accepts a single (3,) vector or an (M, 3) batch.
    """
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    sx, sy, sz = s[..., 0], s[..., 1], s[..., 2]
    tj = 2.0 * J
    out[..., 0] = tj * lam * sy * sz
    out[..., 1] = -tj * sz * (1.0 + lam * sx)
    out[..., 2] = tj * sy
    return out


def rk4_step(s: np.ndarray, dt: float, lam: float, J: float) -> np.ndarray:
    """One classical RK4 step followed by renormalization to the unit sphere."""
    k1 = eom_rhs(s, lam, J)
    k2 = eom_rhs(s + 0.5 * dt * k1, lam, J)
    k3 = eom_rhs(s + 0.5 * dt * k2, lam, J)
    k4 = eom_rhs(s + dt * k3, lam, J)
    out = s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out /= np.linalg.norm(out, axis=-1, keepdims=True)
    return out


def _step_plan(T: float, dt: float):
    """Number of full dt steps and the final partial step covering [0, T]."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if T < 0.0:
        raise ValueError("duration must be nonnegative")
    n = int(np.floor(T / dt + 1e-9))
    rem = T - n * dt
    if rem < 1e-12 * max(dt, 1.0):
        rem = 0.0
    return n, rem


def integrate(p0: PhasePoint, lam: float, T: float, dt: float = 1e-4,
              J: float = DEFAULT_J) -> Trajectory:
    """Integrate from p0 for T seconds with fixed step dt, recording each step."""
    n, rem = _step_plan(T, dt)
    n_samples = n + 1 + (1 if rem else 0)
    times = np.empty(n_samples)
    phis = np.empty(n_samples)
    zs = np.empty(n_samples)
    s = bloch_from_phase(p0)
    for k in range(n + 1):
        times[k] = k * dt
        p = phase_from_bloch(s)
        phis[k] = p.phi
        zs[k] = p.z
        if k < n:
            s = rk4_step(s, dt, lam, J)
    if rem:
        s = rk4_step(s, rem, lam, J)
        p = phase_from_bloch(s)
        times[-1] = T
        phis[-1] = p.phi
        zs[-1] = p.z
    return Trajectory(times=times, phis=phis, zs=zs, energy=h_cl(p0, lam))


def fixed_points(lam: float) -> list[FixedPoint]:
    """Stationary points of the flow with stability labels.

    (0, 0) is always a stable center. (pi, 0) is stable below Lambda = 1
    and hyperbolic above, where it sheds a pair of stable self-trapping
    centers at (pi, +-sqrt(1 - 1/Lambda^2)).
    """
    if lam < 0:
        raise ValueError("Lambda must be nonnegative")
    pts = [FixedPoint(PhasePoint(0.0, 0.0), "stable-center")]
    if lam < 1.0:
        pts.append(FixedPoint(PhasePoint(np.pi, 0.0), "stable-center"))
    elif lam == 1.0:
        pts.append(FixedPoint(PhasePoint(np.pi, 0.0), "degenerate"))
    else:
        pts.append(FixedPoint(PhasePoint(np.pi, 0.0), "hyperbolic"))
        z_st = np.sqrt(1.0 - 1.0 / lam ** 2)
        pts.append(FixedPoint(PhasePoint(np.pi, z_st), "stable-center"))
        pts.append(FixedPoint(PhasePoint(np.pi, -z_st), "stable-center"))
    return pts


def separatrix_energy(lam: float):
    """Energy of the self-trapping separatrix, or None when absent (Lambda <= 1)."""
    return 1.0 if lam > 1.0 else None


def separatrix_z_at_zero_phase(lam: float):
    """|z| where the separatrix crosses phi = 0; exists only for Lambda > 2."""
    if lam <= 2.0:
        return None
    w = (lam - 2.0) / lam
    return float(np.sqrt(1.0 - w * w))


def classify_regime(lam: float) -> str:
    """Dynamical regime label as a function of Lambda.

    Below 1 plasma oscillations about both centers (Rabi); between 1 and 2
    pi-phase self-trapping exists (Josephson); above 2 additionally running
    phase self-trapped orbits. The boundary values 1 and 2 are 'critical'.
    """
    if lam < 0:
        raise ValueError("Lambda must be nonnegative")
    if lam == 1.0 or lam == 2.0:
        return "critical"
    if lam < 1.0:
        return "Rabi"
    if lam < 2.0:
        return "Josephson"
    return "Josephson-with-running-phase-ST"


def is_self_trapped(p0: PhasePoint, lam: float) -> bool:
    """True when the orbit through p0 conserves sign(z).

    Above the separatrix energy the trajectory cannot reach z = 0, since
    any point with z = 0 has H = -cos(phi) <= 1.
    """
    return bool(lam > 1.0 and p0.z != 0.0 and h_cl(p0, lam) > 1.0)


# ---------------------------------------------------------------------------
# iso-energy contours by marching squares with linear edge interpolation

_SEG_TABLE = {
    1: (("L", "B"),),
    2: (("B", "R"),),
    3: (("L", "R"),),
    4: (("R", "T"),),
    6: (("B", "T"),),
    7: (("L", "T"),),
    8: (("T", "L"),),
    9: (("B", "T"),),
    11: (("R", "T"),),
    12: (("R", "L"),),
    13: (("B", "R"),),
    14: (("L", "B"),),
}


def _edge_point(edge, x0, x1, y0, y1, v00, v10, v11, v01, level):
    if edge == "B":
        t = (level - v00) / (v10 - v00)
        return (x0 + t * (x1 - x0), y0)
    if edge == "T":
        t = (level - v01) / (v11 - v01)
        return (x0 + t * (x1 - x0), y1)
    if edge == "L":
        t = (level - v00) / (v01 - v00)
        return (x0, y0 + t * (y1 - y0))
    t = (level - v10) / (v11 - v10)
    return (x1, y0 + t * (y1 - y0))


def _cell_segments(x0, x1, y0, y1, v00, v10, v11, v01, level):
    case = (
        (1 if v00 > level else 0)
        | (2 if v10 > level else 0)
        | (4 if v11 > level else 0)
        | (8 if v01 > level else 0)
    )
    if case in (0, 15):
        return []
    if case == 5:
        center = 0.25 * (v00 + v10 + v11 + v01)
        pairs = (("B", "R"), ("L", "T")) if center > level else (("L", "B"), ("R", "T"))
    elif case == 10:
        center = 0.25 * (v00 + v10 + v11 + v01)
        pairs = (("L", "B"), ("R", "T")) if center > level else (("B", "R"), ("L", "T"))
    else:
        pairs = _SEG_TABLE[case]
    segs = []
    for e1, e2 in pairs:
        p1 = _edge_point(e1, x0, x1, y0, y1, v00, v10, v11, v01, level)
        p2 = _edge_point(e2, x0, x1, y0, y1, v00, v10, v11, v01, level)
        if p1 != p2:
            segs.append((p1, p2))
    return segs


def _chain_segments(segments):
    """Join shared-endpoint segments into polylines, deterministically."""
    adjacency: dict[tuple, list[int]] = {}
    for idx, (p1, p2) in enumerate(segments):
        adjacency.setdefault(p1, []).append(idx)
        adjacency.setdefault(p2, []).append(idx)
    used = [False] * len(segments)
    polylines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        p1, p2 = segments[start]
        line = [p1, p2]
        # extend forward from the tail, then backward from the head
        for endpos in (1, 0):
            while True:
                tip = line[-1] if endpos else line[0]
                nxt = None
                for idx in adjacency.get(tip, ()):
                    if not used[idx]:
                        nxt = idx
                        break
                if nxt is None:
                    break
                used[nxt] = True
                q1, q2 = segments[nxt]
                other = q2 if q1 == tip else q1
                if endpos:
                    line.append(other)
                else:
                    line.insert(0, other)
        polylines.append(np.array(line))
    return polylines


def iso_energy_contours(lam: float, levels, grid=(256, 256)) -> list[list[np.ndarray]]:
    """Iso-energy polylines of H over [0, 2 pi] x [-1, 1].

    Returns one list of (k, 2) vertex arrays, columns (phi, z), per
    requested level. Levels outside the energy range give empty lists.
    """
    nphi, nz = grid
    if nphi < 16 or nz < 16:
        raise ValueError("contour grid must be at least 16x16")
    phi_nodes = np.linspace(0.0, TWO_PI, nphi + 1)
    z_nodes = np.linspace(-1.0, 1.0, nz + 1)
    vals = (
        0.5 * lam * z_nodes[None, :] ** 2
        - np.sqrt(np.clip(1.0 - z_nodes[None, :] ** 2, 0.0, None)) * np.cos(phi_nodes[:, None])
    )
    out = []
    for level in levels:
        segments = []
        for i in range(nphi):
            for j in range(nz):
                segments.extend(
                    _cell_segments(
                        phi_nodes[i], phi_nodes[i + 1], z_nodes[j], z_nodes[j + 1],
                        vals[i, j], vals[i + 1, j], vals[i + 1, j + 1], vals[i, j + 1],
                        level,
                    )
                )
        out.append(_chain_segments(segments))
    return out
