"""Semiclassical ensemble dynamics (liouvillian dynamics approach).

The quantum initial condition is mimicked by an ensemble of classical
Bloch vectors drawn from the Husimi distribution of the atomic coherent
state: the density on the sphere is proportional to cos^{2N}(Theta/2)
about the state's own Bloch vector, i.e. the polar cosine u = cos Theta
has density (N+1)/2^{N+1} (1+u)^N and the azimuth is uniform. Each point
then follows the classical mean-field flow, and ensemble averages of the
Bloch vector yield a single-particle density matrix whose largest
eigenvalue is the semiclassical condensate fraction

    c = (1 + |mean Bloch vector|) / 2.

A fresh ensemble has c = (N+1)/(N+2) rather than 1: the sampled cloud
has the finite width of the Husimi function. This known offset at t = 0
is reported as-is, not subtracted.

Sampling uses a counter-based (Philox) generator keyed by the seed, so
an ensemble is a pure function of (origin, N, M, seed) regardless of how
the propagation work is later split across workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import multiprocessing
import numpy as np

from .meanfield import PhasePoint, bloch_from_phase, rk4_step, _step_plan, DEFAULT_J

__all__ = [
    "Ensemble",
    "derive_seed",
    "sample_husimi",
    "propagate_ensemble",
    "ensemble_condensate_fraction",
    "ensemble_c_stderr",
    "sample_times",
    "ensemble_c_series",
    "lida_min_c_window",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Ensemble:
    """Classical ensemble of unit Bloch vectors, points shape (M, 3)."""

    points: np.ndarray
    origin: PhasePoint
    N: int
    seed: int

    @property
    def M(self) -> int:
        return self.points.shape[0]


def derive_seed(seed: int, index: int) -> int:
    """Per-point stream key: low 64 bits carry the seed, high bits the index."""
    return (int(seed) & _MASK64) | (int(index) << 64)


def _perp_frame(e3: np.ndarray):
    k = int(np.argmin(np.abs(e3)))
    e1 = np.zeros(3)
    e1[k] = 1.0
    e1 = e1 - (e1 @ e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2


def sample_husimi(origin: PhasePoint, N: int, M: int, seed: int) -> Ensemble:
    """Draw M Bloch vectors from the Husimi density of |origin> by inverse CDF.

    u = cos Theta = 2 r^{1/(N+1)} - 1 for uniform r, uniform azimuth, with
    the polar axis rotated onto the origin's Bloch vector.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    r = rng.random((M, 2))
    u = 2.0 * r[:, 0] ** (1.0 / (N + 1)) - 1.0
    az = 2.0 * np.pi * r[:, 1]
    e3 = bloch_from_phase(origin)
    e1, e2 = _perp_frame(e3)
    rad = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    pts = (
        u[:, None] * e3
        + (rad * np.cos(az))[:, None] * e1
        + (rad * np.sin(az))[:, None] * e2
    )
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return Ensemble(points=pts, origin=origin, N=N, seed=seed)


def _propagate_array(pts: np.ndarray, lam: float, t: float, dt: float, J: float) -> np.ndarray:
    n, rem = _step_plan(t, dt)
    s = pts.copy()
    for _ in range(n):
        s = rk4_step(s, dt, lam, J)
    if rem:
        s = rk4_step(s, rem, lam, J)
    return s


def _map_point_chunks(func, pts: np.ndarray, workers: int):
    """Apply func to row chunks of pts and reassemble in order.

    Row-wise numpy arithmetic gives the same bits for any chunking, so the
    result is independent of the worker count.
    """
    if workers <= 1:
        return func(pts)
    chunks = np.array_split(pts, workers)
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        parts = list(pool.map(func, chunks))
    return np.concatenate(parts, axis=-2)


class _Propagate:
    def __init__(self, lam, t, dt, J):
        self.args = (lam, t, dt, J)

    def __call__(self, pts):
        return _propagate_array(pts, *self.args)


def propagate_ensemble(e: Ensemble, lam: float, t: float, dt: float = 1e-4,
                       J: float = DEFAULT_J, workers: int = 1) -> Ensemble:
    """Evolve every ensemble point for t seconds under the mean-field flow."""
    pts = _map_point_chunks(_Propagate(lam, t, dt, J), e.points, workers)
    return Ensemble(points=pts, origin=e.origin, N=e.N, seed=e.seed)


def ensemble_condensate_fraction(e: Ensemble) -> float:
    """Condensate fraction of the ensemble, (1 + |mean Bloch vector|)/2."""
    m = e.points.mean(axis=0)
    return float(0.5 * (1.0 + np.linalg.norm(m)))


def ensemble_c_stderr(e: Ensemble) -> float:
    """Delta-method standard error of the ensemble condensate fraction."""
    m = e.points.mean(axis=0)
    length = np.linalg.norm(m)
    if length == 0.0:
        return float(0.5 * np.sqrt(np.max(np.var(e.points, axis=0)) / e.M))
    u = m / length
    proj = e.points @ u
    return float(0.5 * np.sqrt(np.var(proj) / e.M))


def sample_times(T: float, dt_sample: float) -> np.ndarray:
    """Times 0, dt_sample, ... covering [0, T] (T included when commensurate)."""
    if dt_sample <= 0.0:
        raise ValueError("dt_sample must be positive")
    if T < 0.0:
        raise ValueError("window must be nonnegative")
    k = int(np.floor(T / dt_sample + 1e-9))
    return np.arange(k + 1) * dt_sample


class _SeriesSnapshots:
    """Propagate a chunk through all sample times, returning every snapshot."""

    def __init__(self, lam, n_segments, n_sub, sub_dt, J):
        self.lam = lam
        self.n_segments = n_segments
        self.n_sub = n_sub
        self.sub_dt = sub_dt
        self.J = J

    def __call__(self, pts):
        out = np.empty((self.n_segments + 1,) + pts.shape)
        s = pts.copy()
        out[0] = s
        for k in range(self.n_segments):
            for _ in range(self.n_sub):
                s = rk4_step(s, self.sub_dt, self.lam, self.J)
            out[k + 1] = s
        return out


def ensemble_c_series(origin: PhasePoint, N: int, lam: float, T: float,
                      dt_sample: float = 0.01, M: int = 10000, seed: int = 0,
                      dt: float = 1e-4, J: float = DEFAULT_J, workers: int = 1):
    """Ensemble condensate fraction sampled through the window [0, T].

    Returns (times, c, stderr). The integrator step is rounded so that an
    integer number of steps lands exactly on each sample time.
    """
    times = sample_times(T, dt_sample)
    ens = sample_husimi(origin, N, M, seed)
    n_segments = times.size - 1
    n_sub = max(1, int(round(dt_sample / dt)))
    sub_dt = dt_sample / n_sub
    snaps = _map_point_chunks(
        _SeriesSnapshots(lam, n_segments, n_sub, sub_dt, J), ens.points, workers
    )
    cs = np.empty(times.size)
    ses = np.empty(times.size)
    for k in range(times.size):
        frame = Ensemble(points=snaps[k], origin=origin, N=N, seed=seed)
        cs[k] = ensemble_condensate_fraction(frame)
        ses[k] = ensemble_c_stderr(frame)
    return times, cs, ses


def lida_min_c_window(origin: PhasePoint, N: int, lam: float, window: float,
                      dt_sample: float = 0.01, M: int = 10000, seed: int = 0,
                      dt: float = 1e-4, J: float = DEFAULT_J, workers: int = 1) -> float:
    """Minimum ensemble condensate fraction over the sampled window [0, window]."""
    _, cs, _ = ensemble_c_series(origin, N, lam, window, dt_sample, M, seed, dt, J, workers)
    return float(np.min(cs))
