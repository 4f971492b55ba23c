"""Reference velocity/pressure pairs: the exact decaying vortex and a small
pseudo-spectral incompressible solver on the 2-torus.

The solver advances the Leray-projected momentum equation

    du/dt = -P[(u.grad)u] - nu * (2 Def*Def) u

with classical RK4 in time.  Nonlinear products are formed on a padded grid
and truncated back to |k|_inf <= K, which removes every aliased quadratic
interaction (2/3-style dealiasing with extra margin).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .fields import (
    FourierScalarField,
    FourierVectorField,
    SpectralError,
    _wavegrid,
    leray_project,
    vector_laplacian,
)

UNIFORM_TOL = 1e-12


def _dealias_grid_size(K: int) -> int:
    # quadratic products reach wavenumber 2K; keeping only |k| <= K is
    # alias-free once the working grid has n >= 3K + 1 points per axis
    return max(3 * K + 2, 8)


def advection_field(u: FourierVectorField) -> FourierVectorField:
    """(u . grad) u as a truncated spectral field (dealiased product)."""
    n = _dealias_grid_size(u.K)
    U = u.to_grid(n)
    k1, k2 = _wavegrid(u.K)
    idx = np.arange(-u.K, u.K + 1) % n
    # spectral derivatives of each component on the padded grid
    spec = np.zeros((n, n, 2), dtype=complex)
    spec[np.ix_(idx, idx)] = u.coeffs
    kk1 = np.fft.fftfreq(n, d=1.0 / n)[:, None]
    kk2 = np.fft.fftfreq(n, d=1.0 / n)[None, :]
    adv = np.empty_like(U)
    for a in range(2):
        da1 = np.real(np.fft.ifft2(1j * kk1 * spec[..., a])) * n * n
        da2 = np.real(np.fft.ifft2(1j * kk2 * spec[..., a])) * n * n
        adv[..., a] = U[..., 0] * da1 + U[..., 1] * da2
    ahat = np.fft.fft2(adv, axes=(0, 1)) / (n * n)
    out = ahat[np.ix_(idx, idx)]
    return FourierVectorField(u.K, out)


def ns_rhs(u: FourierVectorField, nu: float) -> FourierVectorField:
    return leray_project(advection_field(u) * -1.0) - vector_laplacian(u) * nu


def ns_step(state: FourierVectorField, nu: float, dt: float) -> FourierVectorField:
    """One explicit RK4 step of the Leray-projected spectral momentum equation."""
    if dt <= 0:
        raise SpectralError("dt must be positive")
    k1 = ns_rhs(state, nu)
    k2 = ns_rhs(state + k1 * (dt / 2.0), nu)
    k3 = ns_rhs(state + k2 * (dt / 2.0), nu)
    k4 = ns_rhs(state + k3 * dt, nu)
    out = state + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0)
    if not np.all(np.isfinite(out.coeffs)):
        raise FloatingPointError("spectral solver blew up: non-finite coefficient")
    return out


def pressure_from_velocity(u: FourierVectorField) -> FourierScalarField:
    """Solve Laplace p = -div((u.grad)u) spectrally, zero-mean gauge."""
    if not u.is_divergence_free(tol=1e-10):
        raise SpectralError("pressure solve requires a divergence-free velocity")
    adv = advection_field(u)
    k1, k2 = _wavegrid(u.K)
    ksq = k1 * k1 + k2 * k2
    ksq_safe = np.where(ksq == 0, 1.0, ksq)
    p_hat = 1j * (k1 * adv.coeffs[..., 0] + k2 * adv.coeffs[..., 1]) / ksq_safe
    p_hat[u.K, u.K] = 0.0
    return FourierScalarField(u.K, p_hat)


def hessian_bound(p: FourierScalarField, n: int = 128) -> float:
    """Largest eigenvalue of grad^2 p over an n x n grid (lower bound of sup)."""
    K = p.K
    if n < 2 * K + 1:
        raise SpectralError("grid too coarse for the stored modes")
    k1, k2 = _wavegrid(K)
    idx = np.arange(-K, K + 1) % n

    def grid_of(mult):
        spec = np.zeros((n, n), dtype=complex)
        spec[np.ix_(idx, idx)] = mult * p.coeffs
        return np.real(np.fft.ifft2(spec)) * n * n

    h11 = grid_of(-k1 * k1)
    h22 = grid_of(-k2 * k2)
    h12 = grid_of(-k1 * k2)
    lam = 0.5 * (h11 + h22) + np.sqrt(0.25 * (h11 - h22) ** 2 + h12**2)
    return float(np.max(lam))


@dataclass
class TimeDependentVelocity:
    """Velocity frames u(t_j) with pressure companions on a uniform time grid.

    Frames are solenoidal by contract; negative-control experiments that
    deliberately feed gradient drifts construct with validate_divergence_free
    disabled.
    """

    times: np.ndarray
    frames: list[FourierVectorField]
    pressures: list[FourierScalarField]
    nu: float
    validate_divergence_free: bool = True
    _compiled: tuple | None = field(default=None, init=False, repr=False, compare=False)
    _pressure_compiled: tuple | None = field(default=None, init=False, repr=False, compare=False)
    _grid_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.frames) != self.times.size:
            raise SpectralError("one frame per grid time required")
        steps = np.diff(self.times)
        if steps.size and np.max(np.abs(steps - steps[0])) > UNIFORM_TOL:
            raise SpectralError("time grid must be uniform")
        for p in self.pressures:
            if abs(p.mean) > UNIFORM_TOL:
                raise SpectralError("pressure frames must have zero mean")
        if self.validate_divergence_free:
            for j, f in enumerate(self.frames):
                if not f.is_divergence_free(tol=1e-10):
                    raise SpectralError(f"frame {j} is not divergence-free")

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def K(self) -> int:
        return self.frames[0].K

    def check_divergence_free(self, tol: float = 1e-10) -> bool:
        return all(f.is_divergence_free(tol) for f in self.frames)

    # -- compact views for fast path evaluation ------------------------------

    def _compile(self):
        """Stack active half-lattice modes shared by all frames."""
        if self._compiled is None:
            K = self.K
            k1, k2 = _wavegrid(K)
            half = (k1 > 0) | ((k1 == 0) & (k2 > 0))
            active = np.zeros_like(half)
            for f in self.frames:
                active |= np.abs(f.coeffs).max(axis=-1) > 0
            active &= half
            kv = np.stack([k1[active], k2[active]], axis=-1)
            stack = np.stack([f.coeffs[active] for f in self.frames])
            means = np.stack([f.mean for f in self.frames])
            self._compiled = (kv, stack, means)
        return self._compiled

    def _interp(self, s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Linear-in-coefficients interpolation at time s (clamped to [0, T])."""
        kv, stack, means = self._compile()
        M = self.times.size - 1
        if M == 0:
            return kv, stack[0], means[0]
        dt = self.times[1] - self.times[0]
        x = np.clip(s, 0.0, self.T) / dt
        j = min(int(np.floor(x)), M - 1)
        w = x - j
        return kv, (1.0 - w) * stack[j] + w * stack[j + 1], (1.0 - w) * means[j] + w * means[j + 1]

    def velocity_at(self, s: float, points: np.ndarray) -> np.ndarray:
        kv, cf, mn = self._interp(s)
        if kv.shape[0] == 0:
            return np.broadcast_to(mn, (points.shape[0], 2)).copy()
        ph = points @ kv.T
        return mn + 2.0 * (
            np.einsum("nm,mc->nc", np.cos(ph), cf.real)
            - np.einsum("nm,mc->nc", np.sin(ph), cf.imag)
        )

    def velocity_gradient_at(self, s: float, points: np.ndarray) -> np.ndarray:
        kv, cf, _ = self._interp(s)
        if kv.shape[0] == 0:
            return np.zeros((points.shape[0], 2, 2))
        ph = points @ kv.T
        return -2.0 * (
            np.einsum("nm,ma,mb->nab", np.sin(ph), cf.real, kv)
            + np.einsum("nm,ma,mb->nab", np.cos(ph), cf.imag, kv)
        )

    def _compile_pressure(self):
        if self._pressure_compiled is None:
            K = self.K
            k1, k2 = _wavegrid(K)
            half = (k1 > 0) | ((k1 == 0) & (k2 > 0))
            active = np.zeros_like(half)
            for p in self.pressures:
                active |= np.abs(p.coeffs) > 0
            active &= half
            kv = np.stack([k1[active], k2[active]], axis=-1)
            stack = np.stack([p.coeffs[active] for p in self.pressures])
            self._pressure_compiled = (kv, stack)
        return self._pressure_compiled

    def pressure_at(self, s: float, points: np.ndarray) -> np.ndarray:
        if not self.pressures:
            return np.zeros(points.shape[0])
        kv, stack = self._compile_pressure()
        M = self.times.size - 1
        dt = self.times[1] - self.times[0]
        x = np.clip(s, 0.0, self.T) / dt
        j = min(int(np.floor(x)), M - 1)
        w = x - j
        cf = (1.0 - w) * stack[j] + w * stack[j + 1]
        if kv.shape[0] == 0:
            return np.zeros(points.shape[0])
        ph = points @ kv.T
        return 2.0 * (np.cos(ph) @ cf.real - np.sin(ph) @ cf.imag)

    def pressure_gradient_at(self, s: float, points: np.ndarray) -> np.ndarray:
        if not self.pressures:
            return np.zeros((points.shape[0], 2))
        kv, stack = self._compile_pressure()
        M = self.times.size - 1
        dt = self.times[1] - self.times[0]
        x = np.clip(s, 0.0, self.T) / dt
        j = min(int(np.floor(x)), M - 1)
        w = x - j
        cf = (1.0 - w) * stack[j] + w * stack[j + 1]
        if kv.shape[0] == 0:
            return np.zeros((points.shape[0], 2))
        ph = points @ kv.T
        return -2.0 * (
            np.einsum("nm,mb->nb", np.sin(ph), kv * cf.real[:, None])
            + np.einsum("nm,mb->nb", np.cos(ph), kv * cf.imag[:, None])
        )

    def frame_grid_stack(self, n: int) -> np.ndarray:
        """Grid values of every frame, cached per grid size."""
        if n not in self._grid_cache:
            K = self.K
            idx = np.arange(-K, K + 1) % n
            spec = np.zeros((len(self.frames), n, n, 2), dtype=complex)
            coeffs = np.stack([f.coeffs for f in self.frames])
            spec[:, idx[:, None], idx[None, :], :] = coeffs
            self._grid_cache[n] = np.real(np.fft.ifft2(spec, axes=(1, 2))) * n * n
        return self._grid_cache[n]

    # -- persistence ----------------------------------------------------------

    def save(self, directory: str, name: str = "flow") -> str:
        os.makedirs(directory, exist_ok=True)
        frame_files = []
        for j, f in enumerate(self.frames):
            fn = f"{name}_frame_{j:05d}.json"
            with open(os.path.join(directory, fn), "w") as fh:
                fh.write(f.to_json())
            frame_files.append(fn)
        pressure_files = []
        for j, p in enumerate(self.pressures):
            fn = f"{name}_pressure_{j:05d}.json"
            doc = {
                "K": p.K,
                "modes": [
                    {"k": [i - p.K, jj - p.K], "re": p.coeffs[i, jj].real, "im": p.coeffs[i, jj].imag}
                    for i in range(2 * p.K + 1)
                    for jj in range(2 * p.K + 1)
                    if p.coeffs[i, jj] != 0
                ],
            }
            with open(os.path.join(directory, fn), "w") as fh:
                json.dump(doc, fh)
            pressure_files.append(fn)
        manifest = {
            "nu": self.nu,
            "times": self.times.tolist(),
            "frames": frame_files,
            "pressures": pressure_files,
        }
        path = os.path.join(directory, f"{name}_manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=1)
        return path

    @classmethod
    def load(cls, manifest_path: str) -> "TimeDependentVelocity":
        base = os.path.dirname(manifest_path)
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        frames = []
        for fn in manifest["frames"]:
            with open(os.path.join(base, fn)) as fh:
                frames.append(FourierVectorField.from_json(fh.read()))
        pressures = []
        for fn in manifest["pressures"]:
            with open(os.path.join(base, fn)) as fh:
                doc = json.load(fh)
            K = int(doc["K"])
            coeffs = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
            for m in doc["modes"]:
                coeffs[m["k"][0] + K, m["k"][1] + K] = m["re"] + 1j * m["im"]
            pressures.append(FourierScalarField(K, coeffs))
        return cls(np.asarray(manifest["times"]), frames, pressures, float(manifest["nu"]))


# -- canonical exact solution -------------------------------------------------


def _decaying_vortex_coeffs(K: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit-amplitude coefficients of (cos x1 sin x2, -sin x1 cos x2) and of
    the matching pressure -(cos 2x1 + cos 2x2)/4."""
    u = np.zeros((2 * K + 1, 2 * K + 1, 2), dtype=complex)
    # cos a sin b = [sin(a+b) - sin(a-b)]/2, sin(k.x) -> -+ i/2 at modes +-k
    u[K + 1, K + 1] = (-0.25j, 0.25j)
    u[K - 1, K - 1] = (0.25j, -0.25j)
    u[K + 1, K - 1] = (0.25j, 0.25j)
    u[K - 1, K + 1] = (-0.25j, -0.25j)
    p = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
    p[K + 2, K] = p[K - 2, K] = -0.125
    p[K, K + 2] = p[K, K - 2] = -0.125
    return u, p


def taylor_green(nu: float, T: float, M: int, K: int = 2) -> TimeDependentVelocity:
    """Exact decaying-vortex solution of the viscous momentum equation.

    u(t, x) = e^{-2 nu t} (cos x1 sin x2, -sin x1 cos x2)
    p(t, x) = -(e^{-4 nu t} / 4) (cos 2x1 + cos 2x2)
    """
    if nu <= 0:
        raise SpectralError("nu must be positive")
    if K < 2:
        raise SpectralError("K >= 2 required to hold the pressure modes")
    u0, p0 = _decaying_vortex_coeffs(K)
    times = np.linspace(0.0, T, M + 1)
    frames = [FourierVectorField(K, np.exp(-2.0 * nu * t) * u0) for t in times]
    pressures = [FourierScalarField(K, np.exp(-4.0 * nu * t) * p0) for t in times]
    return TimeDependentVelocity(times, frames, pressures, nu)


def steady_flow(
    u: FourierVectorField,
    T: float,
    M: int,
    nu: float,
    require_divergence_free: bool = True,
) -> TimeDependentVelocity:
    """Wrap a time-independent field as a velocity history.

    Negative controls deliberately feed non-solenoidal drifts through here,
    hence the escape hatch on the divergence check.
    """
    times = np.linspace(0.0, T, M + 1)
    frames = [u] * (M + 1)
    return TimeDependentVelocity(
        times, frames, [], nu, validate_divergence_free=require_divergence_free
    )


def solve_navier_stokes(
    u0: FourierVectorField, nu: float, T: float, M: int, with_pressure: bool = False
) -> TimeDependentVelocity:
    """March u0 forward with ns_step and collect frames (optionally pressures)."""
    dt = T / M
    frames = [u0]
    for _ in range(M):
        frames.append(ns_step(frames[-1], nu, dt))
    pressures = [pressure_from_velocity(f) for f in frames] if with_pressure else []
    return TimeDependentVelocity(np.linspace(0.0, T, M + 1), frames, pressures, nu)
