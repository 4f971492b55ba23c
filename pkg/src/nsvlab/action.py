"""Kinetic action, occupation samples, and weak-form momentum residuals.

The action of an ensemble is half the expected time integral of the squared
recorded drift.  Per-path time integrals are always formed first and only
then averaged across paths (Rao-Blackwellization over time), so standard
errors honestly reflect between-path variability.

Residuals come in two flavors that must agree in the large-sample limit:
a Monte Carlo pairing of the occupation samples (t, x, v) against a test
field/profile pair, and a deterministic space-time quadrature of the same
integrand against a velocity history.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimates import EstimateWithError
from .fields import FourierVectorField, SpectralBasis, deformation_laplacian
from .flows import TimeDependentVelocity
from .sde import PathEnsemble


@dataclass
class TestPair:
    """Divergence-free test field w with a smooth profile vanishing at 0 and T."""

    __test__ = False  # not a pytest collection target

    name: str
    w: FourierVectorField
    alpha: Callable[[np.ndarray], np.ndarray]
    dalpha: Callable[[np.ndarray], np.ndarray]
    T: float

    def __post_init__(self):
        if not self.w.is_divergence_free(tol=1e-10):
            raise ValueError("test field must be divergence-free")
        for t in (0.0, self.T):
            if abs(float(self.alpha(np.asarray(t)))) > 1e-12:
                raise ValueError("profile must vanish at both endpoints")


def default_test_bank(basis: SpectralBasis, T: float) -> list[TestPair]:
    """Six fixed pairs: three frame fields crossed with two sine profiles."""
    fields = [
        ("A10", basis.basis_field((1, 0), "cos")),
        ("B11", basis.basis_field((1, 1), "sin")),
        ("A21", basis.basis_field((2, 1), "cos")),
    ]
    profiles = [
        ("sin1", lambda t: np.sin(np.pi * t / T), lambda t: (np.pi / T) * np.cos(np.pi * t / T)),
        ("sin2", lambda t: np.sin(2 * np.pi * t / T), lambda t: (2 * np.pi / T) * np.cos(2 * np.pi * t / T)),
    ]
    return [
        TestPair(f"{fn}x{pn}", w, a, da, T)
        for fn, w in fields
        for pn, a, da in profiles
    ]


@dataclass
class OccupationSet:
    """Samples (t, x, v) of the occupation measure, laid out path-major.

    x is wrapped to [0, 2pi)^2 and v is the recorded drift at that grid time.
    n_paths and n_times allow estimators to re-group samples by path.
    """

    t: np.ndarray  # (n_paths * n_times,)
    x: np.ndarray  # (n_paths * n_times, dim)
    v: np.ndarray  # (n_paths * n_times, dim)
    n_paths: int
    n_times: int

    def __len__(self) -> int:
        return self.t.size

    def __iter__(self):
        for i in range(len(self)):
            yield (self.t[i], self.x[i], self.v[i])


def occupation_measure(ens: PathEnsemble, thin: int = 1) -> OccupationSet:
    """Emit (t_j, g_{t_j}, D_{t_j} g) for strided grid times across all paths."""
    if thin < 1:
        raise ValueError("stride must be at least 1")
    idx = np.arange(0, ens.n_steps + 1, thin)
    times = ens.times[idx]
    x = ens.wrapped[:, idx].reshape(-1, ens.dim)
    v = ens.drift[:, idx].reshape(-1, ens.dim)
    t = np.tile(times, ens.n_paths)
    return OccupationSet(t, x, v, ens.n_paths, idx.size)


def action(ens: PathEnsemble) -> EstimateWithError:
    """Kinetic action: half the mean over paths of int |drift|^2 dt (trapezoid)."""
    speed2 = np.sum(ens.drift**2, axis=2)
    per_path = 0.5 * np.trapezoid(speed2, dx=ens.dt, axis=1)
    return EstimateWithError.from_samples(per_path)


def action_prefixes(ens: PathEnsemble, step_indices) -> list[EstimateWithError]:
    """Actions of the truncated paths up to each requested grid index.

    Shares one ensemble across nested horizons, which is what makes the
    pinned-bridge divergence increments comparable at small variance.
    """
    speed2 = np.sum(ens.drift**2, axis=2)
    seg = 0.5 * 0.5 * (speed2[:, :-1] + speed2[:, 1:]) * ens.dt
    cum = np.concatenate([np.zeros((ens.n_paths, 1)), np.cumsum(seg, axis=1)], axis=1)
    return [EstimateWithError.from_samples(cum[:, int(j)]) for j in step_indices]


def _pair_integrand(samples: OccupationSet, pair: TestPair, nu: float) -> np.ndarray:
    w_vals = pair.w.evaluate_at(samples.x)
    grad_w = pair.w.gradient_at(samples.x)
    box_w = deformation_laplacian(pair.w).evaluate_at(samples.x)
    a = pair.alpha(samples.t)
    da = pair.dalpha(samples.t)
    v = samples.v
    term_dt = da * np.sum(v * w_vals, axis=1)
    term_adv = a * np.einsum("na,nab,nb->n", v, grad_w, v)
    term_visc = nu * a * np.sum(v * box_w, axis=1)
    return term_dt + term_adv - term_visc


def dpm_residual(samples: OccupationSet, pair: TestPair, nu: float) -> EstimateWithError:
    """Monte Carlo residual of the occupation measure against one test pair.

    Reported in the time-integrated normalization (multiplied by T), matching
    weak_ns_residual, so the two estimators are directly comparable.  Samples
    are reduced within each path before the cross-path mean, otherwise the
    standard error would ignore within-path correlation.  The within-path
    reduction uses trapezoid weights over the sampled grid times: a flat mean
    would overweight the endpoints, where the alpha' part of the integrand
    does not vanish, by O(dt).
    """
    if samples.n_times < 2:
        raise ValueError("need at least two sampled times per path")
    vals = _pair_integrand(samples, pair, nu).reshape(samples.n_paths, samples.n_times)
    span = samples.t[samples.n_times - 1] - samples.t[0]
    per_path = np.trapezoid(vals, dx=span / (samples.n_times - 1), axis=1) * pair.T / span
    return EstimateWithError.from_samples(per_path)


def first_variation_direct(ens: PathEnsemble, pair: TestPair, nu: float) -> EstimateWithError:
    """Analytic Gateaux derivative of the action along one test pair.

    Per path, the trapezoidal time integral of

        alpha'(t) w(g_t).D_t g + alpha(t) (grad_{D_t g} w)(g_t).D_t g
        - nu alpha(t) (2 Def*Def w)(g_t).D_t g
    """
    pts = ens.unwrapped.reshape(-1, ens.dim)
    w_vals = pair.w.evaluate_at(pts)
    grad_w = pair.w.gradient_at(pts)
    box_w = deformation_laplacian(pair.w).evaluate_at(pts)
    v = ens.drift.reshape(-1, ens.dim)
    t = np.tile(ens.times, ens.n_paths)
    shape = (ens.n_paths, ens.n_steps + 1)
    integrand = (
        pair.dalpha(t) * np.sum(v * w_vals, axis=1)
        + pair.alpha(t) * np.einsum("na,nab,nb->n", v, grad_w, v)
        - nu * pair.alpha(t) * np.sum(v * box_w, axis=1)
    ).reshape(shape)
    per_path = np.trapezoid(integrand, dx=ens.dt, axis=1)
    return EstimateWithError.from_samples(per_path)


_SAMPLES_MAGIC = b"NSVLOCC1"


def save_samples(samples: OccupationSet, path: str) -> str:
    """Stream occupation samples to the columnar little-endian binary layout."""
    import struct

    dim = samples.x.shape[1]
    with open(path, "wb") as fh:
        fh.write(_SAMPLES_MAGIC)
        fh.write(struct.pack("<QQQ", samples.n_paths, samples.n_times, dim))
        fh.write(samples.t.astype("<f8").tobytes())
        fh.write(samples.x.astype("<f8").tobytes())
        fh.write(samples.v.astype("<f8").tobytes())
    return path


def load_samples(path: str) -> OccupationSet:
    import struct

    with open(path, "rb") as fh:
        if fh.read(8) != _SAMPLES_MAGIC:
            raise ValueError("not an occupation-sample file")
        n_paths, n_times, dim = struct.unpack("<QQQ", fh.read(24))
        n = n_paths * n_times
        t = np.frombuffer(fh.read(n * 8), dtype="<f8").copy()
        x = np.frombuffer(fh.read(n * dim * 8), dtype="<f8").reshape(n, dim).copy()
        v = np.frombuffer(fh.read(n * dim * 8), dtype="<f8").reshape(n, dim).copy()
    return OccupationSet(t, x, v, int(n_paths), int(n_times))


def weak_ns_residual(u: TimeDependentVelocity, pair: TestPair) -> float:
    """Deterministic weak-form residual of a velocity history.

        int_0^T [ alpha' <u, w> + alpha <u, (grad w) u> - nu alpha <u, 2Def*Def w> ] dt

    Spatial pairings are exact: the linear terms by Parseval, the cubic term
    by an equal-weight grid average fine enough to integrate the trig
    polynomial exactly.  Time integration is trapezoidal on the frame grid.
    """
    w = pair.w
    box_w = deformation_laplacian(w)
    lin_w = np.stack([f.l2_inner(w.with_truncation(f.K)) for f in u.frames])
    lin_box = np.stack([f.l2_inner(box_w.with_truncation(f.K)) for f in u.frames])
    n = 2 * u.K + w.K + 2  # integrand degree is 2 K_u + K_w per axis
    U = u.frame_grid_stack(n)
    xs = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    grid_pts = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    J = w.gradient_at(grid_pts).reshape(n, n, 2, 2)
    cubic = np.einsum("txya,xyab,txyb->t", U, J, U) / (n * n)
    t = u.times
    integrand = pair.dalpha(t) * lin_w + pair.alpha(t) * (cubic - u.nu * lin_box)
    return float(np.trapezoid(integrand, t))
