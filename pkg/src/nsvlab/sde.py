"""Ensemble simulation of torus-valued semimartingales.

Three path classes are provided: Euler-Maruyama drift-diffusion with
isotropic noise sqrt(2 nu) dw, a Heun (Stratonovich midpoint) scheme driven
by the divergence-free trigonometric frame, and the one-dimensional pinned
bridge with its singular drift.  Every ensemble records the exact drift
inserted at each grid time together with the Brownian increments, so all
action and residual estimators downstream are pure folds over stored data.

Randomness is counter-based: path n draws from Philox keyed by the master
seed with the fourth counter word set to n.  Streams are therefore
independent of scheduling and worker count, and identical (seed, N, M,
params) reproduce ensembles bitwise.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .estimates import EstimateWithError
from .fields import FourierScalarField, SpectralBasis, TWO_PI
from .flows import TimeDependentVelocity

KIND_CODES = {"ito": 1, "stratonovich_basis": 2, "bridge": 3}
_KIND_NAMES = {v: k for k, v in KIND_CODES.items()}

FORWARD = "forward"
REVERSED = "reversed"


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based stream for one path: Philox(key=seed, counter word 3 = n)."""
    bg = np.random.Philox(key=np.uint64(seed), counter=[0, 0, 0, path_index])
    return np.random.Generator(bg)


@dataclass
class SdeParams:
    """Simulation inputs: diffusivity, horizon, initial law, drift source.

    initial_law is "uniform", ("fixed", point) or ("product", (inv_cdf_1,
    inv_cdf_2)) where each inv_cdf maps Uniform[0,1) draws to [0, 2pi).
    orientation selects drift +u(t, x) (forward) or -u(T - t, x) (reversed).
    """

    nu: float
    T: float
    initial_law: object = "uniform"
    drift_source: TimeDependentVelocity | None = None
    orientation: str = FORWARD

    def __post_init__(self):
        if self.nu <= 0 or self.T <= 0:
            raise ValueError("nu and T must be positive")
        if self.orientation not in (FORWARD, REVERSED):
            raise ValueError("orientation must be 'forward' or 'reversed'")
        if self.drift_source is not None and self.drift_source.T < self.T - 1e-12:
            raise ValueError("drift source not defined on all of [0, T]")

    def drift_time(self, t: float) -> float:
        return t if self.orientation == FORWARD else self.T - t

    def drift_sign(self) -> float:
        return 1.0 if self.orientation == FORWARD else -1.0


@dataclass
class PathEnsemble:
    """N discrete-time semimartingale paths with recorded drifts and noise.

    unwrapped carries the lifted R^d positions; wrapped (mod 2pi) is derived
    on demand so the two can never disagree.  drift[n, j] is the exact drift
    vector inserted at grid time t_j; dW[n, j] are the Brownian increments
    used for the step t_j -> t_{j+1} (variance dt per channel).
    """

    kind: str
    nu: float | None
    dt: float
    seed: int
    unwrapped: np.ndarray  # (N, M+1, dim)
    drift: np.ndarray      # (N, M+1, dim)
    dW: np.ndarray         # (N, M, channels)
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.unwrapped.shape[0]

    @property
    def n_steps(self) -> int:
        return self.unwrapped.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.unwrapped.shape[2]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    @property
    def wrapped(self) -> np.ndarray:
        return np.mod(self.unwrapped, TWO_PI)

    def step_index(self, t: float) -> int:
        j = int(round(t / self.dt))
        if not 0 <= j <= self.n_steps:
            raise ValueError(f"time {t} outside the simulated horizon")
        return j


def _draw_initial(rng: np.random.Generator, initial_law, dim: int) -> np.ndarray:
    if isinstance(initial_law, str) and initial_law == "uniform":
        return rng.uniform(0.0, TWO_PI, dim)
    tag = initial_law[0]
    if tag == "fixed":
        return np.asarray(initial_law[1], dtype=float).copy()
    if tag == "product":
        u = rng.uniform(0.0, 1.0, dim)
        return np.array([initial_law[1][d](u[d]) for d in range(dim)])
    raise ValueError(f"unknown initial law {initial_law!r}")


def _draw_noise(
    seed: int, N: int, M: int, channels: int, dt: float, initial_law, dim: int,
    antithetic: bool = False,
):
    """Per-path counter-based draws: initial position first, then increments.

    With antithetic pairing, odd-indexed paths share the even partner's
    initial position and carry its negated increments.
    """
    if antithetic and N % 2:
        raise ValueError("antithetic pairing requires an even path count")
    starts = np.empty((N, dim))
    dW = np.empty((N, M, channels))
    root = np.sqrt(dt)
    for n in range(N):
        if antithetic and n % 2:
            starts[n] = starts[n - 1]
            dW[n] = -dW[n - 1]
            continue
        rng = path_rng(seed, n)
        starts[n] = _draw_initial(rng, initial_law, dim)
        dW[n] = rng.standard_normal((M, channels)) * root
    return starts, dW


def _check_finite(pos: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(pos)):
        raise FloatingPointError(f"non-finite state at step {step}")


def simulate_ito(
    params: SdeParams, N: int, M: int, seed: int = 42, antithetic: bool = False
) -> PathEnsemble:
    """Euler-Maruyama for dg = drift(t, g) dt + sqrt(2 nu) dw on the torus."""
    dt = params.T / M
    dim = 2
    starts, dW = _draw_noise(seed, N, M, dim, dt, params.initial_law, dim, antithetic)
    sig = np.sqrt(2.0 * params.nu)
    sign = params.drift_sign()
    src = params.drift_source

    pos = starts.copy()
    unwrapped = np.empty((N, M + 1, dim))
    drift = np.empty((N, M + 1, dim))
    for j in range(M + 1):
        t = j * dt
        unwrapped[:, j] = pos
        if src is None:
            drift[:, j] = 0.0
        else:
            drift[:, j] = sign * src.velocity_at(params.drift_time(t), pos)
        if j < M:
            pos = pos + drift[:, j] * dt + sig * dW[:, j]
            _check_finite(pos, j + 1)
    return PathEnsemble(
        kind="ito",
        nu=params.nu,
        dt=dt,
        seed=seed,
        unwrapped=unwrapped,
        drift=drift,
        dW=dW,
        meta={"orientation": params.orientation, "T": params.T, "antithetic": antithetic},
    )


def simulate_stratonovich_basis(
    params: SdeParams, basis: SpectralBasis, N: int, M: int, seed: int = 42
) -> PathEnsemble:
    """Heun steps for the Stratonovich frame-noise equation.

    Channels are ordered (cosine fields, then sine fields) over the basis
    half-lattice.  Each frame field is scaled by sqrt(2) so the generator
    carries nu * Laplace exactly as the Ito engine does; the pointwise frame
    identity supplies the remaining nu.  The frame's self-advection sums to
    zero, so the recorded drift is the plain transport velocity.
    """
    if basis.nu != params.nu:
        raise ValueError("basis diffusivity must match params.nu")
    dt = params.T / M
    dim = 2
    m = basis.n_modes
    starts, dW = _draw_noise(seed, N, M, 2 * m, dt, params.initial_law, dim)
    src = params.drift_source
    sqrt2 = np.sqrt(2.0)

    def transport(t: float, x: np.ndarray) -> np.ndarray:
        if src is None:
            return np.zeros_like(x)
        return src.velocity_at(t, x)

    pos = starts.copy()
    unwrapped = np.empty((N, M + 1, dim))
    drift = np.empty((N, M + 1, dim))
    for j in range(M + 1):
        t = j * dt
        unwrapped[:, j] = pos
        uj = transport(t, pos)
        drift[:, j] = uj
        if j < M:
            dwc, dws = dW[:, j, :m], dW[:, j, m:]
            disp0 = sqrt2 * basis.noise_displacement(pos, dwc, dws)
            pred = pos + disp0 + uj * dt
            disp1 = sqrt2 * basis.noise_displacement(pred, dwc, dws)
            u1 = transport(t + dt, pred)
            pos = pos + 0.5 * (disp0 + disp1) + 0.5 * (uj + u1) * dt
            _check_finite(pos, j + 1)
    return PathEnsemble(
        kind="stratonovich_basis",
        nu=params.nu,
        dt=dt,
        seed=seed,
        unwrapped=unwrapped,
        drift=drift,
        dW=dW,
        meta={"T": params.T, "beta": basis.beta, "basis_K": basis.K},
    )


def resimulate_from_noise(ens: PathEnsemble, params: SdeParams, j_max: int | None = None) -> np.ndarray:
    """Re-run the Ito recursion from stored increments; returns positions.

    Used by the adaptedness check: the prefix up to any step is a function of
    the stored noise prefix alone.
    """
    if ens.kind != "ito":
        raise ValueError("resimulation is defined for the ito engine")
    M = ens.n_steps if j_max is None else j_max
    dt = ens.dt
    sig = np.sqrt(2.0 * ens.nu)
    sign = params.drift_sign()
    src = params.drift_source
    pos = ens.unwrapped[:, 0].copy()
    out = np.empty((ens.n_paths, M + 1, ens.dim))
    for j in range(M + 1):
        out[:, j] = pos
        if j < M:
            if src is None:
                d = 0.0
            else:
                d = sign * src.velocity_at(params.drift_time(j * dt), pos)
            pos = pos + d * dt + sig * ens.dW[:, j]
    return out


def brownian_bridge(
    x: float, y: float, N: int, M: int, cutoff: float, seed: int = 42
) -> PathEnsemble:
    """Pinned one-dimensional bridge dg = dw - (g - y)/(1 - t) dt on [0, 1 - cutoff]."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    T = 1.0 - cutoff
    dt = T / M
    dW = np.empty((N, M, 1))
    root = np.sqrt(dt)
    for n in range(N):
        dW[n] = path_rng(seed, n).standard_normal((M, 1)) * root
    pos = np.full((N, 1), float(x))
    unwrapped = np.empty((N, M + 1, 1))
    drift = np.empty((N, M + 1, 1))
    for j in range(M + 1):
        t = j * dt
        unwrapped[:, j] = pos
        drift[:, j] = -(pos - y) / (1.0 - t)
        if j < M:
            pos = pos + drift[:, j] * dt + dW[:, j]
            _check_finite(pos, j + 1)
    return PathEnsemble(
        kind="bridge",
        nu=None,
        dt=dt,
        seed=seed,
        unwrapped=unwrapped,
        drift=drift,
        dW=dW,
        meta={"x": x, "y": y, "cutoff": cutoff, "T": T},
    )


# -- diagnostics ----------------------------------------------------------------


def measure_density(
    ens: PathEnsemble,
    noise_divergences: list,
    drift_divergence=None,
) -> np.ndarray:
    """Pushforward density K_t along each path, shape (N, M+1).

    noise_divergences[i] is a callable giving div of the i-th noise field at
    a batch of points (one per stored channel, in channel order), and
    drift_divergence the same for the drift field.  The Stratonovich
    integrals use midpoint values of the integrand against the stored
    increments, the drift part a trapezoidal time integral.  All-solenoidal
    inputs make every exponent identically zero, hence K = 1 exactly.
    """
    N, Mp1, _ = ens.unwrapped.shape
    M = Mp1 - 1
    exponent = np.zeros((N, Mp1))
    pos = ens.unwrapped
    for i, div_i in enumerate(noise_divergences):
        vals = np.stack([div_i(pos[:, j]) for j in range(Mp1)], axis=1)  # (N, M+1)
        mid = 0.5 * (vals[:, :-1] + vals[:, 1:])
        exponent[:, 1:] += np.cumsum(mid * ens.dW[:, :, i], axis=1)
    if drift_divergence is not None:
        vals = np.stack([drift_divergence(pos[:, j]) for j in range(Mp1)], axis=1)
        mid = 0.5 * (vals[:, :-1] + vals[:, 1:])
        exponent[:, 1:] += np.cumsum(mid * ens.dt, axis=1)
    return np.exp(-exponent)


def drift_orthogonality(
    ens: PathEnsemble, f: FourierScalarField, t: float
) -> EstimateWithError:
    """Monte Carlo estimate of E <grad f(g_t), D_t g> at one grid time."""
    j = ens.step_index(t)
    grads = f.gradient_at(ens.unwrapped[:, j])
    samples = np.sum(grads * ens.drift[:, j], axis=1)
    return EstimateWithError.from_samples(samples)


# -- persistence ------------------------------------------------------------------

_MAGIC = b"NSVLENS1"


def save_ensemble(ens: PathEnsemble, stem: str) -> tuple[str, str]:
    """Columnar little-endian binary plus a JSON sidecar; bit-exact round trip."""
    bin_path, json_path = stem + ".bin", stem + ".json"
    N, Mp1, dim = ens.unwrapped.shape
    M = Mp1 - 1
    C = ens.dW.shape[2]
    with open(bin_path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<QQdQQQQ", N, M, ens.dt, ens.seed, KIND_CODES[ens.kind], dim, C
            )
        )
        wrapped = ens.wrapped
        for j in range(Mp1):
            fh.write(wrapped[:, j].astype("<f8").tobytes())
            fh.write(ens.unwrapped[:, j].astype("<f8").tobytes())
            fh.write(ens.drift[:, j].astype("<f8").tobytes())
            if j < M:
                fh.write(ens.dW[:, j].astype("<f8").tobytes())
            else:
                fh.write(np.zeros((N, C), dtype="<f8").tobytes())
    sidecar = {
        "kind": ens.kind,
        "nu": ens.nu,
        "dt": ens.dt,
        "seed": ens.seed,
        "N": N,
        "M": M,
        "dim": dim,
        "channels": C,
        "meta": ens.meta,
    }
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=1)
    return bin_path, json_path


def load_ensemble(stem: str) -> PathEnsemble:
    bin_path, json_path = stem + ".bin", stem + ".json"
    with open(json_path) as fh:
        sidecar = json.load(fh)
    with open(bin_path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError("not an ensemble file")
        N, M, dt, seed, kind_code, dim, C = struct.unpack("<QQdQQQQ", fh.read(56))
        unwrapped = np.empty((N, M + 1, dim))
        drift = np.empty((N, M + 1, dim))
        dW = np.empty((N, M, C))
        for j in range(M + 1):
            fh.read(N * dim * 8)  # wrapped block is derived data
            unwrapped[:, j] = np.frombuffer(fh.read(N * dim * 8), dtype="<f8").reshape(N, dim)
            drift[:, j] = np.frombuffer(fh.read(N * dim * 8), dtype="<f8").reshape(N, dim)
            block = np.frombuffer(fh.read(N * C * 8), dtype="<f8").reshape(N, C)
            if j < M:
                dW[:, j] = block
    return PathEnsemble(
        kind=_KIND_NAMES[int(kind_code)],
        nu=sidecar.get("nu"),
        dt=dt,
        seed=int(seed),
        unwrapped=unwrapped,
        drift=drift,
        dW=dW,
        meta=sidecar.get("meta", {}),
    )
