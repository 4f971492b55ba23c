"""Perturbations of stochastic Lagrangian ensembles and variational checks.

Covers the two perturbation-of-identity families (both reduce to the flow of
the test field for autonomous w), a finite-difference estimator of the
action's Gateaux derivative with common random numbers, the constructive
family of noise-sharing endpoint-pinned competitors, and the minimality and
mean-acceleration diagnostics for ensembles generated from a classical
solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .action import TestPair, first_variation_direct  # noqa: F401  (companion estimator)
from .estimates import EstimateWithError
from .fields import FourierVectorField, TWO_PI
from .flows import TimeDependentVelocity
from .sde import PathEnsemble, REVERSED


# -- perturbation flows --------------------------------------------------------


def flow_points(w: FourierVectorField, tau, points: np.ndarray, n_steps: int = 4) -> np.ndarray:
    """RK4 flow of dx/ds = w(x) over per-point horizons tau (scalar or array)."""
    x = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    tau = np.broadcast_to(np.asarray(tau, dtype=float), x.shape[:1])
    h = (tau / n_steps)[:, None]
    for _ in range(n_steps):
        k1 = w.evaluate_at(x)
        k2 = w.evaluate_at(x + 0.5 * h * k1)
        k3 = w.evaluate_at(x + 0.5 * h * k2)
        k4 = w.evaluate_at(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("perturbation flow produced non-finite values")
    return x


def flow_psi(pair: TestPair, eps: float, t, points: np.ndarray, n_steps: int = 4) -> np.ndarray:
    """Frozen-time perturbation: integrate alpha(t) w for parameter length eps.

    Equivalently the flow of w for time eps * alpha(t).
    """
    tau = eps * pair.alpha(np.asarray(t, dtype=float))
    return flow_points(pair.w, tau, points, n_steps)


def flow_phi(pair: TestPair, eps: float, t, points: np.ndarray, n_steps: int = 4) -> np.ndarray:
    """Moving-time perturbation dPhi/dt = eps alpha'(t) w(Phi), from Phi_0 = id.

    For an autonomous test field this coincides with flow_psi: integrating
    eps alpha'(s) w along s in [0, t] is the flow of w for time eps alpha(t).
    """
    return flow_psi(pair, eps, t, points, n_steps)


# -- finite-difference first variation ------------------------------------------


def _perturbed_action_per_path(
    ens: PathEnsemble,
    pair: TestPair,
    nu: float,
    eps: float,
    fd_h: float,
    n_flow_steps: int,
) -> np.ndarray:
    """Per-path action of the pushed-forward ensemble t -> Psi_eps^t(g_t).

    The perturbed drift is rebuilt from the flat-space pushforward rule

        D_t(Psi(g)) = dPsi/dt + (grad Psi) D_t g + nu * (componentwise Lap Psi)

    with every spatial derivative of the flow map taken by central finite
    differences of step fd_h around each sample (the time part is analytic:
    d/dt Psi_eps^t(x) = eps alpha'(t) w(Psi_eps^t(x))).
    """
    N, Mp1, dim = ens.unwrapped.shape
    pts = ens.unwrapped.reshape(-1, dim)
    t = np.tile(ens.times, N)
    tau = eps * pair.alpha(t)
    v = ens.drift.reshape(-1, dim)

    speed = np.linalg.norm(v, axis=1)
    unit = np.where(speed[:, None] > 0, v / np.maximum(speed, 1e-300)[:, None], 0.0)

    stencil = np.concatenate(
        [
            pts,
            pts + fd_h * unit,
            pts - fd_h * unit,
            pts + np.array([fd_h, 0.0]),
            pts - np.array([fd_h, 0.0]),
            pts + np.array([0.0, fd_h]),
            pts - np.array([0.0, fd_h]),
        ]
    )
    flowed = flow_points(pair.w, np.tile(tau, 7), stencil, n_flow_steps)
    base, dp, dm, e1p, e1m, e2p, e2m = np.split(flowed, 7)

    time_part = (eps * pair.dalpha(t))[:, None] * pair.w.evaluate_at(base)
    transport_part = speed[:, None] * (dp - dm) / (2.0 * fd_h)
    laplace_part = nu * (e1p + e1m + e2p + e2m - 4.0 * base) / fd_h**2
    drift_new = time_part + transport_part + laplace_part

    speed2 = np.sum(drift_new**2, axis=1).reshape(N, Mp1)
    return 0.5 * np.trapezoid(speed2, dx=ens.dt, axis=1)


def first_variation_fd(
    ens: PathEnsemble,
    pair: TestPair,
    nu: float,
    eps_list: tuple = (0.1, 0.05, 0.025),
    fd_h: float = 1e-3,
    n_flow_steps: int = 4,
    richardson_tol: float = 0.05,
) -> EstimateWithError:
    """Central-difference dS(Psi_eps(g))/d eps at eps = 0, Richardson refined.

    Common random numbers throughout: every epsilon reuses the same stored
    paths, so per-path derivative samples difference away most noise.  The
    two Richardson extrapolants from consecutive epsilon pairs must agree
    within richardson_tol relative to scale, else the step schedule is
    rejected as too coarse or too fine.
    """
    if len(eps_list) < 2:
        raise ValueError("need at least two epsilon levels")
    eps_list = sorted(eps_list, reverse=True)
    for a, b in zip(eps_list, eps_list[1:]):
        if abs(a / b - 2.0) > 1e-9:
            raise ValueError("epsilon schedule must halve at each level")
    central = {}
    for eps in eps_list:
        s_plus = _perturbed_action_per_path(ens, pair, nu, +eps, fd_h, n_flow_steps)
        s_minus = _perturbed_action_per_path(ens, pair, nu, -eps, fd_h, n_flow_steps)
        central[eps] = (s_plus - s_minus) / (2.0 * eps)
    extrapolants = [
        (4.0 * central[b] - central[a]) / 3.0 for a, b in zip(eps_list, eps_list[1:])
    ]
    best = EstimateWithError.from_samples(extrapolants[-1])
    if len(extrapolants) >= 2:
        prev = EstimateWithError.from_samples(extrapolants[-2])
        scale = max(abs(best.value), 3.0 * best.std_error, 1e-12)
        if abs(best.value - prev.value) > richardson_tol * scale + 3.0 * best.combined_se(prev):
            raise FloatingPointError(
                "Richardson extrapolants disagree; adjust the epsilon schedule"
            )
    return best


# -- endpoint-pinned competitors -------------------------------------------------


@dataclass
class PinnedPerturbation:
    """A noise-sharing competitor g* = g + displacement with pinned endpoints.

    v is the adapted velocity offset per (path, grid time); displacement is
    its running time integral, zero at t = 0 and t = T.  The competitor keeps
    the base ensemble's Brownian increments, so drifts simply add.
    """

    base: PathEnsemble
    v: np.ndarray            # (N, M+1, dim)
    displacement: np.ndarray  # (N, M+1, dim)

    def __post_init__(self):
        if self.v.shape != self.base.unwrapped.shape:
            raise ValueError("velocity offset shape mismatch")

    @property
    def unwrapped(self) -> np.ndarray:
        return self.base.unwrapped + self.displacement

    @property
    def wrapped(self) -> np.ndarray:
        return np.mod(self.unwrapped, TWO_PI)

    @property
    def drift(self) -> np.ndarray:
        return self.base.drift + self.v

    def endpoint_error(self) -> float:
        return float(np.max(np.abs(self.displacement[:, -1])))

    def action_per_path(self) -> np.ndarray:
        speed2 = np.sum(self.drift**2, axis=2)
        return 0.5 * np.trapezoid(speed2, dx=self.base.dt, axis=1)

    def offset_energy_per_path(self) -> np.ndarray:
        """Per-path int |v|^2 dt, the expected action gap times two."""
        return np.trapezoid(np.sum(self.v**2, axis=2), dx=self.base.dt, axis=1)

    def poincare_ratios(self) -> np.ndarray:
        """Per path: int |g*-g|^2 dt / ((T/pi)^2 int |D_t g* - D_t g|^2 dt)."""
        T = self.base.dt * self.base.n_steps
        num = np.trapezoid(np.sum(self.displacement**2, axis=2), dx=self.base.dt, axis=1)
        den = np.trapezoid(np.sum(self.v**2, axis=2), dx=self.base.dt, axis=1)
        den = (T / np.pi) ** 2 * den
        return num / np.where(den > 0, den, 1.0)

    @classmethod
    def from_velocity(cls, base: PathEnsemble, v: np.ndarray) -> "PinnedPerturbation":
        dt = base.dt
        seg = 0.5 * (v[:, :-1] + v[:, 1:]) * dt
        disp = np.concatenate(
            [np.zeros_like(v[:, :1]), np.cumsum(seg, axis=1)], axis=1
        )
        return cls(base, v, disp)


def sample_pinned_perturbation(
    base: PathEnsemble, alpha_fn: Callable[[np.ndarray], np.ndarray], direction
) -> PinnedPerturbation:
    """The constructive competitor built from a bounded functional of the noise.

    With I_t the running integral of alpha_fn along the path's Brownian
    driver, the displacement is sin(pi t / T) I_t times a fixed direction,
    whose derivative gives the adapted velocity offset

        v(w, t) = [ (pi/T) cos(pi t/T) I_t + sin(pi t/T) alpha_fn(w_t) ] a.

    The sine prefactor kills both endpoints exactly, so g* shares g's initial
    and final positions path by path.
    """
    N, Mp1, dim = base.unwrapped.shape
    a = np.asarray(direction, dtype=float)
    T = base.dt * base.n_steps
    t = base.times
    # Brownian driver reconstructed from the stored increments
    wpath = np.concatenate(
        [np.zeros((N, 1, base.dW.shape[2])), np.cumsum(base.dW, axis=1)], axis=1
    )
    avals = alpha_fn(wpath.reshape(-1, wpath.shape[2])).reshape(N, Mp1)
    seg = 0.5 * (avals[:, :-1] + avals[:, 1:]) * base.dt
    integral = np.concatenate([np.zeros((N, 1)), np.cumsum(seg, axis=1)], axis=1)
    beta = np.sin(np.pi * t / T)[None, :] * integral
    c = (np.pi / T) * np.cos(np.pi * t / T)[None, :] * integral + np.sin(np.pi * t / T)[None, :] * avals
    v = c[:, :, None] * a
    disp = beta[:, :, None] * a
    return PinnedPerturbation(base, v, disp)


DEFAULT_NOISE_FUNCTIONALS = (
    ("cos_w1", lambda w: np.cos(w[:, 0])),
    ("sin_w1pw2", lambda w: np.sin(w[:, 0] + w[:, 1])),
    ("tanh_w1", lambda w: np.tanh(w[:, 0])),
)


def pinned_family(base: PathEnsemble, count: int, seed: int = 0) -> list[tuple[str, PinnedPerturbation]]:
    """A reproducible batch of constructive competitors with random directions."""
    rng = np.random.default_rng(seed)
    members = []
    for i in range(count):
        name, fn = DEFAULT_NOISE_FUNCTIONALS[i % len(DEFAULT_NOISE_FUNCTIONALS)]
        angle = rng.uniform(0.0, TWO_PI)
        radius = rng.uniform(0.3, 1.0)
        a = radius * np.array([np.cos(angle), np.sin(angle)])
        members.append((f"{name}_{i}", sample_pinned_perturbation(base, fn, a)))
    return members


# -- minimality and acceleration diagnostics -------------------------------------


def _pressure_along(ens_positions: np.ndarray, times: np.ndarray, u: TimeDependentVelocity) -> np.ndarray:
    """Time-reversed pressure along paths: q(T - t_j, x_j) summed by trapezoid."""
    N, Mp1, _ = ens_positions.shape
    T = times[-1]
    vals = np.empty((N, Mp1))
    for j in range(Mp1):
        vals[:, j] = u.pressure_at(T - times[j], ens_positions[:, j])
    return np.trapezoid(vals, dx=times[1] - times[0], axis=1)


def minimality_check(
    ens: PathEnsemble,
    members: list,
    u: TimeDependentVelocity,
    n_se: float = 3.0,
    poincare_slack: float = 1e-6,
) -> dict:
    """Compare the reversed-drift ensemble against endpoint-pinned competitors.

    Reports pressure-shifted energies B, plain actions S, the predicted
    action gap (half the offset energy), and the per-path Poincare ratios.
    Gate SEs for the paired comparisons are combined in quadrature.  When the
    pressure-Hessian bound fails R T^2 <= pi^2 the report only warns, since
    the minimality statement's hypothesis is then violated.
    """
    if ens.meta.get("orientation") != REVERSED:
        raise ValueError("minimality check expects a reversed-drift ensemble")
    T = ens.dt * ens.n_steps
    from .flows import hessian_bound  # local import to avoid cycle at module load

    R = max(hessian_bound(p) for p in u.pressures) if u.pressures else 0.0
    hypothesis_ok = R * T * T <= np.pi**2 + 1e-12

    speed2 = np.sum(ens.drift**2, axis=2)
    S_g = 0.5 * np.trapezoid(speed2, dx=ens.dt, axis=1)
    P_g = _pressure_along(ens.unwrapped, ens.times, u)
    B_g = S_g - P_g
    est_S = EstimateWithError.from_samples(S_g)
    est_B = EstimateWithError.from_samples(B_g)

    rows = []
    all_ok = True
    for name, member in members:
        S_star = member.action_per_path()
        P_star = _pressure_along(member.unwrapped, ens.times, u)
        B_star = S_star - P_star
        est_S_star = EstimateWithError.from_samples(S_star)
        est_B_star = EstimateWithError.from_samples(B_star)
        half_v2 = EstimateWithError.from_samples(0.5 * member.offset_energy_per_path())
        gap = EstimateWithError.from_samples(S_star - S_g - 0.5 * member.offset_energy_per_path())
        ratios = member.poincare_ratios()
        row = {
            "member": name,
            "S_star": est_S_star,
            "B_star": est_B_star,
            "endpoint_error": member.endpoint_error(),
            "B_ok": est_B.value <= est_B_star.value + n_se * est_B.combined_se(est_B_star),
            "S_ok": est_S.value <= est_S_star.value + n_se * est_S.combined_se(est_S_star),
            "gap_ok": abs(gap.value) <= n_se * gap.std_error,
            "gap": gap,
            "half_offset_energy": half_v2,
            "poincare_max": float(np.max(ratios)),
            "poincare_ok": bool(np.max(ratios) <= 1.0 + poincare_slack),
        }
        row["ok"] = row["B_ok"] and row["S_ok"] and row["gap_ok"] and row["poincare_ok"]
        all_ok &= row["ok"]
        rows.append(row)
    return {
        "S_g": est_S,
        "B_g": est_B,
        "hessian_bound": R,
        "hypothesis_ok": bool(hypothesis_ok),
        "members": rows,
        "all_ok": bool(all_ok),
    }


def mean_acceleration_check(
    ens: PathEnsemble, u: TimeDependentVelocity, n_bins: int = 16
) -> dict:
    """Weak test that the drift's conditional increment rate is the pressure gradient.

    Per step, (u(T-t_{j+1}, g_{j+1}) - u(T-t_j, g_j)) / dt has conditional
    mean grad q(T-t_j, g_j) + O(dt); the martingale part averages out inside
    coarse time bins.  Returns per-bin residual estimates plus an aggregate
    EstimateWithError over all steps, and the per-step increment variance
    against 2 nu |grad u|^2 dt.
    """
    if ens.meta.get("orientation") != REVERSED:
        raise ValueError("acceleration check expects a reversed-drift ensemble")
    N, Mp1, dim = ens.unwrapped.shape
    M = Mp1 - 1
    T = ens.dt * M
    uv = np.empty((N, Mp1, dim))
    gradp = np.empty((N, M, dim))
    grad_norm2 = np.empty((N, M))
    for j in range(Mp1):
        s = T - ens.times[j]
        uv[:, j] = u.velocity_at(s, ens.unwrapped[:, j])
        if j < M:
            gradp[:, j] = u.pressure_gradient_at(s, ens.unwrapped[:, j])
            gu = u.velocity_gradient_at(s, ens.unwrapped[:, j])
            grad_norm2[:, j] = np.einsum("nab,nab->n", gu, gu)
    increments = np.diff(uv, axis=1)
    resid = increments / ens.dt - gradp  # (N, M, dim)

    edges = np.linspace(0, M, n_bins + 1).astype(int)
    bins = []
    for b in range(n_bins):
        sl = resid[:, edges[b] : edges[b + 1]].reshape(-1, dim)
        est = [EstimateWithError.from_samples(sl[:, d]) for d in range(dim)]
        bins.append(
            {
                "t_mid": 0.5 * (ens.times[edges[b]] + ens.times[edges[b + 1]]),
                "residual": est,
                "norm": float(np.hypot(est[0].value, est[1].value)),
                "se_norm": float(np.hypot(est[0].std_error, est[1].std_error)),
            }
        )
    flat = resid.reshape(-1, dim)
    aggregate = EstimateWithError.from_samples(np.concatenate([flat[:, 0], flat[:, 1]]))

    mart_var = np.sum((increments - gradp * ens.dt) ** 2, axis=2).ravel()
    mart_pred = 2.0 * ens.nu * ens.dt * grad_norm2.ravel()
    variance_match = EstimateWithError.from_samples(mart_var - mart_pred)
    return {"bins": bins, "aggregate": aggregate, "variance_match": variance_match}
