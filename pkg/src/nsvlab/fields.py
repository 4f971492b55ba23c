"""Divergence-free vector fields on the flat 2-torus and their spectral operators.

Fields live on T^2 = [0, 2pi)^2 and are stored as truncated Fourier
coefficients on the square block |k|_inf <= K.  All spatial averages use the
normalized Haar measure, i.e. "dx" integrals divide by (2pi)^2.  Evaluation
along scattered points is exact trigonometric summation over the stored
modes, never grid interpolation, so operator identities survive to rounding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

HERMITIAN_TOL = 1e-12
DIVFREE_TOL = 1e-12


class SpectralError(ValueError):
    """Raised when a field violates a structural precondition."""


def _wavegrid(K: int) -> tuple[np.ndarray, np.ndarray]:
    ks = np.arange(-K, K + 1, dtype=float)
    return np.meshgrid(ks, ks, indexing="ij")


def _check_hermitian(coeffs: np.ndarray) -> None:
    # index i <-> wavenumber i - K, so flipping both axes maps k -> -k
    flipped = np.conj(coeffs[::-1, ::-1])
    scale = max(np.max(np.abs(coeffs)), 1.0)
    if np.max(np.abs(coeffs - flipped)) > HERMITIAN_TOL * scale:
        raise SpectralError("coefficients are not Hermitian-symmetric (field not real)")


@dataclass
class FourierVectorField:
    """Real vector field u(theta) = mean + sum_k c_k e^{i k.theta} on T^2.

    coeffs has shape (2K+1, 2K+1, 2); entry [K, K] is the k = 0 mode and must
    be real (it is exposed as .mean).  Instances are immutable by convention;
    every operator below returns a fresh field.
    """

    K: int
    coeffs: np.ndarray
    dim: int = 2
    _eval_cache: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim != 2:
            raise SpectralError("only dim = 2 is implemented")
        expected = (2 * self.K + 1, 2 * self.K + 1, 2)
        if self.coeffs.shape != expected:
            raise SpectralError(f"coeffs shape {self.coeffs.shape} != {expected}")
        _check_hermitian(self.coeffs)

    # -- structure ---------------------------------------------------------

    @property
    def mean(self) -> np.ndarray:
        return self.coeffs[self.K, self.K].real.copy()

    def divergence_defect(self) -> float:
        """max_k |k . c_k| / (|k| |c_k|), the relative divergence residual."""
        k1, k2 = _wavegrid(self.K)
        dot = k1 * self.coeffs[..., 0] + k2 * self.coeffs[..., 1]
        mag = np.hypot(k1, k2) * np.linalg.norm(self.coeffs, axis=-1)
        mask = mag > 0
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(dot[mask]) / mag[mask]))

    def is_divergence_free(self, tol: float = DIVFREE_TOL) -> bool:
        return self.divergence_defect() <= tol

    def _compiled(self):
        """Cache (kvecs, coeffs, mean) over the active half-lattice modes."""
        if self._eval_cache is None:
            K = self.K
            k1, k2 = _wavegrid(K)
            half = (k1 > 0) | ((k1 == 0) & (k2 > 0))
            active = half & (np.abs(self.coeffs).max(axis=-1) > 0)
            kv = np.stack([k1[active], k2[active]], axis=-1)
            cf = self.coeffs[active]
            object.__setattr__(self, "_eval_cache", (kv, cf, self.mean))
        return self._eval_cache

    # -- pointwise evaluation (exact trig summation) ------------------------

    def evaluate_at(self, points: np.ndarray) -> np.ndarray:
        """Field values at points, shape (n, 2) -> (n, 2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        kv, cf, mn = self._compiled()
        if kv.shape[0] == 0:
            return np.broadcast_to(mn, pts.shape).copy()
        ph = pts @ kv.T
        # u = mean + 2 Re(sum_k c_k e^{i k.x}), summed over the half lattice
        vals = mn + 2.0 * (
            np.einsum("nm,mc->nc", np.cos(ph), cf.real)
            - np.einsum("nm,mc->nc", np.sin(ph), cf.imag)
        )
        return vals

    def evaluate(self, theta) -> np.ndarray:
        return self.evaluate_at(np.asarray(theta, dtype=float)[None, :])[0]

    def gradient_at(self, points: np.ndarray) -> np.ndarray:
        """Jacobians J[n, a, b] = d_b u_a at each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        kv, cf, _ = self._compiled()
        if kv.shape[0] == 0:
            return np.zeros((pts.shape[0], 2, 2))
        ph = pts @ kv.T
        # d_b u_a = 2 Re(sum_k i k_b c_{k,a} e^{i k.x})
        jac = -2.0 * (
            np.einsum("nm,ma,mb->nab", np.sin(ph), cf.real, kv)
            + np.einsum("nm,ma,mb->nab", np.cos(ph), cf.imag, kv)
        )
        return jac

    def gradient_tensor(self, theta) -> np.ndarray:
        return self.gradient_at(np.asarray(theta, dtype=float)[None, :])[0]

    # -- grids and integrals -------------------------------------------------

    def to_grid(self, n: int) -> np.ndarray:
        """Values on the uniform n x n grid (exact for n >= 2K+1)."""
        if n < 2 * self.K + 1:
            raise SpectralError("grid too coarse to hold all modes")
        idx = np.arange(-self.K, self.K + 1) % n
        spec = np.zeros((n, n, 2), dtype=complex)
        spec[np.ix_(idx, idx)] = self.coeffs
        return np.real(np.fft.ifft2(spec, axes=(0, 1))) * n * n

    def l2_inner(self, other: "FourierVectorField") -> float:
        """Normalized L^2 pairing int <u, v> dx / (2pi)^2, exact via Parseval."""
        if other.K != self.K:
            raise SpectralError("truncations differ")
        return float(np.real(np.sum(self.coeffs * np.conj(other.coeffs))))

    def l2_norm(self) -> float:
        return float(np.sqrt(max(self.l2_inner(self), 0.0)))

    def __add__(self, other: "FourierVectorField") -> "FourierVectorField":
        if other.K != self.K:
            raise SpectralError("truncations differ")
        return FourierVectorField(self.K, self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierVectorField") -> "FourierVectorField":
        if other.K != self.K:
            raise SpectralError("truncations differ")
        return FourierVectorField(self.K, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "FourierVectorField":
        return FourierVectorField(self.K, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def with_truncation(self, K_new: int) -> "FourierVectorField":
        """Embed into (or restrict to) the |k|_inf <= K_new block."""
        out = np.zeros((2 * K_new + 1, 2 * K_new + 1, 2), dtype=complex)
        m = min(self.K, K_new)
        out[K_new - m : K_new + m + 1, K_new - m : K_new + m + 1] = self.coeffs[
            self.K - m : self.K + m + 1, self.K - m : self.K + m + 1
        ]
        return FourierVectorField(K_new, out)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        K = self.K
        modes = []
        for i in range(2 * K + 1):
            for j in range(2 * K + 1):
                if i == K and j == K:
                    continue
                c = self.coeffs[i, j]
                if c[0] == 0 and c[1] == 0:
                    continue
                modes.append(
                    {
                        "k": [i - K, j - K],
                        "re": [c[0].real, c[1].real],
                        "im": [c[0].imag, c[1].imag],
                    }
                )
        doc = {"dim": 2, "K": K, "modes": modes, "mean": list(self.mean)}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "FourierVectorField":
        doc = json.loads(text)
        K = int(doc["K"])
        coeffs = np.zeros((2 * K + 1, 2 * K + 1, 2), dtype=complex)
        coeffs[K, K] = np.asarray(doc["mean"], dtype=float)
        for m in doc["modes"]:
            k1, k2 = m["k"]
            coeffs[k1 + K, k2 + K] = np.asarray(m["re"], dtype=float) + 1j * np.asarray(
                m["im"], dtype=float
            )
        return cls(K, coeffs)


@dataclass
class FourierScalarField:
    """Real scalar field p(theta) = sum_k c_k e^{i k.theta} on T^2."""

    K: int
    coeffs: np.ndarray
    _eval_cache: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        expected = (2 * self.K + 1, 2 * self.K + 1)
        if self.coeffs.shape != expected:
            raise SpectralError(f"coeffs shape {self.coeffs.shape} != {expected}")
        _check_hermitian(self.coeffs)

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.K, self.K].real)

    def _compiled(self):
        if self._eval_cache is None:
            K = self.K
            k1, k2 = _wavegrid(K)
            half = (k1 > 0) | ((k1 == 0) & (k2 > 0))
            active = half & (np.abs(self.coeffs) > 0)
            kv = np.stack([k1[active], k2[active]], axis=-1)
            object.__setattr__(self, "_eval_cache", (kv, self.coeffs[active], self.mean))
        return self._eval_cache

    def evaluate_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        kv, cf, mn = self._compiled()
        if kv.shape[0] == 0:
            return np.full(pts.shape[0], mn)
        ph = pts @ kv.T
        return mn + 2.0 * (np.cos(ph) @ cf.real - np.sin(ph) @ cf.imag)

    def gradient_at(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        kv, cf, _ = self._compiled()
        if kv.shape[0] == 0:
            return np.zeros((pts.shape[0], 2))
        ph = pts @ kv.T
        return -2.0 * (
            np.einsum("nm,mb->nb", np.sin(ph), kv * cf.real[:, None])
            + np.einsum("nm,mb->nb", np.cos(ph), kv * cf.imag[:, None])
        )

    def gradient_field(self) -> FourierVectorField:
        k1, k2 = _wavegrid(self.K)
        out = np.empty((2 * self.K + 1, 2 * self.K + 1, 2), dtype=complex)
        out[..., 0] = 1j * k1 * self.coeffs
        out[..., 1] = 1j * k2 * self.coeffs
        return FourierVectorField(self.K, out)

    def to_grid(self, n: int) -> np.ndarray:
        if n < 2 * self.K + 1:
            raise SpectralError("grid too coarse to hold all modes")
        idx = np.arange(-self.K, self.K + 1) % n
        spec = np.zeros((n, n), dtype=complex)
        spec[np.ix_(idx, idx)] = self.coeffs
        return np.real(np.fft.ifft2(spec)) * n * n

    def l2_inner(self, other: "FourierScalarField") -> float:
        if other.K != self.K:
            raise SpectralError("truncations differ")
        return float(np.real(np.sum(self.coeffs * np.conj(other.coeffs))))

    def __mul__(self, scalar: float) -> "FourierScalarField":
        return FourierScalarField(self.K, self.coeffs * float(scalar))

    __rmul__ = __mul__


# -- differential operators (mode-wise, exact) -------------------------------


def leray_project(f: FourierVectorField) -> FourierVectorField:
    """L^2-orthogonal projection onto divergence-free fields: I - k k^T/|k|^2.

    Realized as reconstruction of the k_perp component, with a fast path that
    leaves untouched any mode whose divergence already sits at working
    precision.  Reconstructed modes land inside that precision band, so the
    projection is exactly idempotent: a second application returns the same
    bits.
    """
    k1, k2 = _wavegrid(f.K)
    ksq = k1 * k1 + k2 * k2
    ksq_safe = np.where(ksq == 0, 1.0, ksq)
    c0, c1 = f.coeffs[..., 0], f.coeffs[..., 1]
    dot = k1 * c0 + k2 * c1
    tol = 8.0 * np.finfo(float).eps
    already = np.abs(dot) <= tol * np.sqrt(ksq) * np.linalg.norm(f.coeffs, axis=-1)
    t = (k2 * c0 - k1 * c1) / ksq_safe
    out = np.empty_like(f.coeffs)
    out[..., 0] = np.where(already, c0, t * k2)
    out[..., 1] = np.where(already, c1, -t * k1)
    out[f.K, f.K] = f.coeffs[f.K, f.K]
    return FourierVectorField(f.K, out)


def deformation_tensor_coeffs(f: FourierVectorField) -> np.ndarray:
    """Symmetrized gradient (Def u)_{ab} = (d_a u_b + d_b u_a)/2, mode-wise."""
    k1, k2 = _wavegrid(f.K)
    c = f.coeffs
    S = np.empty(c.shape[:2] + (2, 2), dtype=complex)
    S[..., 0, 0] = 1j * k1 * c[..., 0]
    S[..., 1, 1] = 1j * k2 * c[..., 1]
    S[..., 0, 1] = 0.5j * (k1 * c[..., 1] + k2 * c[..., 0])
    S[..., 1, 0] = S[..., 0, 1]
    return S


def deformation_inner(f: FourierVectorField, g: FourierVectorField) -> float:
    """<Def f, Def g> in L^2 over symmetric 2-tensors (normalized volume)."""
    Sf = deformation_tensor_coeffs(f)
    Sg = deformation_tensor_coeffs(g)
    return float(np.real(np.sum(Sf * np.conj(Sg))))


def deformation_laplacian(f: FourierVectorField) -> FourierVectorField:
    """Twice the adjoint-composed deformation operator, 2 Def* Def.

    Requires a divergence-free input; there it reduces to -Laplace, i.e.
    multiplication of each mode by |k|^2.  The mode formula below keeps the
    full symmetrized-gradient route k (k.c) + |k|^2 c so the adjointness
    identity <2 Def*Def f, g> = 2 <Def f, Def g> is exact by construction.
    """
    if not f.is_divergence_free(tol=1e-10):
        raise SpectralError("deformation laplacian requires a divergence-free field")
    k1, k2 = _wavegrid(f.K)
    ksq = k1 * k1 + k2 * k2
    dot = k1 * f.coeffs[..., 0] + k2 * f.coeffs[..., 1]
    out = np.empty_like(f.coeffs)
    out[..., 0] = k1 * dot + ksq * f.coeffs[..., 0]
    out[..., 1] = k2 * dot + ksq * f.coeffs[..., 1]
    return FourierVectorField(f.K, out)


def hodge_laplacian(f: FourierVectorField) -> FourierVectorField:
    """de Rham-Hodge laplacian d d* + d* d on the associated 1-form.

    Both pieces are assembled mode by mode; on the flat torus their sum is
    plain |k|^2 per mode, so this agrees with deformation_laplacian on
    divergence-free fields (zero Ricci curvature).
    """
    k1, k2 = _wavegrid(f.K)
    c = f.coeffs
    div_hat = k1 * c[..., 0] + k2 * c[..., 1]  # -i * d*omega
    dd_star = np.empty_like(c)
    dd_star[..., 0] = k1 * div_hat
    dd_star[..., 1] = k2 * div_hat
    curl_hat = k1 * c[..., 1] - k2 * c[..., 0]  # -i * (d omega coefficient)
    d_star_d = np.empty_like(c)
    d_star_d[..., 0] = -k2 * curl_hat
    d_star_d[..., 1] = k1 * curl_hat
    return FourierVectorField(f.K, dd_star + d_star_d)


def vector_laplacian(f: FourierVectorField) -> FourierVectorField:
    """Componentwise -Laplace: each mode multiplied by |k|^2."""
    k1, k2 = _wavegrid(f.K)
    ksq = (k1 * k1 + k2 * k2)[..., None]
    return FourierVectorField(f.K, f.coeffs * ksq)


# -- the divergence-free trigonometric frame ---------------------------------


CANONICAL_HALF_RULE = "k1 > 0, or k1 == 0 and k2 > 0"


@dataclass
class SpectralBasis:
    """Trigonometric frame of divergence-free fields with decay |k|^-beta.

    One cosine field and one sine field per wavevector in the canonical
    half-lattice (one representative of each {k, -k} pair), both pointing
    along k_perp = (k2, -k1).  The normalizer nu0 is the truncated sum
    sum_k |k|^2 / (2 |k|^(2 beta)), chosen so that the pointwise frame
    identity sum(<A_k, v>^2 + <B_k, v>^2) = nu |v|^2 holds exactly at finite
    truncation (the square block is invariant under 90-degree rotation, which
    makes the truncated second-moment sum exactly isotropic).
    """

    beta: float
    K: int
    nu: float

    def __post_init__(self):
        if self.beta <= 1:
            raise SpectralError("beta must exceed 1")
        if self.nu <= 0:
            raise SpectralError("nu must be positive")
        ks = np.arange(-self.K, self.K + 1)
        k1, k2 = np.meshgrid(ks, ks, indexing="ij")
        half = (k1 > 0) | ((k1 == 0) & (k2 > 0))
        kv = np.stack([k1[half], k2[half]], axis=-1).astype(float)
        order = np.lexsort((kv[:, 1], kv[:, 0]))
        self.kvecs = kv[order]
        self.kperp = np.stack([self.kvecs[:, 1], -self.kvecs[:, 0]], axis=-1)
        kn = np.linalg.norm(self.kvecs, axis=1)
        self.nu0 = float(np.sum(kn**2 / (2.0 * kn ** (2.0 * self.beta))))
        self.amps = np.sqrt(self.nu / self.nu0) / kn**self.beta

    @property
    def n_modes(self) -> int:
        return self.kvecs.shape[0]

    def _mode_index(self, k) -> int:
        k = np.asarray(k, dtype=float)
        hits = np.where((self.kvecs == k).all(axis=1))[0]
        if hits.size == 0:
            raise SpectralError(
                f"wavevector {k.astype(int).tolist()} is not in the canonical "
                f"half-lattice ({CANONICAL_HALF_RULE}) within |k|_inf <= {self.K}"
            )
        return int(hits[0])

    def basis_field(self, k, kind: str) -> FourierVectorField:
        """The cosine (A) or sine (B) frame field for wavevector k."""
        m = self._mode_index(k)
        K = self.K
        coeffs = np.zeros((2 * K + 1, 2 * K + 1, 2), dtype=complex)
        ki = self.kvecs[m].astype(int)
        amp_perp = self.amps[m] * self.kperp[m]
        if kind == "cos":
            c = 0.5 * amp_perp.astype(complex)
        elif kind == "sin":
            c = -0.5j * amp_perp
        else:
            raise SpectralError("kind must be 'cos' or 'sin'")
        coeffs[ki[0] + K, ki[1] + K] = c
        coeffs[-ki[0] + K, -ki[1] + K] = np.conj(c)
        return FourierVectorField(K, coeffs)

    def fields_at(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """All frame fields at points: (cosA, sinB), each (n, m, 2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ph = pts @ self.kvecs.T
        ap = self.amps[:, None] * self.kperp  # (m, 2)
        return np.cos(ph)[..., None] * ap, np.sin(ph)[..., None] * ap

    def frame_sum(self, v, theta) -> float:
        """sum_k <A_k(theta), v>^2 + <B_k(theta), v>^2, equal to nu |v|^2."""
        v = np.asarray(v, dtype=float)
        A, B = self.fields_at(np.asarray(theta, dtype=float)[None, :])
        return float(np.sum((A[0] @ v) ** 2) + np.sum((B[0] @ v) ** 2))

    def stratonovich_correction(self, theta) -> np.ndarray:
        """sum_k (grad_{A_k} A_k + grad_{B_k} B_k)(theta); zero to rounding.

        Assembled from the generic Jacobian route rather than asserted, so the
        cancellation k . k_perp = 0 is actually exercised.
        """
        theta = np.asarray(theta, dtype=float)
        total = np.zeros(2)
        for m in range(self.n_modes):
            k = self.kvecs[m].astype(int)
            for kind in ("cos", "sin"):
                fld = self.basis_field(k, kind)
                val = fld.evaluate(theta)
                total += fld.gradient_tensor(theta) @ val
        return total

    def noise_displacement(self, points: np.ndarray, dw_cos: np.ndarray, dw_sin: np.ndarray) -> np.ndarray:
        """sum_k A_k(x) dw_k + B_k(x) dw~_k for a batch of points."""
        ph = points @ self.kvecs.T
        w = (np.cos(ph) * dw_cos + np.sin(ph) * dw_sin) * self.amps
        return np.einsum("nm,mc->nc", w, self.kperp)


def random_divergence_free(K: int, seed: int, decay: float = 2.0, scale: float = 1.0) -> FourierVectorField:
    """Random smooth divergence-free field, |c_k| ~ |k|^-decay, for tests."""
    rng = np.random.default_rng(seed)
    n = 2 * K + 1
    z = rng.standard_normal((n, n, 2)) + 1j * rng.standard_normal((n, n, 2))
    z = 0.5 * (z + np.conj(z[::-1, ::-1]))
    k1, k2 = _wavegrid(K)
    kn = np.hypot(k1, k2)
    kn[K, K] = 1.0
    z *= (kn ** (-decay))[..., None] * scale
    z[K, K] = 0.0
    return leray_project(FourierVectorField(K, z))
