"""Free two-step nilpotent groups N_{v,2} and type-H groups.

Points are stored in exponential coordinates: ``x`` on the first layer (R^v)
and ``a`` on the centre, indexed by the pairs i<j in lexicographic order.
All arithmetic is vectorized over leading batch axes.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special
from scipy.stats import qmc

__all__ = [
    "GroupDims",
    "GroupPoint",
    "pairs",
    "vec_to_antisym",
    "antisym_to_vec",
    "product",
    "inverse",
    "dilate",
    "koranyi_norm",
    "k_action",
    "identity",
    "sphere_rule",
    "sphere_area",
    "SphereQuads",
    "sphere_quads",
    "sphere_pairing",
    "mu_mass",
    "polar_integral",
    "polar_identity_residual",
    "IntegralResult",
    "haar_integrate_group",
    "TypeHModel",
    "typeh_heisenberg",
    "typeh_direct_product",
]


@dataclass(frozen=True)
class GroupDims:
    v: int

    def __post_init__(self):
        if self.v < 2:
            raise ValueError("v must be >= 2")

    @property
    def v_prime(self) -> int:
        return self.v // 2

    @property
    def z(self) -> int:
        return self.v * (self.v - 1) // 2

    @property
    def Q(self) -> int:
        return self.v + 2 * self.z

    @property
    def odd(self) -> bool:
        return self.v % 2 == 1


@lru_cache(maxsize=None)
def pairs(v: int) -> tuple:
    """Lexicographic list of pairs (i, j), i < j (0-based)."""
    return tuple((i, j) for i in range(v) for j in range(i + 1, v))


@lru_cache(maxsize=None)
def _pair_arrays(v: int):
    p = np.array(pairs(v), dtype=int).reshape(-1, 2)
    return p[:, 0], p[:, 1]


def vec_to_antisym(a, v: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    I, J = _pair_arrays(v)
    A = np.zeros(a.shape[:-1] + (v, v))
    A[..., I, J] = a
    A[..., J, I] = -a
    return A


def antisym_to_vec(A) -> np.ndarray:
    A = np.asarray(A)
    I, J = _pair_arrays(A.shape[-1])
    return A[..., I, J]


@dataclass
class GroupPoint:
    """Element exp(X + A) of N_{v,2}; ``x`` has shape (..., v), ``a`` (..., z)."""

    x: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        v = self.x.shape[-1]
        if self.a.shape[-1] != v * (v - 1) // 2:
            raise ValueError("length of a does not match v(v-1)/2")

    @property
    def v(self) -> int:
        return self.x.shape[-1]

    @property
    def dims(self) -> GroupDims:
        return GroupDims(self.v)

    @property
    def A(self) -> np.ndarray:
        return vec_to_antisym(self.a, self.v)

    def __getitem__(self, idx) -> "GroupPoint":
        return GroupPoint(self.x[idx], self.a[idx])

    def to_json(self) -> str:
        if self.x.ndim != 1:
            raise ValueError("only single points serialize")
        return json.dumps({"v": self.v, "x": self.x.tolist(), "a": self.a.tolist()})

    @classmethod
    def from_json(cls, text) -> "GroupPoint":
        d = json.loads(text) if isinstance(text, str) else dict(text)
        p = cls(np.array(d["x"], dtype=float), np.array(d["a"], dtype=float))
        if p.v != int(d["v"]):
            raise ValueError("v does not match x")
        return p


def identity(v: int) -> GroupPoint:
    return GroupPoint(np.zeros(v), np.zeros(v * (v - 1) // 2))


def _check(p: GroupPoint, q: GroupPoint):
    if p.v != q.v:
        raise ValueError("dimension mismatch")


def product(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    """Group law x = x+x', a = a+a'+(1/2)[x,x'], [x,x']_{ij} = x_i x'_j - x_j x'_i."""
    _check(p, q)
    I, J = _pair_arrays(p.v)
    br = p.x[..., I] * q.x[..., J] - p.x[..., J] * q.x[..., I]
    return GroupPoint(p.x + q.x, p.a + q.a + 0.5 * br)


def inverse(p: GroupPoint) -> GroupPoint:
    return GroupPoint(-p.x, -p.a)


def dilate(r: float, p: GroupPoint) -> GroupPoint:
    if not r > 0:
        raise ValueError("dilation factor must be positive")
    return GroupPoint(r * p.x, r * r * p.a)


def koranyi_norm(p: GroupPoint):
    """(|x|^4 + |a|^2)^{1/4}."""
    x2 = np.sum(p.x**2, axis=-1)
    a2 = np.sum(p.a**2, axis=-1)
    return (x2 * x2 + a2) ** 0.25


def k_action(k, p: GroupPoint) -> GroupPoint:
    """(x, A) -> (k x, k A k^T); ``k`` may be a stack of matrices (..., v, v)."""
    k = np.asarray(k, dtype=float)
    v = p.v
    if k.shape[-2:] != (v, v):
        raise ValueError("k has wrong shape")
    eye = np.eye(v)
    if np.max(np.abs(np.swapaxes(k, -1, -2) @ k - eye)) > 1e-10:
        raise ValueError("k is not orthogonal")
    x = np.einsum("...ij,...j->...i", k, p.x)
    A = k @ p.A @ np.swapaxes(k, -1, -2)
    return GroupPoint(x, antisym_to_vec(A))


# ---------------------------------------------------------------------------
# spheres and the homogeneous unit-sphere measure


def sphere_area(d: int) -> float:
    """Surface measure of S^{d-1} in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@lru_cache(maxsize=64)
def _sphere_rule_cached(d: int, n: int):
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        m = 2 * n
        th = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(m, 2 * np.pi / m)
    a = (d - 3) / 2.0
    t, wt = special.roots_jacobi(n, a, a)
    sub_x, sub_w = _sphere_rule_cached(d - 1, n)
    s = np.sqrt(1.0 - t * t)
    x = np.concatenate([t[:, None, None] * np.ones((1, len(sub_w), 1)),
                        s[:, None, None] * sub_x[None]], axis=2).reshape(-1, d)
    w = (wt[:, None] * sub_w[None]).ravel()
    return x, w


def sphere_rule(d: int, n: int):
    """Product rule on S^{d-1} with surface-measure weights.

    Exact for polynomials of degree < 2n restricted to the sphere.
    """
    x, w = _sphere_rule_cached(d, n)
    return x.copy(), w.copy()


@dataclass(frozen=True)
class SphereQuads:
    """Nodes for the (r, X, Z) parametrization of the Koranyi unit sphere."""

    v: int
    r: np.ndarray = field(repr=False)
    wr: np.ndarray = field(repr=False)
    X: np.ndarray = field(repr=False)
    wX: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)
    wZ: np.ndarray = field(repr=False)


def sphere_quads(v: int, n_r: int = 24, n_x: int = 16, n_z: int = 8) -> SphereQuads:
    """Quadrature for 2 int_0^1 int int g dsigma_z dsigma_v r^{v-1} (1-r^4)^{(z-2)/2} dr.

    The endpoint behaviour r^{v-1}(1-r)^{(z-2)/2} is absorbed by Gauss-Jacobi;
    the smooth remainder ((1+r)(1+r^2))^{(z-2)/2} is folded into the weights.
    """
    dims = GroupDims(v)
    a = (dims.z - 2) / 2.0
    b = v - 1.0
    xg, wg = special.roots_jacobi(n_r, a, b)
    r = (1 + xg) / 2
    wr = wg * 2.0 ** (-(a + b) - 1) * ((1 + r) * (1 + r * r)) ** a * 2.0
    X, wX = sphere_rule(v, n_x)
    Z, wZ = sphere_rule(dims.z, n_z)
    return SphereQuads(v, r, wr, X, wX, Z, wZ)


def mu_mass(v: int) -> float:
    """Total mass of the unit-sphere measure (surface-measure calibration)."""
    dims = GroupDims(v)
    a = (dims.z - 2) / 2.0
    # 2 int_0^1 r^{v-1} (1-r^4)^a dr = (1/2) B(v/4, a+1)
    radial = 0.5 * special.beta(v / 4.0, a + 1.0)
    return radial * sphere_area(v) * sphere_area(dims.z)


def sphere_pairing(f: Callable[[GroupPoint], np.ndarray], s: float, dims: GroupDims,
                   quads: Optional[SphereQuads] = None):
    """int_{S_1} f(s.n) dmu(n) with surface measures on S^{v-1}, S^{z-1}."""
    q = quads if quads is not None else sphere_quads(dims.v)
    if q.v != dims.v:
        raise ValueError("quadrature built for a different v")
    wXZ = q.wX[:, None] * q.wZ[None, :]
    total = 0.0
    # one radial node at a time keeps memory at |X nodes| x |Z nodes|
    for r, wr in zip(q.r, q.wr):
        rad = math.sqrt(max(1.0 - r**4, 0.0))
        x = np.broadcast_to((s * r * q.X)[:, None, :], (len(q.wX), len(q.wZ), dims.v))
        a = np.broadcast_to((s * s * rad * q.Z)[None, :, :], (len(q.wX), len(q.wZ), dims.z))
        vals = np.asarray(f(GroupPoint(x, a)))
        total = total + wr * np.sum(vals * wXZ)
    return total


def polar_integral(f, dims: GroupDims, quads: Optional[SphereQuads] = None,
                   rho_max: float = 8.0, n_rho: int = 160):
    """int_0^rho_max int_{S_1} f(rho.n) dmu(n) rho^{Q-1} drho (Gauss-Legendre in rho)."""
    t, w = special.roots_legendre(n_rho)
    rho = rho_max * (t + 1) / 2
    w = w * rho_max / 2
    total = 0.0
    for rk, wk in zip(rho, w):
        total = total + wk * rk ** (dims.Q - 1) * sphere_pairing(f, rk, dims, quads)
    return total


@dataclass
class IntegralResult:
    value: complex
    stderr: float = 0.0
    tail: float = 0.0
    tail_warning: bool = False


def haar_integrate_group(f, dims: GroupDims, box: float = 6.0, method: str = "auto",
                         n: int = 48, n_qmc: int = 2**15, n_rep: int = 8, seed: int = 0,
                         tail_tol: float = 1e-8, scale: Optional[float] = None) -> IntegralResult:
    """int_N f(exp(X+A)) dX dA over the box [-box, box]^{v+z}.

    ``tensor`` uses an n-point Gauss-Legendre rule per axis on the box
    (sensible for v = 2); ``qmc`` averages ``n_rep`` scrambled Sobol
    replicates under a Gaussian sampling density of width ``scale``
    (default box/4) and reports their standard error.
    """
    D = dims.v + dims.z
    if method == "auto":
        method = "tensor" if dims.v == 2 else "qmc"
    vol = (2 * box) ** D
    if method == "tensor":
        t, w = special.roots_legendre(n)
        t = t * box
        w = w * box
        grids = np.meshgrid(*([t] * D), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        W = np.ones(len(pts))
        for k in range(D):
            W = W * np.meshgrid(*([w] * D), indexing="ij")[k].ravel()
        val = np.sum(np.asarray(f(GroupPoint(pts[:, :dims.v], pts[:, dims.v:]))) * W)
        err = 0.0
    elif method == "qmc":
        # scrambled Sobol points pushed through a normal of width box/4,
        # integrand reweighted by the sampling density
        sig = box / 4.0 if scale is None else scale
        ests = []
        for rep in range(n_rep):
            eng = qmc.Sobol(D, scramble=True, seed=seed + rep)
            u = np.clip(eng.random(n_qmc), 1e-12, 1 - 1e-12)
            pts = sig * special.ndtri(u)
            logpdf = -0.5 * np.sum((pts / sig) ** 2, axis=1) - D * np.log(sig * np.sqrt(2 * np.pi))
            vals = np.asarray(f(GroupPoint(pts[:, :dims.v], pts[:, dims.v:])))
            ests.append(np.mean(vals * np.exp(-logpdf)))
        ests = np.array(ests)
        val = np.mean(ests)
        err = float(np.std(ests, ddof=1) / np.sqrt(n_rep)) if n_rep > 1 else float("nan")
    else:
        raise ValueError(f"unknown method {method!r}")
    # crude tail indicator: sup of |f| on the box faces times the box volume
    rng = np.random.default_rng(seed)
    u = rng.uniform(-box, box, size=(512, D))
    face = rng.integers(0, D, size=512)
    u[np.arange(512), face] = box * np.sign(u[np.arange(512), face])
    tail = float(np.max(np.abs(f(GroupPoint(u[:, :dims.v], u[:, dims.v:]))))) * vol
    return IntegralResult(val, err, tail, tail > tail_tol)


def polar_identity_residual(f, dims: GroupDims, quads: Optional[SphereQuads] = None,
                            direct: Optional[complex] = None, relative: bool = False,
                            **kw) -> float:
    """|int_N f - int_0^oo int_{S_1} f(rho.n) dmu rho^{Q-1} drho|."""
    polar = polar_integral(f, dims, quads, **kw)
    if direct is None:
        direct = haar_integrate_group(f, dims).value
    res = abs(direct - polar)
    return res / abs(direct) if relative and direct != 0 else res


# ---------------------------------------------------------------------------
# type-H models


@dataclass(frozen=True)
class TypeHModel:
    """Two-step algebra V + Z with <J(Z)X, X'> = <Z, [X, X']>."""

    J: np.ndarray = field(repr=False)  # (z_dim, v_dim, v_dim)

    @property
    def v_dim(self) -> int:
        return self.J.shape[1]

    @property
    def z_dim(self) -> int:
        return self.J.shape[0]

    def J_of(self, Z) -> np.ndarray:
        return np.einsum("...k,kij->...ij", np.asarray(Z, dtype=float), self.J)

    def type_h_defect(self, n_dirs: int = 64, seed: int = 0) -> float:
        """max ||J(Z)^2 + |Z|^2 Id|| over unit Z on a test set (0 for type-H)."""
        rng = np.random.default_rng(seed)
        Z = rng.standard_normal((n_dirs, self.z_dim))
        Z = np.concatenate([np.eye(self.z_dim), Z / np.linalg.norm(Z, axis=1, keepdims=True)])
        JZ = self.J_of(Z)
        eye = np.eye(self.v_dim)
        return float(np.max(np.abs(JZ @ JZ + eye)))

    def is_type_h(self, tol: float = 1e-10) -> bool:
        antisym = np.max(np.abs(self.J + np.swapaxes(self.J, 1, 2))) < tol
        return bool(antisym and self.type_h_defect() < tol)

    def bracket(self, X, Xp) -> np.ndarray:
        # [X, X']_k = <J_k X, X'>
        return np.einsum("...i,kji,...j->...k", np.asarray(X, float), self.J, np.asarray(Xp, float))

    def product(self, p, q):
        """(X, Z).(X', Z') = (X + X', Z + Z' + [X, X']/2)."""
        (X, Z), (Xp, Zp) = p, q
        return np.asarray(X) + Xp, np.asarray(Z) + Zp + 0.5 * self.bracket(X, Xp)


def typeh_heisenberg(n: int) -> TypeHModel:
    """H^n as a type-H model: J_1 = n diagonal copies of [[0,-1],[1,0]]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    J = np.zeros((1, 2 * n, 2 * n))
    for i in range(n):
        J[0, 2 * i + 1, 2 * i] = 1.0
        J[0, 2 * i, 2 * i + 1] = -1.0
    return TypeHModel(J)


def typeh_direct_product(m1: TypeHModel, m2: TypeHModel) -> TypeHModel:
    """Direct product: V = V1 + V2, Z = Z1 + Z2 with J block-diagonal."""
    v = m1.v_dim + m2.v_dim
    z = m1.z_dim + m2.z_dim
    J = np.zeros((z, v, v))
    J[: m1.z_dim, : m1.v_dim, : m1.v_dim] = m1.J
    J[m1.z_dim:, m1.v_dim:, m1.v_dim:] = m2.J
    return TypeHModel(J)
