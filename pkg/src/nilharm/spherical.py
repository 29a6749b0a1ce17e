"""Bounded spherical functions for (N_{v,2}, O(v)), (N_{v,2}, SO(v)),
Heisenberg groups and type-H groups, with eigenvalue formulas and numerical
verifiers (sub-Laplacian, centre Laplacian, functional equation).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .group import GroupDims, GroupPoint, TypeHModel, k_action, product
from .matpolar import OrthQuadrature, d2
from .specfun import bessel_reduced, laguerre_norm

__all__ = [
    "SphericalParam",
    "HeisenbergParam",
    "TypeHLaguerre",
    "TypeHBessel",
    "theta_eval",
    "phi_eval",
    "phi_bessel",
    "heisenberg_product",
    "heisenberg_spherical",
    "heisenberg_sublaplacian_residual",
    "typeh_spherical",
    "sublaplacian_eigenvalue",
    "center_laplacian_eigenvalue",
    "dc0_eigenvalue",
    "sublaplacian_fd",
    "sublaplacian_fd_residual",
    "center_laplacian_fd_residual",
    "functional_equation_residual",
]


@dataclass(frozen=True)
class SphericalParam:
    """Label (r*, Lambda*, l, eps) of a bounded spherical function.

    ``lambda_star`` is weakly decreasing and non-negative (length v');
    ``l`` has one entry per distinct non-zero value of Lambda*.
    """

    r_star: float = 0.0
    lambda_star: tuple = ()
    l: tuple = ()
    epsilon: Optional[int] = None

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambda_star)
        object.__setattr__(self, "lambda_star", lam)
        object.__setattr__(self, "l", tuple(int(x) for x in self.l))
        if self.r_star < 0:
            raise ValueError("r* must be >= 0")
        if any(x < 0 for x in lam) or any(lam[i] < lam[i + 1] for i in range(len(lam) - 1)):
            raise ValueError("Lambda* must be non-negative and weakly decreasing")
        if any(x < 0 for x in self.l):
            raise ValueError("l must be natural")
        if len(self.l) != self.v1:
            raise ValueError(f"l must have {self.v1} entries (distinct non-zero lambdas)")
        if self.epsilon not in (None, 1, -1):
            raise ValueError("epsilon must be +1, -1 or None")

    # derived quantities -------------------------------------------------
    @property
    def v0(self) -> int:
        return sum(1 for x in self.lambda_star if x > 0)

    @property
    def distinct(self) -> tuple:
        out = []
        for x in self.lambda_star:
            if x > 0 and (not out or out[-1] != x):
                out.append(x)
        return tuple(out)

    @property
    def v1(self) -> int:
        return len(self.distinct)

    @property
    def m(self) -> tuple:
        return tuple(sum(1 for x in self.lambda_star if x == d) for d in self.distinct)

    def block_ranges(self) -> list:
        """0-based coordinate index lists of the projections pr_j."""
        out, start = [], 0
        for mj in self.m:
            out.append([c for i in range(start, start + mj) for c in (2 * i, 2 * i + 1)])
            start += mj
        return out

    def validate(self, v: int) -> "SphericalParam":
        if len(self.lambda_star) != v // 2:
            raise ValueError("Lambda* must have length v // 2")
        if 2 * self.v0 == v and self.r_star != 0:
            raise ValueError("r* must vanish when 2 v0 = v")
        return self

    # serialization --------------------------------------------------------
    def to_dict(self) -> dict:
        return {"r": self.r_star, "lambda": list(self.lambda_star), "l": list(self.l),
                "eps": self.epsilon}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text) -> "SphericalParam":
        d = json.loads(text) if isinstance(text, str) else dict(text)
        return cls(float(d.get("r", 0.0)), tuple(d.get("lambda", ())), tuple(d.get("l", ())),
                   d.get("eps"))


def _pairing_phase(param: SphericalParam, v: int, A) -> np.ndarray:
    # <D_2^eps(Lambda*), A> over the pairs i<j equals sum_i lambda_i a_{2i,2i+1}
    eps = param.epsilon if param.epsilon is not None else 1
    D = d2(np.array(param.lambda_star), v, eps)
    return 0.5 * np.einsum("ij,...ij->...", D, A)


def _laguerre_factor(param: SphericalParam, x) -> np.ndarray:
    out = np.ones(x.shape[:-1])
    for lamj, lj, mj, idx in zip(param.distinct, param.l, param.m, param.block_ranges()):
        y = lamj * np.sum(x[..., idx] ** 2, axis=-1) / 2.0
        out = out * laguerre_norm(lj, mj - 1.0, y)
    return out


def theta_eval(param: SphericalParam, p: GroupPoint) -> np.ndarray:
    """e^{i r* x_v} e^{i <D_2^eps(Lambda*), A>} prod_j Lbar_{l_j}^{(m_j-1)}(lambda_j |pr_j x|^2 / 2)."""
    v = p.v
    if len(param.lambda_star) != v // 2:
        raise ValueError("dimension mismatch between parameter and point")
    phase = param.r_star * p.x[..., v - 1] + _pairing_phase(param, v, p.A)
    return np.exp(1j * phase) * _laguerre_factor(param, p.x)


def phi_bessel(r_star: float, p: GroupPoint, dims: Optional[GroupDims] = None) -> np.ndarray:
    """Reduced Bessel J_{(v-2)/2}(r* |x|), the spherical functions with Lambda* = 0."""
    v = p.v if dims is None else dims.v
    return bessel_reduced((v - 2) / 2.0, r_star * np.linalg.norm(p.x, axis=-1))


def phi_eval(param: SphericalParam, p: GroupPoint, kquad: Optional[OrthQuadrature] = None,
             budget: int = 2**18) -> np.ndarray:
    """phi(n) = int_K Theta(k.n) dk by the weighted node sum of ``kquad``."""
    v = p.v
    param.validate(v)
    if param.v0 == 0:
        return np.asarray(phi_bessel(param.r_star, p), dtype=complex)
    if kquad is None:
        raise ValueError("a K-quadrature is required when Lambda* != 0")
    want = "SO" if param.epsilon is not None else "O"
    if kquad.group != want:
        raise ValueError(f"parameter needs a {want}({v}) quadrature, got {kquad.group}")
    eps = param.epsilon if param.epsilon is not None else 1
    D = d2(np.array(param.lambda_star), v, eps)
    x = np.atleast_2d(p.x.reshape(-1, v))
    A = p.A.reshape(-1, v, v)
    out = np.zeros(len(x), dtype=complex)
    chunk = max(1, budget // max(len(x), 1))
    for s in range(0, len(kquad), chunk):
        K = kquad.nodes[s:s + chunk]
        w = kquad.weights[s:s + chunk]
        kx = np.einsum("nij,mj->nmi", K, x)  # (N, M, v)
        # <D, k A k^T> = (1/2) tr(D^T k A k^T) = (1/2) sum (k^T D k)_ij A_ij
        KDK = np.einsum("nji,jk,nkl->nil", K, D, K)
        ph = 0.5 * np.einsum("nij,mij->nm", KDK, A) + param.r_star * kx[..., v - 1]
        vals = np.exp(1j * ph) * _laguerre_factor(param, kx)
        out += w @ vals
    return out.reshape(p.x.shape[:-1])


# ---------------------------------------------------------------------------
# eigenvalues


def sublaplacian_eigenvalue(param: SphericalParam) -> float:
    """sum_j lambda_j (2 l_j + m_j) + r*^2."""
    return float(sum(lj * (2 * l + m) for lj, l, m in zip(param.distinct, param.l, param.m))
                 + param.r_star**2)


def center_laplacian_eigenvalue(param: SphericalParam) -> float:
    return float(sum(x * x for x in param.lambda_star))


def dc0_eigenvalue(param: SphericalParam, v: int) -> float:
    if v % 2:
        return 0.0
    return float(np.prod(np.square(param.lambda_star)))


def _x_shift(v: int, i: int, t: float) -> GroupPoint:
    x = np.zeros(v)
    x[i] = t
    return GroupPoint(x, np.zeros(v * (v - 1) // 2))


def sublaplacian_fd(fn, p: GroupPoint, step: float = 1e-3) -> complex:
    """L f(p) = -sum_i d^2/dt^2 f(p.exp(t X_i)) by Richardson-extrapolated
    central differences.  ``fn`` maps a batched GroupPoint to values."""
    v = p.v
    pts_x, pts_a = [], []
    for i in range(v):
        for t in (-2 * step, -step, step, 2 * step):
            q = product(p, _x_shift(v, i, t))
            pts_x.append(q.x)
            pts_a.append(q.a)
    vals = np.asarray(fn(GroupPoint(np.array(pts_x), np.array(pts_a)))).reshape(v, 4)
    f0 = complex(np.asarray(fn(GroupPoint(p.x[None], p.a[None])))[0])
    h = step
    d_h = (vals[:, 1] - 2 * f0 + vals[:, 2]) / h**2
    d_2h = (vals[:, 0] - 2 * f0 + vals[:, 3]) / (2 * h) ** 2
    return -complex(np.sum((4 * d_h - d_2h) / 3))


def sublaplacian_fd_residual(param: SphericalParam, p: GroupPoint,
                             kquad: Optional[OrthQuadrature] = None, step: float = 1e-3) -> float:
    """|L phi(p) - E_L phi(p)| with L = -sum X_i^2 by finite differences."""
    fn = lambda q: phi_eval(param, q, kquad)  # noqa: E731
    Lphi = sublaplacian_fd(fn, p, step)
    phi0 = complex(np.asarray(fn(GroupPoint(p.x[None], p.a[None])))[0])
    return abs(Lphi - sublaplacian_eigenvalue(param) * phi0)


def center_laplacian_fd_residual(param: SphericalParam, p: GroupPoint,
                                 kquad: Optional[OrthQuadrature] = None, step: float = 1e-3) -> float:
    """|-sum_ij d^2 phi / da_ij^2 - E_Z phi| (centre fields are plain a-derivatives)."""
    v, z = p.v, p.a.shape[-1]
    shifts = []
    for c in range(z):
        for t in (-2 * step, -step, step, 2 * step):
            a = p.a.copy()
            a[c] += t
            shifts.append(a)
    xs = np.broadcast_to(p.x, (len(shifts), v))
    vals = phi_eval(param, GroupPoint(xs, np.array(shifts)), kquad).reshape(z, 4)
    f0 = complex(phi_eval(param, GroupPoint(p.x[None], p.a[None]), kquad)[0])
    h = step
    d_h = (vals[:, 1] - 2 * f0 + vals[:, 2]) / h**2
    d_2h = (vals[:, 0] - 2 * f0 + vals[:, 3]) / (2 * h) ** 2
    lap = -np.sum((4 * d_h - d_2h) / 3)
    return abs(lap - center_laplacian_eigenvalue(param) * f0)


def functional_equation_residual(param: SphericalParam, p1: GroupPoint, p2: GroupPoint,
                                 kquad: Optional[OrthQuadrature] = None) -> float:
    """|int_K phi(p1 . k.p2) dk - phi(p1) phi(p2)| with one shared K rule."""
    if kquad is None:
        from .matpolar import haar_quadrature
        kquad = haar_quadrature(p1.v, "SO" if param.epsilon is not None else "O")
    kp2 = k_action(kquad.nodes, p2)
    pts = product(GroupPoint(np.broadcast_to(p1.x, kp2.x.shape),
                             np.broadcast_to(p1.a, kp2.a.shape)), kp2)
    lhs = kquad.weights @ phi_eval(param, pts, kquad)
    rhs = phi_eval(param, p1, kquad) * phi_eval(param, p2, kquad)
    return float(abs(lhs - rhs))


# ---------------------------------------------------------------------------
# Heisenberg groups H^n = C^n x R


@dataclass(frozen=True)
class HeisenbergParam:
    """Partition m of v0 plus either (lam, l) (Laguerre family) or mu (Bessel family)."""

    m: tuple
    lam: Optional[float] = None
    l: Optional[tuple] = None
    mu: Optional[tuple] = None

    def __post_init__(self):
        if not self.m or any(int(x) <= 0 for x in self.m):
            raise ValueError("m must be a partition into positive parts")
        lag = self.lam is not None
        bes = self.mu is not None
        if lag == bes:
            raise ValueError("exactly one family (lam, l) or mu must be given")
        if lag:
            if self.lam == 0 or self.l is None or len(self.l) != len(self.m):
                raise ValueError("Laguerre family needs lam != 0 and one l per block")
        elif len(self.mu) != len(self.m) or any(x < 0 for x in self.mu):
            raise ValueError("Bessel family needs one mu_j >= 0 per block")

    @property
    def v0(self) -> int:
        return int(sum(self.m))

    def blocks(self) -> list:
        out, s = [], 0
        for mj in self.m:
            out.append(list(range(s, s + mj)))
            s += mj
        return out


def heisenberg_product(p, q):
    """(z, t).(z', t') = (z + z', t + t' + (1/2) Im sum z_i conj(z'_i))."""
    (z, t), (zp, tp) = p, q
    z, zp = np.asarray(z, complex), np.asarray(zp, complex)
    return z + zp, t + tp + 0.5 * np.imag(np.sum(z * np.conj(zp), axis=-1))


def heisenberg_spherical(hp: HeisenbergParam, z, t) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    out = np.ones(np.broadcast_shapes(z.shape[:-1], t.shape), dtype=complex)
    if hp.lam is not None:
        out = out * np.exp(-1j * hp.lam * t)
        for lj, mj, idx in zip(hp.l, hp.m, hp.blocks()):
            y = abs(hp.lam) * np.sum(np.abs(z[..., idx]) ** 2, axis=-1) / 2.0
            out = out * laguerre_norm(lj, mj - 1.0, y)
    else:
        for muj, mj, idx in zip(hp.mu, hp.m, hp.blocks()):
            out = out * bessel_reduced(mj - 1.0, muj * np.linalg.norm(z[..., idx], axis=-1))
    return out


def heisenberg_eigenvalue(hp: HeisenbergParam) -> float:
    if hp.lam is not None:
        return float(sum(abs(hp.lam) * (2 * l + m) for l, m in zip(hp.l, hp.m)))
    return float(sum(mu * mu for mu in hp.mu))


def heisenberg_sublaplacian_residual(hp: HeisenbergParam, z, t, step: float = 1e-3) -> float:
    """|L omega - E omega| with the left-invariant fields of the Heisenberg law."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    f0 = complex(heisenberg_spherical(hp, z, t))
    total = 0.0
    for k in range(n):
        for unit in (1.0, 1j):
            vals = {}
            for s in (-2, -1, 1, 2):
                e = np.zeros(n, dtype=complex)
                e[k] = unit * s * step
                zz, tt = heisenberg_product((z, t), (e, 0.0))
                vals[s] = complex(heisenberg_spherical(hp, zz, tt))
            d_h = (vals[-1] - 2 * f0 + vals[1]) / step**2
            d_2h = (vals[-2] - 2 * f0 + vals[2]) / (2 * step) ** 2
            total += (4 * d_h - d_2h) / 3
    return abs(-total - heisenberg_eigenvalue(hp) * f0)


# ---------------------------------------------------------------------------
# type-H groups


@dataclass(frozen=True)
class TypeHLaguerre:
    zeta: tuple
    l: int


@dataclass(frozen=True)
class TypeHBessel:
    r: float


def typeh_spherical(model: TypeHModel, family: Union[TypeHLaguerre, TypeHBessel], X, Z) -> np.ndarray:
    """Phi_{zeta,l} = e^{i<zeta,Z>} Lbar_l^{(v'-1)}(|zeta||X|^2/2) or Phi_r = J_{v'-1}(r|X|)."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    vp = model.v_dim // 2
    if isinstance(family, TypeHBessel):
        return np.asarray(bessel_reduced(vp - 1.0, family.r * np.linalg.norm(X, axis=-1)), dtype=complex)
    zeta = np.asarray(family.zeta, dtype=float)
    nz = np.linalg.norm(zeta)
    if nz == 0:
        raise ValueError("zeta must be non-zero")
    y = 0.5 * nz * np.sum(X * X, axis=-1)
    return np.exp(1j * (Z @ zeta)) * laguerre_norm(family.l, vp - 1.0, y)
