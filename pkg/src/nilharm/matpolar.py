"""Polar coordinates on antisymmetric matrices and Haar rules on O(v)/SO(v).

Every real antisymmetric A is k^{-1}.D_2(Lambda) (action k.A = k A k^T) with
Lambda weakly decreasing and non-negative; D_2 puts lambda_i J,
J = [[0, 1], [-1, 0]], on the diagonal 2x2 blocks.
"""
from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import linalg, special
from scipy.stats import special_ortho_group

from .group import antisym_to_vec, pairs, vec_to_antisym

__all__ = [
    "AntisymPolar",
    "d2",
    "antisym_polar",
    "eta_density",
    "eta_constant",
    "eta_constant_selberg",
    "OrthQuadrature",
    "haar_quadrature",
    "polar_integrate_antisym",
    "polar_laplacian_rhs",
    "polar_laplacian_residual",
]


@dataclass
class AntisymPolar:
    lam: np.ndarray
    k: np.ndarray
    epsilon: Optional[int] = None

    def reconstruct(self) -> np.ndarray:
        D = d2(self.lam, self.k.shape[0], self.epsilon if self.epsilon is not None else 1)
        return self.k.T @ D @ self.k


def d2(lam, v: int, eps: int = 1) -> np.ndarray:
    """Block-diagonal lambda_i J with eps on the last block (zero last row if v odd)."""
    lam = np.asarray(lam, dtype=float)
    vp = v // 2
    if lam.shape[-1] != vp:
        raise ValueError("Lambda must have length v // 2")
    D = np.zeros(lam.shape[:-1] + (v, v))
    for i in range(vp):
        s = eps if (i == vp - 1) else 1
        D[..., 2 * i, 2 * i + 1] = s * lam[..., i]
        D[..., 2 * i + 1, 2 * i] = -s * lam[..., i]
    return D


def antisym_polar(A, group: str = "O") -> AntisymPolar:
    """Return (Lambda, k[, eps]) with k^T D_2^eps(Lambda) k = A.

    Built from the real Schur form of A (block diagonal because A is normal).
    """
    A = np.asarray(A, dtype=float)
    v = A.shape[0]
    if A.shape != (v, v) or np.max(np.abs(A + A.T), initial=0.0) > 1e-10:
        raise ValueError("input is not antisymmetric")
    if group not in ("O", "SO"):
        raise ValueError("group must be 'O' or 'SO'")
    vp = v // 2
    T, Z = linalg.schur(A, output="real")
    blocks = []  # (lambda, col_a, col_b) with span oriented so the block is +lambda J
    singles = []
    i = 0
    while i < v:
        if i + 1 < v and abs(T[i + 1, i]) > 0.0:
            b = 0.5 * (T[i, i + 1] - T[i + 1, i])
            c0, c1 = Z[:, i], Z[:, i + 1]
            if b < 0:
                c0, c1 = c1, c0
            blocks.append((abs(b), c0, c1))
            i += 2
        else:
            singles.append(Z[:, i])
            i += 1
    # zero eigenvalues come as 1x1 blocks: pair them up into lambda = 0 blocks
    while len(blocks) < vp:
        blocks.append((0.0, singles.pop(0), singles.pop(0)))
    order = sorted(range(len(blocks)), key=lambda t: (-blocks[t][0], t))
    rows = []
    lam = np.zeros(vp)
    for n, t in enumerate(order):
        lam[n] = blocks[t][0]
        rows += [blocks[t][1], blocks[t][2]]
    if v % 2:
        rows.append(singles[0])
    k = np.array(rows)
    if lam.size and np.all(lam == 0.0):
        k = np.eye(v)
    eps = None
    if group == "SO":
        eps = 1
        if np.linalg.det(k) < 0:
            k[-1] = -k[-1]
            if v % 2 == 0 and lam[-1] > 0:
                eps = -1
    return AntisymPolar(lam, k, eps)


# ---------------------------------------------------------------------------
# Jacobian density


def _vandermonde_sq(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    out = np.ones(lam.shape[:-1])
    vp = lam.shape[-1]
    for j in range(vp):
        for k in range(j + 1, vp):
            out = out * (lam[..., j] ** 2 - lam[..., k] ** 2) ** 2
    return out


def _eta_shape(lam, v: int):
    lam = np.asarray(lam, dtype=float)
    out = _vandermonde_sq(lam)
    if v % 2:
        out = out * np.prod(lam**2, axis=-1)
    return out


def _cache_path(name: str) -> Optional[str]:
    d = os.environ.get("NILHARM_CACHE")
    if not d:
        return None
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, name)


@lru_cache(maxsize=None)
def eta_constant(v: int, n_nodes: int = 0) -> float:
    """Constant c in d eta = c prod(lambda_j^2 - lambda_k^2)^2 [prod lambda_i^2] d Lambda.

    Fixed by int_{A_v} exp(-|A|^2) dA = pi^{z/2} (|A|^2 = sum_{i<j} a_ij^2).
    With t = lambda^2 the polar side is a Laguerre-ensemble integral, done by
    a tensor generalized Gauss-Laguerre rule (exact for its polynomial part).
    """
    path = _cache_path(f"eta_constant_v{v}.json")
    if path and os.path.exists(path):
        with open(path) as fh:
            return float(json.load(fh)["c"])
    vp = v // 2
    z = v * (v - 1) // 2
    a = 0.5 if v % 2 else -0.5
    n = n_nodes or (vp + 2)
    t, w = special.roots_genlaguerre(n, a)
    grids = np.meshgrid(*([t] * vp), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.ones(len(T))
    for g in np.meshgrid(*([w] * vp), indexing="ij"):
        W = W * g.ravel()
    V = np.ones(len(T))
    for j in range(vp):
        for k in range(j + 1, vp):
            V = V * (T[:, j] - T[:, k]) ** 2
    # ordered simplex = full orthant / vp!; d lambda = dt / (2 sqrt t)
    polar_unit = np.sum(W * V) * 2.0 ** (-vp) / math.factorial(vp)
    c = math.pi ** (z / 2) / polar_unit
    if path:
        with open(path, "w") as fh:
            json.dump({"v": v, "c": c, "convention": "sum_{i<j} a_ij^2"}, fh)
    return c


def eta_constant_selberg(v: int) -> float:
    """Closed form of the same constant through the Selberg-Laguerre integral."""
    vp = v // 2
    z = v * (v - 1) // 2
    a = 0.5 if v % 2 else -0.5
    logI = sum(special.gammaln(a + 1 + j) + special.gammaln(j + 2) for j in range(vp))
    return math.exp(z / 2 * math.log(math.pi) + vp * math.log(2) + math.lgamma(vp + 1) - logI)


def eta_density(lam, v: int) -> np.ndarray:
    """d eta / d Lambda at Lambda (0 on the boundary of the simplex)."""
    return eta_constant(v) * _eta_shape(lam, v)


# ---------------------------------------------------------------------------
# Haar quadrature on O(v) / SO(v)


@dataclass
class OrthQuadrature:
    nodes: np.ndarray = field(repr=False)  # (N, v, v)
    weights: np.ndarray = field(repr=False)
    group: str = "O"
    order: int = 0
    seed: Optional[int] = None

    @property
    def v(self) -> int:
        return self.nodes.shape[-1]

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values) -> np.ndarray:
        """Weighted sum over the node axis (axis 0)."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def _rot2(th):
    c, s = np.cos(th), np.sin(th)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def _euler_so3(alpha, beta, gamma):
    def rz(t):
        c, s = np.cos(t), np.sin(t)
        o, z = np.ones_like(t), np.zeros_like(t)
        return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1),
                         np.stack([z, z, o], -1)], -2)

    def ry(t):
        c, s = np.cos(t), np.sin(t)
        o, z = np.ones_like(t), np.zeros_like(t)
        return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1),
                         np.stack([-s, z, c], -1)], -2)

    return rz(alpha) @ ry(beta) @ rz(gamma)


def haar_quadrature(v: int, group: str = "O", order: int = 16, seed: int = 0,
                    n_samples: int = 4096) -> OrthQuadrature:
    """Normalized Haar rule on O(v) or SO(v).

    v = 2: ``2*order`` equispaced rotations (plus their reflections for O);
    v = 3: ZYZ Euler angles, trapezoid in the two azimuths and Gauss-Legendre
    in cos(beta), doubled by -Id for O(3); v >= 4: Haar samples (QR with sign
    fix) with equal weights.
    """
    if v < 2:
        raise ValueError("v must be >= 2")
    if group not in ("O", "SO"):
        raise ValueError("group must be 'O' or 'SO'")
    if v == 2:
        m = 2 * order
        th = 2 * np.pi * np.arange(m) / m
        R = _rot2(th)
        nodes = R if group == "SO" else np.concatenate([R, R @ np.diag([1.0, -1.0])])
    elif v == 3:
        m = 2 * order
        az = 2 * np.pi * np.arange(m) / m
        cb, wb = special.roots_legendre(order)
        A_, B_, G_ = np.meshgrid(az, np.arccos(cb), az, indexing="ij")
        _, W_, _ = np.meshgrid(az, wb, az, indexing="ij")
        R = _euler_so3(A_.ravel(), B_.ravel(), G_.ravel())
        w = W_.ravel() / W_.sum()
        if group == "O":
            nodes = np.concatenate([R, -R])
            w = np.concatenate([w, w]) / 2
        else:
            nodes = R
        return OrthQuadrature(nodes, w, group, order, None)
    else:
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((n_samples, v, v))
        Qm, Rm = np.linalg.qr(G)
        d = np.sign(np.diagonal(Rm, axis1=1, axis2=2))
        nodes = Qm * d[:, None, :]
        if group == "SO":
            neg = np.linalg.det(nodes) < 0
            nodes[neg, :, 0] *= -1
        return OrthQuadrature(nodes, np.full(n_samples, 1.0 / n_samples), group, 0, seed)
    return OrthQuadrature(nodes, np.full(len(nodes), 1.0 / len(nodes)), group, order, None)


# ---------------------------------------------------------------------------
# integration in polar coordinates


def polar_integrate_antisym(g: Callable, v: int, kquad: Optional[OrthQuadrature] = None,
                            n_lambda: int = 40, lam_max: float = 8.0) -> float:
    """int_{O(v)} int_L g(k.D_2(Lambda)) d eta(Lambda) dk.

    ``g`` maps a stack of antisymmetric matrices (..., v, v) to values.  The
    simplex L is covered by Gauss-Legendre in each lambda on [0, lam_max]
    with the strict ordering imposed by the indicator (v' >= 2 integrates the
    full cube and divides by v'!, the integrand being symmetric).
    """
    vp = v // 2
    if kquad is None:
        kquad = haar_quadrature(v, "O", order=8)
    t, w = special.roots_legendre(n_lambda)
    lam1 = lam_max * (t + 1) / 2
    w1 = w * lam_max / 2
    grids = np.meshgrid(*([lam1] * vp), indexing="ij")
    L = np.stack([gr.ravel() for gr in grids], axis=-1)
    W = np.ones(len(L))
    for gr in np.meshgrid(*([w1] * vp), indexing="ij"):
        W = W * gr.ravel()
    W = W * eta_density(L, v) / math.factorial(vp)
    D = d2(np.sort(L, axis=1)[:, ::-1], v)  # (M, v, v)
    total = 0.0
    for kk, wk in zip(kquad.nodes, kquad.weights):
        Ak = kk @ D @ kk.T
        total = total + wk * np.sum(np.asarray(g(Ak)) * W)
    return total


# ---------------------------------------------------------------------------
# Laplacian in polar coordinates


def _E(v: int, m: int, n: int) -> np.ndarray:
    E = np.zeros((v, v))
    E[m, n] = 1.0
    E[n, m] = -1.0
    return E


def _chart(k, lam, Ahat, v):
    # psi(k exp(Ahat), Lambda) = k e^{Ahat} D_2(Lambda) e^{-Ahat} k^T
    U = k @ linalg.expm(Ahat)
    return U @ d2(lam, v) @ U.T


def polar_laplacian_rhs(f: Callable, k, lam, h: float = 1e-3) -> float:
    """Right-hand side of the Laplacian in polar coordinates at A = k.D_2(Lambda).

    ``f`` acts on single antisymmetric matrices.  g = f o psi is
    differentiated by central differences in the chart k exp(sum a_ij E_ij)
    and in Lambda.  For odd v the radial drift of each lambda_i is
    +2/lambda_i (see ``polar_laplacian_residual``).
    """
    k = np.asarray(k, dtype=float)
    lam = np.asarray(lam, dtype=float)
    v = k.shape[0]
    vp = v // 2
    Z = np.zeros((v, v))

    def g(Ahat, dl):
        return f(_chart(k, lam + dl, Ahat, v))

    g0 = g(Z, 0.0)

    def d2_dir(Ahat, dl):
        return (g(h * Ahat, h * dl) - 2 * g0 + g(-h * Ahat, -h * dl)) / h**2

    def d1_lam(i):
        e = np.zeros(vp)
        e[i] = 1.0
        return (g(Z, h * e) - g(Z, -h * e)) / (2 * h)

    zero_l = np.zeros(vp)
    total = 0.0
    for i in range(vp):
        e = np.zeros(vp)
        e[i] = 1.0
        total += d2_dir(Z, e)
    for i in range(vp):
        for j in range(i + 1, vp):
            li, lj = lam[i], lam[j]
            den = lj**2 - li**2
            a, b, c, d = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
            # D psi^{-1}(k E_mn) for (m, n) in I_ij, as directions in the chart
            dirs = [
                (-lj * _E(v, a, d) + li * _E(v, b, c)) / den,
                (-li * _E(v, a, d) + lj * _E(v, b, c)) / den,
                (lj * _E(v, a, c) + li * _E(v, b, d)) / den,
                (-li * _E(v, a, c) - lj * _E(v, b, d)) / den,
            ]
            for Ah in dirs:
                total += d2_dir(Ah, zero_l)
            total += -4.0 / den * (li * d1_lam(i) - lj * d1_lam(j))
    if v % 2:
        for i in range(vp):
            li = lam[i]
            for m in (2 * i, 2 * i + 1):
                total += d2_dir(_E(v, m, v - 1), zero_l) / li**2
            total += 2.0 / li * d1_lam(i)
    return total


def polar_laplacian_residual(f: Callable, k, lam, h: float = 1e-3, min_gap: Optional[float] = None):
    """|Delta f(A) - polar formula| at A = k^T... = k.D_2(Lambda).

    Delta f is the Euclidean Laplacian in the coordinates a_ij, i < j, by
    central differences.  Refuses nearly degenerate Lambda.
    """
    lam = np.asarray(lam, dtype=float)
    k = np.asarray(k, dtype=float)
    v = k.shape[0]
    gap = 10 * h if min_gap is None else min_gap
    vals = np.concatenate([lam, [0.0]]) if v % 2 else lam
    if np.any(np.diff(vals) > -gap) or np.any(lam <= gap):
        raise ValueError("Lambda too close to degenerate for the polar formula")
    A = k @ d2(lam, v) @ k.T
    lap = 0.0
    f0 = f(A)
    for (m, n) in pairs(v):
        E = _E(v, m, n)
        lap += (f(A + h * E) - 2 * f0 + f(A - h * E)) / h**2
    return abs(lap - polar_laplacian_rhs(f, k, lam, h))
