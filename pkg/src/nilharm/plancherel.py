"""Radial Plancherel measure on N_{v,2}: weights, forward transforms, inversion,
Parseval and multiplier kernels.

Conventions: the forward transform pairs f with phi without conjugation,
<f, phi> = int f phi dn; inversion is f(n) = int conj(phi)(n) ghat(phi) dm(phi).
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .group import GroupDims, GroupPoint, haar_integrate_group, pairs
from .matpolar import OrthQuadrature, eta_density, haar_quadrature
from .specfun import laguerre_fn
from .spherical import SphericalParam, phi_eval, sublaplacian_eigenvalue

__all__ = [
    "plancherel_constant",
    "plancherel_weight",
    "SpectralGrid",
    "spectral_grid",
    "atom_param",
    "transform_direct",
    "transform_reduced",
    "inversion",
    "parseval_residual",
    "multiplier_kernel",
    "RadialKernel",
    "V2RadialQuadrature",
    "laguerre_table",
    "radial_defect",
    "spectral_tail",
]


def plancherel_constant(v: int) -> float:
    """c(v) = (2 pi)^{-z-v'} (v even) or 2 (2 pi)^{-z-1-v'} (v odd)."""
    d = GroupDims(v)
    if d.odd:
        return 2.0 * (2 * math.pi) ** (-d.z - 1 - d.v_prime)
    return (2 * math.pi) ** (-d.z - d.v_prime)


def plancherel_weight(param: SphericalParam, v: int) -> float:
    """Density c(v) prod(lambda_j) d eta/d Lambda per unit d Lambda (x dr* if v odd,
    x counting measure in l).  Zero off the open simplex."""
    lam = np.asarray(param.lambda_star, dtype=float)
    if lam.size != v // 2:
        raise ValueError("Lambda must have length v // 2")
    if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        return 0.0
    return float(plancherel_constant(v) * np.prod(lam) * eta_density(lam, v))


def _plancherel_density(lam: np.ndarray, v: int) -> np.ndarray:
    return plancherel_constant(v) * np.prod(lam, axis=-1) * eta_density(lam, v)


# ---------------------------------------------------------------------------
# spectral grids


@dataclass
class SpectralGrid:
    """Atoms (r*, Lambda, l) of the Plancherel support with quadrature weights.

    ``lam`` has shape (n, v'), ``l`` (n, v') and ``r`` (n,) (zeros when v is
    even).  ``meta`` records the truncation.
    """

    v: int
    r: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    l: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.w)

    def energies(self) -> np.ndarray:
        """Sub-Laplacian eigenvalues sum lambda_j (2 l_j + 1) + r^2."""
        return np.sum(self.lam * (2 * self.l + 1), axis=1) + self.r**2

    def params(self):
        for r, lam, l in zip(self.r, self.lam, self.l):
            yield atom_param(r, lam, l)

    def to_jsonl(self, ghat=None) -> str:
        g = np.zeros(len(self), dtype=complex) if ghat is None else np.asarray(ghat, dtype=complex)
        lines = []
        for i in range(len(self)):
            lines.append(json.dumps({"r": float(self.r[i]), "lambda": self.lam[i].tolist(),
                                     "l": [int(x) for x in self.l[i]], "w": float(self.w[i]),
                                     "g": [float(g[i].real), float(g[i].imag)]}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str, v: int):
        rows = [json.loads(s) for s in text.splitlines() if s.strip()]
        r = np.array([d["r"] for d in rows], dtype=float)
        lam = np.array([d["lambda"] for d in rows], dtype=float).reshape(len(rows), v // 2)
        l = np.array([d["l"] for d in rows], dtype=int).reshape(len(rows), v // 2)
        w = np.array([d["w"] for d in rows], dtype=float)
        g = np.array([complex(*d.get("g", [0.0, 0.0])) for d in rows])
        return cls(v, r, lam, l, w), g


def atom_param(r, lam, l) -> SphericalParam:
    return SphericalParam(float(r), tuple(float(x) for x in lam), tuple(int(x) for x in l))


def _log_panels(a: float, b: float, n_cells: int, order: int):
    edges = np.geomspace(a, b, n_cells + 1)
    t, w = special.roots_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = (lo + (hi - lo) * (t + 1) / 2).ravel()
    wx = ((hi - lo) / 2 * w).ravel()
    return x, wx


def spectral_grid(v: int, lam_range=(0.05, 20.0), n_cells: int = 200, order: int = 4,
                  lmax: int = 30, rmax: float = 12.0, n_r: int = 48) -> SpectralGrid:
    """Tensor quadrature on the truncated Plancherel support.

    Lambda: composite Gauss-Legendre on log-spaced cells of ``lam_range`` in
    each coordinate, keeping strictly decreasing tuples; l: all multi-indices
    with entries <= lmax; r* (odd v): Gauss-Legendre on [0, rmax].
    """
    d = GroupDims(v)
    vp = d.v_prime
    x, wx = _log_panels(lam_range[0], lam_range[1], n_cells, order)
    if vp == 1:
        lam = x[:, None]
        wl = wx
    else:
        idx = np.array(list(itertools.combinations(range(len(x))[::-1], vp)))
        # combinations of descending indices give strictly decreasing tuples
        lam = x[idx]
        wl = np.prod(wx[idx], axis=1)
    dens = _plancherel_density(lam, v) * wl
    ls = np.array(list(itertools.product(range(lmax + 1), repeat=vp)), dtype=int)
    if d.odd:
        tr, wr = special.roots_legendre(n_r)
        rr = rmax * (tr + 1) / 2
        wr = wr * rmax / 2
    else:
        rr, wr = np.zeros(1), np.ones(1)
    nL, nl, nr = len(lam), len(ls), len(rr)
    R = np.repeat(rr, nL * nl)
    LAM = np.tile(np.repeat(lam, nl, axis=0), (nr, 1))
    Ls = np.tile(ls, (nr * nL, 1))
    W = np.repeat(wr, nL * nl) * np.tile(np.repeat(dens, nl), nr)
    meta = {"lam_range": list(lam_range), "n_cells": n_cells, "order": order, "lmax": lmax,
            "rmax": rmax if d.odd else 0.0, "n_r": n_r if d.odd else 0}
    return SpectralGrid(v, R, LAM, Ls, W, meta)


# ---------------------------------------------------------------------------
# transforms


def radial_defect(f: Callable, dims: GroupDims, n: int = 16, seed: int = 0) -> float:
    """max |f(k.p) - f(p)| / max |f(p)| over random points and rotations."""
    from .group import k_action
    from scipy.stats import ortho_group

    rng = np.random.default_rng(seed)
    p = GroupPoint(rng.normal(size=(n, dims.v)), rng.normal(size=(n, dims.z)))
    k = ortho_group.rvs(dims.v, size=n, random_state=rng) if dims.v > 1 else np.ones((n, 1, 1))
    k = np.asarray(k).reshape(n, dims.v, dims.v)
    f0 = np.asarray(f(p))
    f1 = np.asarray(f(k_action(k, p)))
    scale = max(float(np.max(np.abs(f0))), 1e-300)
    return float(np.max(np.abs(f1 - f0)) / scale)


def spectral_tail(ghat, grid: SpectralGrid) -> float:
    """Share of sum |ghat| w carried by the outermost truncation layer
    (l_j = L_max, or Lambda in the first/last decade-tenth of the lambda range)."""
    g = np.abs(np.asarray(ghat)) * grid.w
    tot = float(np.sum(g))
    if tot == 0.0:
        return 0.0
    lo, hi = grid.meta.get("lam_range", (grid.lam.min(), grid.lam.max()))
    edge = (hi / lo) ** 0.1
    outer = (np.any(grid.l >= grid.meta.get("lmax", grid.l.max()), axis=1)
             | np.any(grid.lam < lo * edge, axis=1) | np.any(grid.lam > hi / edge, axis=1))
    return float(np.sum(g[outer]) / tot)


def transform_direct(f: Callable, param: SphericalParam, dims: GroupDims,
                     kquad: Optional[OrthQuadrature] = None, radial_tol: float = 1e-6,
                     **haar_kw) -> complex:
    """<f, phi> = int_N f phi dn by direct group integration."""
    if radial_defect(f, dims) > radial_tol:
        warnings.warn("f does not look K-radial; <f, phi> is then not the radial transform")
    if kquad is None and param.v0 > 0:
        kquad = haar_quadrature(dims.v, "SO" if param.epsilon is not None else "O")

    def integrand(p):
        return np.asarray(f(p)) * phi_eval(param, p, kquad)

    return haar_integrate_group(integrand, dims, **haar_kw).value


def transform_reduced(f: Callable, param: SphericalParam, dims: GroupDims, n_rp: int = 64,
                      rp_max: Optional[float] = None, n_a: int = 96, a_max: float = 8.0,
                      n_xv: int = 48, xv_max: float = 8.0) -> complex:
    """<f, phi> = (2 pi)^{v'} prod(1/lambda_j) int F~(r') prod Lbar^0_{l_j}(r'_j) dr'.

    F~ is the Fourier transform, in A at D_2(Lambda) (and in x_v at r* for odd
    v), of the slice f(exp(sum r_i X_{2i-1} + x_v X_v + A)), with
    r'_j = lambda_j r_j^2 / 2.  Every axis uses Gauss-Legendre on a box; the
    phase is e^{+i...} to match Theta.
    """
    v, vp, z = dims.v, dims.v_prime, dims.z
    lam = np.asarray(param.lambda_star, dtype=float)
    if lam.size != vp or np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
        raise ValueError("reduced transform needs Lambda in the open simplex")
    l = np.asarray(param.l, dtype=int)
    if rp_max is None:
        rp_max = 4.0 * (2 * int(l.max()) + 1) + 40.0
    t, w = special.roots_legendre(n_rp)
    rp1 = rp_max * (t + 1) / 2
    wrp1 = w * rp_max / 2
    ta, wa = special.roots_legendre(n_a)
    a1, wa1 = a_max * ta, a_max * wa
    axes = [rp1] * vp
    wts = [wrp1] * vp
    if dims.odd:
        tx, wxv = special.roots_legendre(n_xv)
        axes.append(xv_max * tx)
        wts.append(xv_max * wxv)
    axes += [a1] * z
    wts += [wa1] * z
    pr = pairs(v)
    block_pairs = [pr.index((2 * i, 2 * i + 1)) for i in range(vp)]
    total = 0.0 + 0.0j
    # iterate over the r' grid to keep memory bounded
    for ridx in itertools.product(range(n_rp), repeat=vp):
        rp = rp1[list(ridx)]
        wr = np.prod(wrp1[list(ridx)])
        lag = np.prod([laguerre_fn(int(l[j]), 0.0, rp[j]) for j in range(vp)])
        if lag == 0.0:
            continue
        sub_axes = axes[vp:]
        sub_w = wts[vp:]
        grids = np.meshgrid(*sub_axes, indexing="ij") if sub_axes else []
        W = np.ones(grids[0].shape) if grids else np.ones(())
        for g in np.meshgrid(*sub_w, indexing="ij"):
            W = W * g
        npts = W.size
        x = np.zeros((npts, v))
        for j in range(vp):
            x[:, 2 * j] = np.sqrt(2 * rp[j] / lam[j])
        off = 0
        phase = np.zeros(npts)
        if dims.odd:
            x[:, v - 1] = grids[0].ravel()
            phase += param.r_star * x[:, v - 1]
            off = 1
        a = np.stack([g.ravel() for g in grids[off:]], axis=-1)
        for j, c in enumerate(block_pairs):
            phase += lam[j] * a[:, c]
        vals = np.asarray(f(GroupPoint(x, a))) * np.exp(1j * phase)
        total += wr * lag * np.sum(vals * W.ravel())
    return complex((2 * np.pi) ** vp / np.prod(lam) * total)


def _phi_v2(lam, l, x, a):
    # closed-form O(2) spherical functions cos(lambda a) Lbar_l(lambda |x|^2 / 2)
    y = lam * np.sum(x * x, axis=-1) / 2.0
    return np.cos(lam * a[..., 0]) * laguerre_fn(int(l), 0.0, y)


def inversion(ghat, p: GroupPoint, grid: SpectralGrid, kquad: Optional[OrthQuadrature] = None):
    """f(p) = sum_atoms conj(phi_atom(p)) ghat(atom) w(atom)."""
    ghat = np.asarray(ghat, dtype=complex)
    if ghat.shape != (len(grid),):
        raise ValueError("ghat must have one value per atom")
    if grid.v == 2:
        # vectorized closed form, grouped by l
        flat = GroupPoint(p.x.reshape(-1, 2), p.a.reshape(-1, 1))
        out = np.zeros(len(flat.x), dtype=complex)
        lam = grid.lam[:, 0]
        for l in np.unique(grid.l[:, 0]):
            sel = grid.l[:, 0] == l
            if not np.any(ghat[sel]):
                continue
            y = np.sum(flat.x**2, axis=-1)[None, :] * lam[sel, None] / 2.0
            ph = np.cos(lam[sel, None] * flat.a[None, :, 0]) * laguerre_fn(int(l), 0.0, y)
            out += (ghat[sel] * grid.w[sel]) @ ph
        return out.reshape(p.x.shape[:-1])
    if kquad is None:
        kquad = haar_quadrature(grid.v, "O")
    out = 0.0
    for i, prm in enumerate(grid.params()):
        if ghat[i] == 0:
            continue
        out = out + np.conj(phi_eval(prm, p, kquad)) * ghat[i] * grid.w[i]
    return out


def parseval_residual(f_norm2: float, ghat, grid: SpectralGrid, relative: bool = True) -> float:
    """| ||f||^2 - sum |ghat|^2 w |, optionally relative to ||f||^2."""
    spec = float(np.sum(np.abs(np.asarray(ghat)) ** 2 * grid.w))
    res = abs(f_norm2 - spec)
    return res / f_norm2 if relative and f_norm2 else res


@dataclass
class RadialKernel:
    """Radial function given by its spectral coefficients on a grid."""

    grid: SpectralGrid
    ghat: np.ndarray
    kquad: Optional[OrthQuadrature] = None

    @property
    def tail(self) -> float:
        return spectral_tail(self.ghat, self.grid)

    def __call__(self, p: GroupPoint):
        return inversion(self.ghat, p, self.grid, self.kquad)


def multiplier_kernel(m_fn: Callable, grid: SpectralGrid,
                      kquad: Optional[OrthQuadrature] = None) -> RadialKernel:
    """Kernel M with <M, phi> = m(E_L(phi)) on the grid atoms."""
    ghat = np.asarray(m_fn(grid.energies()), dtype=complex) * np.ones(len(grid))
    ker = RadialKernel(grid, ghat, kquad)
    if ker.tail > 5e-2:
        warnings.warn(f"multiplier decays slowly on the grid (tail share {ker.tail:.2g})")
    return ker


# ---------------------------------------------------------------------------
# v = 2 tensor engine


def laguerre_table(lmax: int, x: np.ndarray) -> np.ndarray:
    """Lbar^0_l(x) = L_l(x) e^{-x/2} for l = 0..lmax, shape (lmax+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((lmax + 1,) + x.shape)
    e = np.exp(-x / 2)
    out[0] = e
    if lmax >= 1:
        out[1] = (1 - x) * e
    for k in range(1, lmax):
        out[k + 1] = ((2 * k + 1 - x) * out[k] - k * out[k - 1]) / (k + 1)
    return out


@dataclass
class V2RadialQuadrature:
    """Quadrature for radial functions on N_{2,2}, tabulated on (u = |x|^2, a >= 0).

    int_N f = 2 pi int_0^oo du int_0^oo da f(u, a) for f radial (even in a).
    u: composite Gauss-Legendre on geometric panels; a: Gauss-Legendre panels
    of fixed width.
    """

    u: np.ndarray = field(repr=False)
    wu: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    wa: np.ndarray = field(repr=False)
    taper: np.ndarray = field(default=None, repr=False)

    @classmethod
    def build(cls, u_max: float = 400.0, u_first: float = 0.5, ratio: float = 1.2,
              order_u: int = 24, a_max: float = 60.0, a_panel: float = 1.0, order_a: int = 12,
              taper: float = 0.5):
        edges = [0.0, u_first]
        while edges[-1] < u_max:
            edges.append(min(edges[-1] * ratio, u_max) if edges[-1] * ratio < u_max else u_max)
        t, w = special.roots_legendre(order_u)
        e = np.array(edges)
        lo, hi = e[:-1, None], e[1:, None]
        u = (lo + (hi - lo) * (t + 1) / 2).ravel()
        wu = ((hi - lo) / 2 * w).ravel()
        na = int(math.ceil(a_max / a_panel))
        ta, wa_ = special.roots_legendre(order_a)
        ea = np.linspace(0.0, a_max, na + 1)
        lo, hi = ea[:-1, None], ea[1:, None]
        a = (lo + (hi - lo) * (ta + 1) / 2).ravel()
        wa = ((hi - lo) / 2 * wa_).ravel()
        # smooth roll-off on the last `taper` fraction of [0, a_max]: the a-integrals
        # of truncated spectra converge only conditionally, and a smooth cutoff
        # suppresses the leakage of a sharp one
        s = np.clip((a - (1 - taper) * a_max) / max(taper * a_max, 1e-300), 0.0, 1.0)
        tw = np.where(s >= 1.0, 0.0, np.cos(np.pi * s / 2) ** 2) if taper > 0 else np.ones_like(a)
        return cls(u, wu, a, wa, tw)

    def points(self) -> GroupPoint:
        U, A = np.meshgrid(self.u, self.a, indexing="ij")
        x = np.stack([np.sqrt(U), np.zeros_like(U)], axis=-1)
        return GroupPoint(x, A[..., None])

    def tabulate(self, f: Callable) -> np.ndarray:
        return np.asarray(f(self.points()))

    def norm2(self, F: np.ndarray) -> float:
        return float(2 * np.pi * self.wu @ (np.abs(F) ** 2) @ self.wa)

    def integrate(self, F: np.ndarray) -> complex:
        return 2 * np.pi * self.wu @ F @ self.wa

    def synthesize(self, ghat, grid: SpectralGrid) -> np.ndarray:
        """Table of the inversion sum on (u, a)."""
        if grid.v != 2:
            raise ValueError("v = 2 grids only")
        ghat = np.asarray(ghat, dtype=complex)
        lam, ls = grid.lam[:, 0], grid.l[:, 0]
        ulam, inv = np.unique(lam, return_inverse=True)
        lmax = int(ls.max())
        coef = np.zeros((len(ulam), lmax + 1), dtype=complex)
        np.add.at(coef, (inv, ls), ghat * grid.w)
        S = np.zeros((len(ulam), len(self.u)), dtype=complex)
        for i, lm in enumerate(ulam):
            S[i] = coef[i] @ laguerre_table(lmax, lm * self.u / 2)
        C = np.cos(np.outer(ulam, self.a))
        return S.T @ C

    def analyze(self, F: np.ndarray, grid: SpectralGrid) -> np.ndarray:
        """<f, phi_atom> for every atom of a v = 2 grid from the table of f."""
        lam, ls = grid.lam[:, 0], grid.l[:, 0]
        ulam, inv = np.unique(lam, return_inverse=True)
        lmax = int(ls.max())
        Fa = (F * (self.wa * self.taper)[None, :]) @ np.cos(np.outer(self.a, ulam))  # (nu, nlam)
        out = np.zeros(len(grid), dtype=complex)
        res = np.zeros((len(ulam), lmax + 1), dtype=complex)
        for i, lm in enumerate(ulam):
            res[i] = laguerre_table(lmax, lm * self.u / 2) @ (self.wu * Fa[:, i])
        out = 2 * np.pi * res[inv, ls]
        return out
