"""Spectral-side area functions.

For a bounded spherical function omega, <mu_s, omega> is the integral of
omega(s.n) against the unit-sphere measure; its s-derivatives give

    S^j(omega)^2 = int_0^oo |d^j/ds^j <mu_s, omega>|^2 s^{2j-1} ds.

The sphere integral is written in the angle theta with r^2 = cos(theta),
sqrt(1 - r^4) = sin(theta), which turns

    2 int_0^1 g(r) r^{v-1} (1-r^4)^{(z-2)/2} dr = int_0^{pi/2} g cos^{(v-2)/2} sin^{z-1} dtheta

and leaves every oscillatory factor smooth in theta.  Sphere integrals use
surface measures (same calibration as ``group.sphere_pairing``).
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special

from .group import GroupDims, TypeHModel, sphere_area
from .specfun import bessel_reduced, bessel_reduced_deriv, laguerre_norm
from .spherical import SphericalParam, TypeHBessel, TypeHLaguerre

__all__ = [
    "theta_rule",
    "dirichlet_rule",
    "mu_phi_pairing",
    "mu_phi_deriv",
    "typeh_pairing",
    "area_hat",
    "typeh_area_hat",
    "AreaScanReport",
    "scan_uniform_bound",
    "default_s_grid",
    "fd_derivative",
]

MAX_THETA_NODES = 6000
MAX_W_NODES = 400


def default_s_grid(n: int = 400, lo: float = 1e-3, hi: float = 50.0) -> np.ndarray:
    return np.geomspace(lo, hi, n)


@lru_cache(maxsize=256)
def _theta_rule_cached(vdim: int, zdim: int, n: int):
    a = (vdim - 2) / 2.0  # power of cos(theta), vanishing at theta = pi/2
    b = zdim - 1.0  # power of sin(theta), vanishing at 0
    t, w = special.roots_jacobi(n, a, b)
    th = np.pi * (t + 1) / 4
    # cos^a sin^b dtheta = (1-t)^a (1+t)^b (pi/4)^{a+b+1} * smooth(t) dt
    smooth = np.ones_like(th)
    if a:
        smooth *= (np.cos(th) / (np.pi / 2 - th)) ** a
    if b:
        smooth *= (np.sin(th) / th) ** b
    return th, w * (np.pi / 4) ** (a + b + 1) * smooth


def theta_rule(vdim: int, zdim: int, n: int):
    """Nodes theta and weights for int_0^{pi/2} g(theta) cos^{(v-2)/2} sin^{z-1} dtheta."""
    th, w = _theta_rule_cached(int(vdim), int(zdim), int(n))
    return th.copy(), w.copy()


def _beta_rule(a: float, b: float, n: int):
    # E[g(B)] for B ~ Beta(a, b)
    t, w = special.roots_jacobi(n, b - 1.0, a - 1.0)
    return (1 + t) / 2, w / w.sum()


def dirichlet_rule(alphas: Sequence[float], n: int):
    """Product rule for E[g(W)], W ~ Dirichlet(alphas), by stick breaking.

    Returns (W, weights) with W of shape (npts, K) and weights summing to 1.
    """
    alphas = [float(a) for a in alphas]
    K = len(alphas)
    if K == 0:
        return np.ones((1, 0)), np.ones(1)
    W = np.ones((1, 1))
    rem = np.ones(1)
    wts = np.ones(1)
    cols = []
    for k in range(K - 1):
        x, wx = _beta_rule(alphas[k], sum(alphas[k + 1:]), n)
        # expand the tensor product
        cols = [np.repeat(c, len(x)) for c in cols]
        rem_rep = np.repeat(rem, len(x))
        xs = np.tile(x, len(rem))
        cols.append(rem_rep * xs)
        rem = rem_rep * (1 - xs)
        wts = np.repeat(wts, len(x)) * np.tile(wx, len(wts))
    cols.append(rem)
    W = np.stack(cols, axis=1)
    return W, wts


# ---------------------------------------------------------------------------
# pairing <mu_s, phi> on N_{v,2}


def _structure(param: SphericalParam, v: int):
    param.validate(v)
    d = v - 2 * param.v0
    alphas = list(param.m) + ([d / 2.0] if d > 0 else [])
    lam_norm = math.sqrt(sum(x * x for x in param.lambda_star))
    return d, alphas, lam_norm


def _node_counts(param: SphericalParam, s_max: float, lam_norm: float):
    lmax = max(param.l) if param.l else 0
    lam_top = max(param.lambda_star) if param.lambda_star else 0.0
    osc = (s_max**2 * lam_norm + 2 * s_max * param.r_star) / math.pi
    n_th = 32 + int(math.ceil(1.5 * osc + 4 * sum(param.l) + 2 * s_max * math.sqrt(lam_top)))
    n_w = 12 + int(math.ceil(2 * lmax + 1.5 * s_max * math.sqrt(lam_top)
                             + 2 * s_max * param.r_star / math.pi))
    return min(n_th, MAX_THETA_NODES), min(n_w, MAX_W_NODES)


def _pairing_batch(param: SphericalParam, v: int, s: np.ndarray, n_theta=None, n_w=None):
    dims = GroupDims(v)
    d, alphas, lam_norm = _structure(param, v)
    nt, nw = _node_counts(param, float(np.max(s)), lam_norm)
    nt = n_theta or nt
    nw = n_w or nw
    th, wth = theta_rule(v, dims.z, nt)
    r2 = np.cos(th)
    sn = np.sin(th)
    W, ww = dirichlet_rule(alphas, nw) if len(alphas) > 1 else (np.ones((1, len(alphas))), np.ones(1))
    S = s[:, None, None]
    inner = np.ones((len(s), len(th), len(ww)))
    for j, (lamj, lj, mj) in enumerate(zip(param.distinct, param.l, param.m)):
        y = lamj * S**2 * r2[None, :, None] * W[None, None, :, j] / 2.0
        inner = inner * laguerre_norm(lj, mj - 1.0, y)
    if d > 0 and param.r_star != 0:
        t = S * param.r_star * np.sqrt(r2[None, :, None] * W[None, None, :, -1])
        inner = inner * bessel_reduced((d - 2) / 2.0, t)
    inner = inner @ ww  # (ns, nt)
    if lam_norm > 0:
        inner = inner * bessel_reduced((dims.z - 2) / 2.0, s[:, None] ** 2 * sn[None, :] * lam_norm)
    return (inner @ wth) * sphere_area(v) * sphere_area(dims.z)


def _batched(fn: Callable, s, chunk: int = 32):
    s = np.asarray(s, dtype=float)
    flat = s.ravel()
    out = np.empty(flat.shape, dtype=complex)
    order = np.argsort(flat)
    for i in range(0, len(order), chunk):
        idx = order[i:i + chunk]
        out[idx] = fn(flat[idx])
    return out.reshape(s.shape)


def mu_phi_pairing(param: SphericalParam, s, v: int, n_theta: Optional[int] = None,
                   n_w: Optional[int] = None):
    """<mu_s, phi_param> (surface-measure calibration); vectorized over s.

    Node counts grow with s to resolve the oscillatory factors unless fixed
    by ``n_theta`` / ``n_w``.
    """
    out = _batched(lambda ss: _pairing_batch(param, v, ss, n_theta, n_w), s)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# derivatives in s

_STENCILS = {
    1: ({1: 0.5, -1: -0.5}, 1),
    2: ({1: 1.0, 0: -2.0, -1: 1.0}, 2),
    3: ({2: 0.5, 1: -1.0, -1: 1.0, -2: -0.5}, 3),
}


def fd_derivative(fn: Callable, s, j: int, h):
    """j-th central difference with one Richardson step (h, h/2).

    ``fn`` maps an array of s values to an array of values.  Returns
    (derivative, error estimate) arrays.
    """
    if j not in _STENCILS:
        raise ValueError("j must be 1, 2 or 3")
    s = np.asarray(s, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), s.shape)
    reach = max(abs(k) for k in _STENCILS[j][0])
    if np.any(s - reach * h <= 0):
        raise ValueError("s too small for the difference stencil")
    coef, p = _STENCILS[j]
    shifts = sorted(coef)
    pts = np.concatenate([np.concatenate([s + k * h for k in shifts]),
                          np.concatenate([s + k * h / 2 for k in shifts])])
    vals = np.asarray(fn(pts)).reshape(2, len(shifts), *s.shape)
    D1 = sum(coef[k] * vals[0, i] for i, k in enumerate(shifts)) / h**p
    D2 = sum(coef[k] * vals[1, i] for i, k in enumerate(shifts)) / (h / 2) ** p
    R = (4 * D2 - D1) / 3
    return R, np.abs(R - D2)


def _default_step(param: SphericalParam, s):
    lam_norm = math.sqrt(sum(x * x for x in param.lambda_star))
    lmax = max(param.l) if param.l else 0
    scale = 1.0 + np.asarray(s) * (lam_norm + max(param.lambda_star or (0.0,)) * (2 * lmax + 1)) \
        + param.r_star
    return 0.02 * np.minimum(np.asarray(s, dtype=float), 1.0 / scale)


def mu_phi_deriv(param: SphericalParam, s, j: int, v: int, step=None):
    """(d^j/ds^j <mu_s, phi>, error estimate) by Richardson-extrapolated central
    differences; the default step is proportional to s and to the local
    oscillation scale."""
    h = _default_step(param, s) if step is None else step
    R, err = fd_derivative(lambda ss: mu_phi_pairing(param, ss, v), s, j, h)
    if np.ndim(R) == 0:
        return complex(R), float(err)
    return R, err


# ---------------------------------------------------------------------------
# type-H groups


def typeh_pairing(model: TypeHModel, family: Union[TypeHLaguerre, TypeHBessel], s,
                  n_theta: Optional[int] = None):
    """<mu_s, omega> for the closed-form type-H spherical functions."""
    V, z = model.v_dim, model.z_dim
    vp = V // 2
    s = np.asarray(s, dtype=float)

    def batch(ss):
        smax = float(np.max(ss))
        if isinstance(family, TypeHBessel):
            osc = smax * family.r / math.pi
            nt = n_theta or min(32 + int(3 * osc), MAX_THETA_NODES)
            th, w = theta_rule(V, z, nt)
            vals = bessel_reduced(vp - 1.0, family.r * ss[:, None] * np.sqrt(np.cos(th))[None, :])
        else:
            nz = float(np.linalg.norm(family.zeta))
            osc = smax**2 * nz / math.pi
            nt = n_theta or min(32 + int(1.5 * osc + 4 * family.l + 2 * smax * math.sqrt(nz)),
                                MAX_THETA_NODES)
            th, w = theta_rule(V, z, nt)
            S2 = ss[:, None] ** 2
            vals = (laguerre_norm(family.l, vp - 1.0, 0.5 * nz * S2 * np.cos(th)[None, :])
                    * bessel_reduced((z - 2) / 2.0, S2 * np.sin(th)[None, :] * nz))
        return (vals @ w) * sphere_area(V) * sphere_area(z)

    out = _batched(batch, s)
    return out if out.ndim else complex(out)


def _typeh_bessel_deriv(model: TypeHModel, family: TypeHBessel, s, j: int, n_theta=None):
    # d^j/ds^j J(r s rho) = (r rho)^j J^{(j)}(r s rho), averaged over the sphere
    V, z = model.v_dim, model.z_dim
    vp = V // 2
    s = np.asarray(s, dtype=float)

    def batch(ss):
        osc = float(np.max(ss)) * family.r / math.pi
        nt = n_theta or min(32 + int(3 * osc), MAX_THETA_NODES)
        th, w = theta_rule(V, z, nt)
        rho = np.sqrt(np.cos(th))[None, :]
        vals = (family.r * rho) ** j * bessel_reduced_deriv(vp - 1.0, family.r * ss[:, None] * rho, j)
        return (vals @ w) * sphere_area(V) * sphere_area(z)

    return _batched(batch, s)


# ---------------------------------------------------------------------------
# area functionals


def _tail_share(s, integrand) -> float:
    """Geometric extrapolation of the last decade: with T1, T2 the integrals
    over the last two decades and q = T2 / T1, the tail beyond the grid is
    T2 q / (1 - q); returned relative to the total (inf if q >= 1)."""
    s = np.asarray(s)
    hi = s[-1]
    m2 = s >= hi / 10
    m1 = (s >= hi / 100) & (s <= hi / 10)
    if m2.sum() < 3 or m1.sum() < 3:
        return float("nan")
    T2 = np.trapezoid(integrand[m2], s[m2])
    T1 = np.trapezoid(integrand[m1], s[m1])
    total = np.trapezoid(integrand, s)
    if total <= 0:
        return 0.0
    if T1 <= 0:
        return 0.0 if T2 <= 0 else float("inf")
    q = T2 / T1
    if q >= 1:
        return float("inf")
    return float(T2 * q / (1 - q) / total)


@dataclass
class AreaValue:
    value: float
    tail: float
    deriv_err: float

    def __float__(self):
        return self.value


def _area_from_deriv(s, D, j, tail_tol, err=None) -> AreaValue:
    integrand = np.abs(D) ** 2 * s ** (2 * j - 1)
    val = math.sqrt(max(np.trapezoid(integrand, s), 0.0))
    tail = _tail_share(s, integrand)
    if not (tail <= tail_tol):
        warnings.warn(f"area integral tail share {tail:.3g} exceeds {tail_tol:g}")
    derr = float(np.max(np.abs(err))) if err is not None else 0.0
    return AreaValue(val, tail, derr)


def area_hat(param: SphericalParam, j: int, v: int, s_grid=None, tail_tol: float = 1e-2) -> AreaValue:
    """sqrt(int |d^j_s <mu_s, phi>|^2 s^{2j-1} ds) by the trapezoid rule on s_grid."""
    s = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    if param.v0 == 0 and param.r_star == 0:
        return AreaValue(0.0, 0.0, 0.0)
    D, err = mu_phi_deriv(param, s, j, v)
    return _area_from_deriv(s, D, j, tail_tol, err)


def typeh_area_hat(model: TypeHModel, family: Union[TypeHLaguerre, TypeHBessel], j: int,
                   s_grid=None, tail_tol: float = 1e-2) -> AreaValue:
    """S^j for the type-H families Phi_r (analytic s-derivative) and Phi_{zeta,l}
    (Richardson differences)."""
    vp = model.v_dim // 2
    if not 1 <= j <= vp - 1:
        warnings.warn(f"j = {j} lies outside 1..v'-1 = 1..{vp - 1}; the bound is not expected")
    s = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    if isinstance(family, TypeHBessel):
        if family.r == 0:
            return AreaValue(0.0, 0.0, 0.0)
        D = _typeh_bessel_deriv(model, family, s, j)
        return _area_from_deriv(s, D, j, tail_tol)
    nz = float(np.linalg.norm(family.zeta))
    scale = 1.0 + s * nz * (2 * family.l + 2)
    h = 0.02 * np.minimum(s, 1.0 / scale)
    D, err = fd_derivative(lambda ss: typeh_pairing(model, family, ss), s, j, h)
    return _area_from_deriv(s, D, j, tail_tol, err)


# ---------------------------------------------------------------------------
# scans


@dataclass
class AreaScanReport:
    """Per-parameter S^j values over a finite grid."""

    j: int
    labels: list = field(default_factory=list)
    values: list = field(default_factory=list)
    tails: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def max(self) -> float:
        return max(self.values) if self.values else float("nan")

    @property
    def argmax(self):
        return self.labels[int(np.argmax(self.values))] if self.values else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["param", f"S_hat_{self.j}", "tail"])
        for lab, val, t in zip(self.labels, self.values, self.tails):
            w.writerow([lab, f"{val:.10g}", f"{t:.3g}"])
        return buf.getvalue()


def _label(p) -> str:
    if isinstance(p, SphericalParam):
        return p.to_json()
    if isinstance(p, TypeHBessel):
        return f"Phi_r(r={p.r:g})"
    return f"Phi_zeta_l(|zeta|={np.linalg.norm(p.zeta):g},l={p.l})"


def scan_uniform_bound(param_grid: Sequence, j: int, s_grid=None, v: Optional[int] = None,
                       model: Optional[TypeHModel] = None, tail_tol: float = 1e-2) -> AreaScanReport:
    """S^j over a parameter grid (SphericalParam with ``v``, or type-H families
    with ``model``)."""
    s = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    rep = AreaScanReport(j, meta={"s_min": float(s[0]), "s_max": float(s[-1]), "n_s": len(s),
                                  "group": f"N_{{{v},2}}" if model is None else "type-H"})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for p in param_grid:
            if model is None:
                if v is None:
                    raise ValueError("v is required for N_{v,2} parameters")
                a = area_hat(p, j, v, s, tail_tol)
            else:
                a = typeh_area_hat(model, p, j, s, tail_tol)
            rep.labels.append(_label(p))
            rep.values.append(a.value)
            rep.tails.append(a.tail)
    return rep
