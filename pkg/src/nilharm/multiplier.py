"""Dyadic decomposition of the Plancherel support and the multiplier criterion.

Parameters (r, Lambda, l) use the decreasing order lambda_1 > ... > lambda_v' > 0,
so the pair quantities binned by delta_{ij} (i < j) are lambda_i^2 - lambda_j^2 > 0.

The operators Xi and Aleph act on functions of the spectral parameter (for
instance phi_param(n) at a fixed point n); the l-shifts alpha, beta, gamma come
from ``specfun``, derivatives in lambda and r are analytic when the function
provides them and Richardson central differences otherwise.
"""
from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .group import GroupDims
from .specfun import SeqOperator, laguerre_norm, laguerre_norm_deriv

__all__ = [
    "bump",
    "smooth_step",
    "MultIndex",
    "chi_iota",
    "chi_h",
    "enumerate_active",
    "overlap_bound",
    "SpectralFunction",
    "v2_spherical_function",
    "phi_spectral_function",
    "xi_apply",
    "aleph_apply",
    "aleph_terms",
    "t_iota_symbol",
    "t_iota_norm",
    "iota_grid",
    "multiplier_criterion",
]


# ---------------------------------------------------------------------------
# dyadic bump


def smooth_step(u):
    """C^oo step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return a / (a + b)


def bump(y):
    """chi(y) = h(log2 y + 1) - h(log2 y) with h a smooth step.

    Supported in [1/2, 2], non-negative, and sum_j chi(2^{-j} y) = 1 for y > 0
    (the sum telescopes).
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    u = np.log2(y[pos])
    out[pos] = smooth_step(u + 1.0) - smooth_step(u)
    out = np.clip(out, 0.0, None)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# multi-indices


def _pairs(vp: int):
    return [(i, j) for i in range(vp) for j in range(i + 1, vp)]


@dataclass(frozen=True)
class MultIndex:
    """iota = (theta, eta, delta, zeta); theta is None for even v and
    delta is indexed by the pairs i < j in lexicographic order."""

    theta: Optional[int]
    eta: tuple
    delta: tuple
    zeta: tuple

    def __post_init__(self):
        object.__setattr__(self, "eta", tuple(int(x) for x in self.eta))
        object.__setattr__(self, "delta", tuple(int(x) for x in self.delta))
        object.__setattr__(self, "zeta", tuple(int(x) for x in self.zeta))
        if self.theta is not None:
            object.__setattr__(self, "theta", int(self.theta))
        vp = len(self.eta)
        if len(self.zeta) != vp or len(self.delta) != vp * (vp - 1) // 2:
            raise ValueError("inconsistent index lengths")
        if any(z < 0 for z in self.zeta):
            raise ValueError("zeta must be natural")

    @property
    def v_prime(self) -> int:
        return len(self.eta)

    @property
    def odd(self) -> bool:
        return self.theta is not None

    @property
    def v(self) -> int:
        return 2 * self.v_prime + (1 if self.odd else 0)

    def constraint_defects(self) -> list:
        """Violated necessary conditions for a non-empty support (empty if ok).

        With lambda_i > lambda_j (i < j) and the bump supported in [1/2, 2]:
        eta_j <= eta_i + 1 and 2^{eta_i}/4 - 2^{eta_j} < 2^{delta_ij} < 4 2^{eta_i} - 2^{eta_j}.
        """
        bad = []
        for k, (i, j) in enumerate(_pairs(self.v_prime)):
            ei, ej, d = self.eta[i], self.eta[j], self.delta[k]
            if ej > ei + 1:
                bad.append(f"eta[{j}] > eta[{i}] + 1")
            if not (2.0**ei / 4 - 2.0**ej < 2.0**d < 4 * 2.0**ei - 2.0**ej):
                bad.append(f"delta[{i},{j}] out of range")
        return bad

    @property
    def delta_min(self) -> int:
        # with no pairs (v' = 1) min eta stands in for min delta
        return min(self.delta) if self.delta else min(self.eta)

    @property
    def s(self) -> float:
        val = sum(2.0 ** (e / 2 + z) for e, z in zip(self.eta, self.zeta))
        return val + (2.0 ** (self.theta / 2) if self.odd else 0.0)

    @property
    def L(self) -> float:
        dm = self.delta_min
        return dm + 4 * max(abs(e - dm) for e in self.eta)

    @property
    def R(self) -> float:
        return 0.5 * max(self.theta, self.delta_min) if self.odd else 0.0

    @property
    def D(self) -> float:
        dm = self.delta_min
        val = 8 * max(abs(e - dm) for e in self.eta) + 4 * max(self.zeta)
        if self.odd:
            val += max(self.theta - dm, 0)
        return val

    @property
    def d(self) -> float:
        """d(eta, delta) = |delta| + |eta|/4 (v even) or + 3|eta|/4 (v odd), signed sums."""
        return sum(self.delta) + (0.75 if self.odd else 0.25) * sum(self.eta)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "eta": list(self.eta), "delta": list(self.delta),
                "zeta": list(self.zeta)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text) -> "MultIndex":
        d = json.loads(text) if isinstance(text, str) else dict(text)
        return cls(d.get("theta"), d["eta"], d.get("delta", []), d["zeta"])


def _split(param, vp: int):
    r, lam, l = param
    lam = np.asarray(lam, dtype=float)
    l = np.asarray(l, dtype=int)
    if lam.shape[-1] != vp or l.shape[-1] != vp:
        raise ValueError("parameter has the wrong length")
    return float(r), lam, l


def chi_iota(idx: MultIndex, param) -> float:
    """chi(2^-theta r^4) prod chi(2^-zeta_i (l_i+1)) chi(2^-eta_i lambda_i^2)
    prod_{i<j} chi(2^-delta_ij (lambda_i^2 - lambda_j^2)); ``param = (r, Lambda, l)``."""
    r, lam, l = _split(param, idx.v_prime)
    val = 1.0
    if idx.odd:
        val *= bump(2.0 ** -idx.theta * r**4)
    for i in range(idx.v_prime):
        val *= bump(2.0 ** -idx.zeta[i] * (l[i] + 1)) * bump(2.0 ** -idx.eta[i] * lam[i] ** 2)
    for k, (i, j) in enumerate(_pairs(idx.v_prime)):
        val *= bump(2.0 ** -idx.delta[k] * (lam[i] ** 2 - lam[j] ** 2))
    return float(val)


def chi_h(h: int, param) -> float:
    r, lam, l = param
    E = float(np.sum(np.asarray(lam) * (2 * np.asarray(l) + 1)) + r**2)
    return float(bump(2.0**-h * E))


def _bins(q: float) -> list:
    if q <= 0:
        return []
    u = math.floor(math.log2(q))
    return [k for k in (u - 1, u, u + 1, u + 2) if bump(2.0**-k * q) > 0]


def enumerate_active(param, v: int) -> list:
    """All iota with chi_iota(param) != 0 (bin arithmetic on each quantity)."""
    dims = GroupDims(v)
    vp = dims.v_prime
    r, lam, l = _split(param, vp)
    groups = []
    groups.append(_bins(r**4) if dims.odd else [None])
    for i in range(vp):
        groups.append(_bins(lam[i] ** 2))
    for i, j in _pairs(vp):
        groups.append(_bins(lam[i] ** 2 - lam[j] ** 2))
    for i in range(vp):
        groups.append(_bins(l[i] + 1.0))
    npair = vp * (vp - 1) // 2
    out = []
    for combo in itertools.product(*groups):
        theta = combo[0]
        eta = combo[1:1 + vp]
        delta = combo[1 + vp:1 + vp + npair]
        zeta = combo[1 + vp + npair:]
        out.append(MultIndex(theta, eta, delta, zeta))
    return out


def overlap_bound(v: int) -> int:
    """2^(number of binned quantities): each quantity meets at most two bins."""
    d = GroupDims(v)
    vp = d.v_prime
    return 2 ** ((1 if d.odd else 0) + 2 * vp + vp * (vp - 1) // 2)


# ---------------------------------------------------------------------------
# functions of the spectral parameter and the operators Xi, Aleph


@dataclass
class SpectralFunction:
    """F(r, Lambda, l) -> complex, with optional analytic derivatives.

    ``deriv(r, lam, l, dlam, dr)`` (if given) returns the mixed derivative with
    orders ``dlam`` (tuple per lambda_i) and ``dr``; otherwise Richardson central
    differences with step ``step`` are used.
    """

    fn: Callable
    deriv: Optional[Callable] = None
    step: float = 1e-3

    def __call__(self, r, lam, l):
        if any(x < 0 for x in l):
            return 0.0
        return self.fn(r, tuple(lam), tuple(l))

    def d(self, r, lam, l, dlam=None, dr: int = 0):
        lam = tuple(float(x) for x in lam)
        dlam = tuple(dlam) if dlam is not None else (0,) * len(lam)
        if any(x < 0 for x in l):
            return 0.0
        if not any(dlam) and dr == 0:
            return self(r, lam, l)
        if self.deriv is not None:
            return self.deriv(r, lam, tuple(l), dlam, dr)
        return self._fd(r, lam, tuple(l), dlam, dr)

    def _fd(self, r, lam, l, dlam, dr):
        # peel one variable at a time; each level is a Richardson-extrapolated
        # central difference (error O(h^4))
        if dr:
            var = ("r", None, dr)
        else:
            i = next(k for k, o in enumerate(dlam) if o)
            var = ("lam", i, dlam[i])
        kind, i, order = var
        rest_dlam = list(dlam)
        if kind == "lam":
            rest_dlam[i] = 0
        rest_dr = 0 if kind == "r" else dr

        def g(t):
            if kind == "r":
                return self.d(t, lam, l, tuple(rest_dlam), rest_dr)
            ll = list(lam)
            ll[i] = t
            return self.d(r, tuple(ll), l, tuple(rest_dlam), rest_dr)

        x0 = r if kind == "r" else lam[i]
        return _central(g, x0, order, self.step)


def _central(g, x0, order, h):
    def D(hh):
        if order == 1:
            return (g(x0 + hh) - g(x0 - hh)) / (2 * hh)
        if order == 2:
            return (g(x0 + hh) - 2 * g(x0) + g(x0 - hh)) / hh**2
        raise ValueError("derivative order must be 1 or 2")

    d1, d2 = D(h), D(h / 2)
    return (4 * d2 - d1) / 3


def v2_spherical_function(x, a) -> SpectralFunction:
    """Lambda -> phi_{lambda,l}(x, a) = cos(lambda a) Lbar_l(lambda |x|^2 / 2) on N_{2,2},
    with analytic lambda-derivatives."""
    q = float(np.sum(np.asarray(x, dtype=float) ** 2)) / 2.0
    a = float(np.ravel(a)[0])

    def fn(r, lam, l):
        y = lam[0] * q
        return math.cos(lam[0] * a) * float(laguerre_norm(l[0], 0.0, y))

    def deriv(r, lam, l, dlam, dr):
        if dr:
            return 0.0
        k = dlam[0]
        lm = lam[0]
        y = lm * q
        c, s = math.cos(lm * a), math.sin(lm * a)
        L0 = float(laguerre_norm(l[0], 0.0, y))
        L1 = float(laguerre_norm_deriv(l[0], 0.0, y, 1))
        if k == 1:
            return -a * s * L0 + c * q * L1
        if k == 2:
            L2 = float(laguerre_norm_deriv(l[0], 0.0, y, 2))
            return -a * a * c * L0 - 2 * a * q * s * L1 + c * q * q * L2
        raise ValueError("order must be 1 or 2")

    return SpectralFunction(fn, deriv)


def phi_spectral_function(p, kquad, step: float = 1e-3) -> SpectralFunction:
    """(r, Lambda, l) -> phi_{r,Lambda,l}(p) through the K-quadrature (FD derivatives)."""
    from .spherical import SphericalParam, phi_eval

    def fn(r, lam, l):
        eps = None if kquad.group == "O" else 1
        return complex(phi_eval(SphericalParam(r, lam, l, eps), p, kquad))

    return SpectralFunction(fn, None, step)


@dataclass(frozen=True)
class _Term:
    coef: Callable  # (r, lam) -> complex
    shifts: tuple  # per index: tuple of shift kinds (possibly empty)
    dlam: tuple
    dr: int = 0


def _apply_term(F: SpectralFunction, t: _Term, r, lam, l):
    vp = len(lam)
    stencils = []
    for i in range(vp):
        kinds = t.shifts[i]
        stencils.append(SeqOperator(kinds)._expand(l[i]) if kinds else {0: 1.0})
    total = 0.0
    for combo in itertools.product(*[list(s.items()) for s in stencils]):
        c = 1.0
        ll = list(l)
        for i, (sh, ci) in enumerate(combo):
            c *= ci
            ll[i] += sh
        if c == 0.0 or min(ll) < 0:
            continue
        total = total + c * F.d(r, lam, tuple(ll), t.dlam, t.dr)
    return t.coef(r, lam) * total


def _unit(vp, i, order):
    out = [0] * vp
    out[i] = order
    return tuple(out)


def _sh(vp, **kw):
    out = [()] * vp
    for i, kinds in kw.items():
        out[int(i[1:])] = kinds
    return tuple(out)


def xi_terms(vp: int, odd: bool) -> list:
    """Xi = 2 sum_i beta_i / lambda_i  (- d^2/dr^2 if v is odd)."""
    terms = []
    zero = (0,) * vp
    for i in range(vp):
        terms.append(_Term(lambda r, lam, i=i: 2.0 / lam[i], _sh(vp, **{f"i{i}": ("beta",)}), zero))
    if odd:
        terms.append(_Term(lambda r, lam: -1.0, _sh(vp), zero, 2))
    return terms


def xi_apply(F: SpectralFunction, param, v: int, printed_odd_factor: bool = False) -> complex:
    """(Xi.F)(param); equals |X|^2 phi(n) when F = phi_.(n).

    ``printed_odd_factor`` uses -1/2 d^2/dr^2 for the odd-v term instead of
    -d^2/dr^2 (kept only to exhibit the mismatch).
    """
    d = GroupDims(v)
    r, lam, l = param
    lam = tuple(float(x) for x in lam)
    if any(x == 0 for x in lam):
        raise ValueError("Xi is singular at lambda_i = 0")
    terms = xi_terms(d.v_prime, d.odd)
    if printed_odd_factor and d.odd:
        terms[-1] = _Term(lambda r, lam: -0.5, terms[-1].shifts, terms[-1].dlam, 2)
    return complex(sum(_apply_term(F, t, r, lam, tuple(l)) for t in terms))


def aleph_terms(vp: int, odd: bool) -> list:
    """The terms of Aleph as printed (before the overall sign fix)."""
    T = []
    zero = (0,) * vp
    for m in range(vp):
        T.append(_Term(lambda r, lam: 1.0, _sh(vp), _unit(vp, m, 2)))
        T.append(_Term(lambda r, lam, m=m: -2.0 / lam[m], _sh(vp, **{f"i{m}": ("alpha",)}),
                       _unit(vp, m, 1)))
        T.append(_Term(lambda r, lam, m=m: 1.0 / lam[m] ** 2,
                       _sh(vp, **{f"i{m}": ("alpha", "alpha")}), zero))
        T.append(_Term(lambda r, lam, m=m: 1.0 / lam[m] ** 2, _sh(vp, **{f"i{m}": ("alpha",)}), zero))
    for i, j in _pairs(vp):
        # pair coefficients are written in terms of lambda_j^2 - lambda_i^2
        def c1(r, lam, i=i, j=j):
            return -4.0 / (lam[j] ** 2 - lam[i] ** 2)

        T.append(_Term(lambda r, lam, i=i, c1=c1: c1(r, lam) * lam[i], _sh(vp), _unit(vp, i, 1)))
        T.append(_Term(lambda r, lam, c1=c1: -c1(r, lam), _sh(vp, **{f"i{i}": ("alpha",)}), zero))
        T.append(_Term(lambda r, lam, j=j, c1=c1: -c1(r, lam) * lam[j], _sh(vp), _unit(vp, j, 1)))
        T.append(_Term(lambda r, lam, c1=c1: c1(r, lam), _sh(vp, **{f"i{j}": ("alpha",)}), zero))

        def c2(r, lam, i=i, j=j):
            return 4.0 * (lam[j] ** 2 + lam[i] ** 2) / (lam[j] ** 2 - lam[i] ** 2) ** 2

        T.append(_Term(lambda r, lam, c2=c2: -c2(r, lam), _sh(vp, **{f"i{j}": ("alpha",)}), zero))
        T.append(_Term(lambda r, lam, i=i, j=j, c2=c2: c2(r, lam) * lam[j] / lam[i],
                       _sh(vp, **{f"i{j}": ("gamma",), f"i{i}": ("beta",)}), zero))
        T.append(_Term(lambda r, lam, c2=c2: -c2(r, lam), _sh(vp, **{f"i{i}": ("alpha",)}), zero))
        T.append(_Term(lambda r, lam, i=i, j=j, c2=c2: c2(r, lam) * lam[i] / lam[j],
                       _sh(vp, **{f"i{i}": ("gamma",), f"i{j}": ("beta",)}), zero))
        T.append(_Term(lambda r, lam, c2=c2: -2.0 * c2(r, lam),
                       _sh(vp, **{f"i{i}": ("alpha",), f"i{j}": ("alpha",)}), zero))
    if odd:
        for i in range(vp):
            T.append(_Term(lambda r, lam, i=i: -2.0 / lam[i], _sh(vp, **{f"i{i}": ("gamma",)}), zero, 2))
            T.append(_Term(lambda r, lam, i=i: -4j * r / lam[i] ** 2, _sh(vp, **{f"i{i}": ("alpha",)}),
                           zero, 1))
            T.append(_Term(lambda r, lam, i=i: 2.0 * r * r / lam[i] ** 3, _sh(vp, **{f"i{i}": ("beta",)}),
                           zero))
            T.append(_Term(lambda r, lam, i=i: 2j * r / lam[i] ** 2, _sh(vp), zero, 1))
            T.append(_Term(lambda r, lam, i=i: -2.0 / lam[i], _sh(vp), _unit(vp, i, 1)))
    return T


def aleph_apply(F: SpectralFunction, param, v: int, printed_sign: bool = False,
                min_gap: Optional[float] = None) -> complex:
    """(Aleph.F)(param); equals |A|^2 phi(n) when F = phi_.(n).

    The printed operator returns -|A|^2 phi; by default the overall sign is
    flipped so that the identity holds as stated.  ``printed_sign=True`` gives
    the operator exactly as printed.
    """
    d = GroupDims(v)
    r, lam, l = param
    lam = tuple(float(x) for x in lam)
    if any(x <= 0 for x in lam):
        raise ValueError("Aleph is singular at lambda_i = 0")
    gap = 10 * F.step if min_gap is None else min_gap
    for i, j in _pairs(d.v_prime):
        if abs(lam[i] - lam[j]) <= gap:
            raise ValueError("lambda values too close: singular pair coefficients")
    val = sum(_apply_term(F, t, r, lam, tuple(l)) for t in aleph_terms(d.v_prime, d.odd))
    return complex(val if printed_sign else -val)


# ---------------------------------------------------------------------------
# T_iota and the criterion


def t_iota_symbol(idx: Optional[MultIndex], xi_r, xi_lam: Sequence, xi_l: Sequence, L=None, R=None,
                  D=None):
    """1 + 2^{L/2} sum xi_lam^2 + 2^{R/2} xi_r^2 + 2^{D/2} sum |e^{i xi_l} - 1|^2."""
    L = idx.L if L is None else L
    R = (idx.R if idx is not None else 0.0) if R is None else R
    D = idx.D if D is None else D
    out = 1.0
    for x in xi_lam:
        out = out + 2.0 ** (L / 2) * x**2
    if xi_r is not None:
        out = out + 2.0 ** (R / 2) * xi_r**2
    for x in xi_l:
        out = out + 2.0 ** (D / 2) * np.abs(np.exp(1j * x) - 1.0) ** 2
    return out


def t_iota_norm(g: np.ndarray, idx: Optional[MultIndex], exponent: float, steps: Sequence,
                axes_kind: Sequence[str], pad: int = 2, L=None, R=None, D=None,
                hf_tol: float = 1e-4) -> float:
    """||T^exponent g||_{L^2} for g sampled on a grid.

    ``axes_kind`` labels each axis 'r', 'lam' or 'l'; ``steps`` are the grid
    spacings (1 on l axes).  The grid is zero padded by ``pad`` and transformed
    by FFT; continuous axes get xi^2 (spectral derivative), l-axes the torus
    symbol |e^{i xi} - 1|^2 (exact for the forward difference).
    """
    g = np.asarray(g, dtype=complex)
    if g.ndim != len(axes_kind) or len(steps) != g.ndim:
        raise ValueError("one step and one kind per axis")
    shape = [pad * n for n in g.shape]
    G = np.fft.fftn(g, s=shape, axes=tuple(range(g.ndim)))
    freqs = [2 * np.pi * np.fft.fftfreq(n, d=h) for n, h in zip(shape, steps)]
    mesh = np.meshgrid(*freqs, indexing="ij") if freqs else []
    xi_r = None
    xi_lam, xi_l = [], []
    for m, kind in zip(mesh, axes_kind):
        if kind == "r":
            xi_r = m
        elif kind == "lam":
            xi_lam.append(m)
        elif kind == "l":
            xi_l.append(m)
        else:
            raise ValueError(f"unknown axis kind {kind!r}")
    sym = t_iota_symbol(idx, xi_r, xi_lam, xi_l, L, R, D)
    W = np.abs(G) ** 2
    if exponent > 0 and g.size > 1:
        # energy in the outer band of frequencies, weighted by the symbol
        outer = np.zeros(W.shape, dtype=bool)
        for ax, (n, kind) in enumerate(zip(shape, axes_kind)):
            if kind != "l" and n > 4:
                k = np.abs(np.fft.fftfreq(n)) > 0.375
                outer |= np.expand_dims(k, [a for a in range(len(shape)) if a != ax])
        tot = float(np.sum(W * sym ** (2 * exponent)))
        if tot > 0 and float(np.sum((W * sym ** (2 * exponent))[outer])) > hf_tol * tot:
            warnings.warn("grid too coarse for the requested exponent")
    cell = float(np.prod(steps))
    val = cell * float(np.sum(W * sym ** (2 * exponent))) / float(np.prod(shape))
    return math.sqrt(val)


def iota_grid(idx: MultIndex, n: int = 32):
    """Axes covering supp chi_iota: r (odd v), lambda_i, l_i.

    Continuous axes: n midpoints spanning the support; l axes: every integer
    with l + 1 in (2^{zeta-1}, 2^{zeta+1}).
    """
    axes, steps, kinds = [], [], []
    if idx.odd:
        lo, hi = 2.0 ** ((idx.theta - 1) / 4), 2.0 ** ((idx.theta + 1) / 4)
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
        steps.append(h)
        kinds.append("r")
    for e in idx.eta:
        lo, hi = 2.0 ** ((e - 1) / 2), 2.0 ** ((e + 1) / 2)
        h = (hi - lo) / n
        axes.append(lo + h * (np.arange(n) + 0.5))
        steps.append(h)
        kinds.append("lam")
    for z in idx.zeta:
        lmin = max(int(math.floor(2.0 ** (z - 1))), 0)
        lmax = int(math.ceil(2.0 ** (z + 1))) - 2
        axes.append(np.arange(lmin, max(lmax, lmin) + 1))
        steps.append(1.0)
        kinds.append("l")
    return axes, steps, kinds


def _chi_iota_grid(idx: MultIndex, axes, kinds):
    mesh = np.meshgrid(*axes, indexing="ij")
    vp = idx.v_prime
    k = 0
    val = np.ones(mesh[0].shape)
    r = None
    if idx.odd:
        r = mesh[0]
        val = val * bump(2.0 ** -idx.theta * r**4)
        k = 1
    lam = mesh[k:k + vp]
    ls = mesh[k + vp:k + 2 * vp]
    for i in range(vp):
        val = val * bump(2.0 ** -idx.eta[i] * lam[i] ** 2) * bump(2.0 ** -idx.zeta[i] * (ls[i] + 1.0))
    for m, (i, j) in enumerate(_pairs(vp)):
        val = val * bump(2.0 ** -idx.delta[m] * (lam[i] ** 2 - lam[j] ** 2))
    return val, r, lam, ls


@dataclass
class CriterionResult:
    value: float
    n_terms: int
    terms: list = field(default_factory=list)


def _window_indices(v: int, lam_box, l_box, r_box=None) -> list:
    """All iota whose support meets the box (generic bins of each quantity)."""
    d = GroupDims(v)
    vp = d.v_prime

    def rng(lo, hi):
        # k with (2^{k-1}, 2^{k+1}) meeting (lo, hi)
        if lo <= 0 and hi <= 0:
            return []
        lo = max(lo, 1e-300)
        return list(range(int(math.floor(math.log2(lo))), int(math.ceil(math.log2(hi))) + 1))

    eta_rng = rng(lam_box[0] ** 2, lam_box[1] ** 2)
    zeta_rng = [z for z in rng(l_box[0] + 1.0, l_box[1] + 1.0) if z >= 0]
    diff_hi = lam_box[1] ** 2 - lam_box[0] ** 2
    delta_rng = rng(diff_hi * 1e-3, diff_hi) if vp > 1 else []
    theta_rng = rng(r_box[0] ** 4, r_box[1] ** 4) if d.odd else [None]
    out = []
    for th in theta_rng:
        for eta in itertools.product(eta_rng, repeat=vp):
            for delta in itertools.product(delta_rng, repeat=vp * (vp - 1) // 2):
                for zeta in itertools.product(zeta_rng, repeat=vp):
                    idx = MultIndex(th, eta, delta, zeta)
                    if not idx.constraint_defects():
                        out.append(idx)
    return out


def multiplier_criterion(f: Callable, eps: float, v: int, lam_box, l_box, r_box=None,
                         n: int = 32, exponent: Optional[float] = None, pad: int = 2) -> CriterionResult:
    """sum_iota s_iota^{-Q/4} 2^{d(eta,delta)} ||T_iota^{exponent} (f chi_iota)||.

    ``f(r, lam, l)`` is vectorized (lam, l: lists of arrays, one per index) and
    must vanish outside the box ``lam_box`` x ``l_box`` (x ``r_box``);
    ``exponent`` defaults to eps/2.
    """
    d = GroupDims(v)
    if eps <= d.Q / 2:
        warnings.warn("eps <= Q/2: outside the hypothesis of the multiplier theorem")
    boxes = [lam_box, l_box] + ([r_box] if d.odd else [])
    if any(b is None or not all(np.isfinite(b)) for b in boxes):
        raise ValueError("f must have a bounded support window")
    exponent = eps / 2 if exponent is None else exponent
    res = CriterionResult(0.0, 0)
    for idx in _window_indices(v, lam_box, l_box, r_box):
        axes, steps, kinds = iota_grid(idx, n)
        chi, r, lam, ls = _chi_iota_grid(idx, axes, kinds)
        if not np.any(chi):
            continue
        vals = np.asarray(f(r, lam, ls)) * chi
        if not np.any(vals):
            continue
        nrm = t_iota_norm(vals, idx, exponent, steps, kinds, pad)
        term = idx.s ** (-d.Q / 4) * 2.0 ** idx.d * nrm
        res.terms.append((idx, term))
        res.value += term
        res.n_terms += 1
    return res
