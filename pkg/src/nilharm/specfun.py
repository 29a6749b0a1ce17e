"""Special functions: reduced Bessel, (normalized) Laguerre, Hermite-Weber,
and the shift operators acting on N-indexed sequences.

All evaluators accept numpy arrays for the continuous argument and are
vectorized over it; orders/degrees are scalars.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import special

__all__ = [
    "bessel_reduced",
    "bessel_reduced_series",
    "bessel_reduced_deriv",
    "laguerre_poly",
    "laguerre_fn",
    "laguerre_binom",
    "laguerre_norm",
    "laguerre_norm_deriv",
    "hermite_weber",
    "SeqOperator",
    "apply_seq_operator",
    "HERMITE_KMAX",
]

# switch from the power series to scipy's J_alpha above this argument
_SERIES_CUTOFF = 12.0
HERMITE_KMAX = 60


def _check_finite(*args):
    for a in args:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def bessel_reduced_series(alpha: float, z, tol: float = 1e-17, max_terms: int = 400):
    """Power series sum_nu (-1)^nu z^{2 nu} Gamma(a+1) / (4^nu nu! Gamma(nu+a+1))."""
    z = np.asarray(z, dtype=float)
    q = -(z * z) / 4.0
    term = np.ones_like(z)
    total = np.ones_like(z)
    for nu in range(1, max_terms):
        term = term * q / (nu * (nu + alpha))
        total = total + term
        if np.all(np.abs(term) <= tol * np.maximum(1.0, np.abs(total))):
            break
    return total


def bessel_reduced(alpha: float, z):
    """Reduced Bessel function Gamma(alpha+1) (z/2)^{-alpha} J_alpha(z).

    Even and entire in z, equal to 1 at the origin.  Orders down to
    alpha > -1 are accepted (alpha = -1/2 gives cos z).
    """
    _check_finite(alpha, z)
    if alpha <= -1:
        raise ValueError("alpha must be > -1")
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z <= _SERIES_CUTOFF
    if np.any(small):
        out[small] = bessel_reduced_series(alpha, z[small])
    big = ~small
    if np.any(big):
        zb = z[big]
        logc = special.gammaln(alpha + 1) - alpha * np.log(zb / 2.0)
        out[big] = np.exp(logc) * special.jv(alpha, zb)
    return out if out.ndim else float(out)


def _bessel_deriv_terms(order: int):
    # d^order/dz^order J_a(z) = sum c * z^p * J_{a+k}(z) * prod_{i=1..k} 1/(a+i)
    # with the rule J_{a+k}' = -z/(2(a+k+1)) J_{a+k+1}; terms hold (c, p, k)
    terms = {(0, 0): 1.0}
    for _ in range(order):
        new: dict = {}
        for (p, k), c in terms.items():
            if p > 0:
                new[(p - 1, k)] = new.get((p - 1, k), 0.0) + c * p
            new[(p + 1, k + 1)] = new.get((p + 1, k + 1), 0.0) - c / 2.0
        terms = new
    return terms


def bessel_reduced_deriv(alpha: float, z, order: int = 1):
    """Derivative of the reduced Bessel function, from the series recursion
    J_a'(z) = -z / (2(a+1)) J_{a+1}(z)."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    _check_finite(alpha, z)
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    for (p, k), c in _bessel_deriv_terms(order).items():
        scale = c / np.prod([alpha + i for i in range(1, k + 1)]) if k else c
        out = out + scale * z**p * bessel_reduced(alpha + k, z)
    return out if out.ndim else float(out)


def laguerre_poly(n: int, alpha: float, x):
    """Generalized Laguerre polynomial L_n^{(alpha)} by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    if n < 0:
        return np.zeros_like(x)
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = 1.0 + alpha - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def laguerre_fn(n: int, alpha: float, x):
    """Laguerre function psi_n^{(alpha)} = L_n^{(alpha)}(x) e^{-x/2} (zero for n < 0)."""
    x = np.asarray(x, dtype=float)
    return laguerre_poly(n, alpha, x) * np.exp(-x / 2.0)


def laguerre_binom(n: int, alpha: float) -> float:
    """Generalized binomial C^n_{n+alpha} via log-Gamma."""
    return float(np.exp(special.gammaln(n + alpha + 1) - special.gammaln(n + 1)
                        - special.gammaln(alpha + 1)))


def laguerre_norm(n: int, alpha: float, x):
    """Normalized Laguerre function L_n^{(alpha)}(x) e^{-x/2} / C^n_{n+alpha}."""
    if alpha <= -1:
        raise ValueError("alpha must be > -1")
    if n < 0:
        raise ValueError("n must be a natural number")
    _check_finite(x)
    out = laguerre_fn(n, alpha, x) / laguerre_binom(n, alpha)
    return out if out.ndim else float(out)


def _laguerre_fn_deriv(n: int, alpha: float, x, order: int):
    # psi_k' = -psi_k / 2 - psi_{k-1}^{(alpha+1)}
    if n < 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    if order == 0:
        return laguerre_fn(n, alpha, x)
    return (-0.5 * _laguerre_fn_deriv(n, alpha, x, order - 1)
            - _laguerre_fn_deriv(n - 1, alpha + 1, x, order - 1))


def laguerre_norm_deriv(n: int, alpha: float, x, order: int = 1):
    """x-derivative (order 1 or 2) of the normalized Laguerre function."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if alpha <= -1:
        raise ValueError("alpha must be > -1")
    _check_finite(x)
    out = _laguerre_fn_deriv(n, alpha, np.asarray(x, dtype=float), order) / laguerre_binom(n, alpha)
    return out if out.ndim else float(out)


def hermite_weber(k: int, x, kmax: int = HERMITE_KMAX):
    """Normalized Hermite function (2^k k! sqrt(pi))^{-1/2} e^{-x^2/2} H_k(x)."""
    if k < 0 or k > kmax:
        raise ValueError(f"k must lie in [0, {kmax}]")
    _check_finite(x)
    x = np.asarray(x, dtype=float)
    prev = np.pi**-0.25 * np.exp(-x * x / 2.0)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = np.sqrt(2.0) * x * prev
    for j in range(1, k):
        prev, cur = cur, x * np.sqrt(2.0 / (j + 1)) * cur - np.sqrt(j / (j + 1.0)) * prev
    return cur if cur.ndim else float(cur)


# ---------------------------------------------------------------------------
# shift operators on sequences N -> C

Sequence_ = Union[Callable[[int], object], Sequence, np.ndarray]

_KINDS = ("identity", "tau_plus", "tau_minus", "delta", "alpha", "beta", "gamma")


def _stencil(kind: str, l: int) -> dict:
    """Coefficients {shift: c} of the operator at index l."""
    if kind == "identity":
        return {0: 1.0}
    if kind == "tau_plus":
        return {1: 1.0}
    if kind == "tau_minus":
        return {-1: 1.0}
    if kind == "delta":
        return {1: 1.0, 0: -1.0}
    if kind == "beta":
        return {1: -(l + 1.0), 0: 2.0 * l + 1.0, -1: -float(l)}
    if kind == "alpha":
        return {0: -0.5, -1: -l / 2.0, 1: (l + 1) / 2.0}
    if kind == "gamma":
        return {0: -(2 * l + 1) / 4.0, -1: -l / 4.0, 1: -(l + 1) / 4.0}
    raise ValueError(f"unknown operator kind {kind!r}")


def _evaluate(R: Sequence_, l: int):
    if l < 0:
        return 0.0
    if callable(R):
        return R(l)
    return R[l]


@dataclass(frozen=True)
class SeqOperator:
    """Linear operator on sequences R: N -> C built from the shifts tau^+-.

    ``kinds`` is applied right-to-left, so SeqOperator(("alpha", "beta"))
    is alpha o beta.  Index -1 is read as 0 (tau^- R(0) = 0).
    """

    kinds: tuple = ("identity",)

    def __post_init__(self):
        if isinstance(self.kinds, str):
            object.__setattr__(self, "kinds", (self.kinds,))
        for k in self.kinds:
            if k not in _KINDS:
                raise ValueError(f"unknown operator kind {k!r}")

    @property
    def kind(self) -> str:
        return self.kinds[0] if len(self.kinds) == 1 else "o".join(self.kinds)

    def __matmul__(self, other: "SeqOperator") -> "SeqOperator":
        return SeqOperator(tuple(self.kinds) + tuple(other.kinds))

    def stencil(self, l: int) -> dict:
        """Flattened {shift: coefficient} at index l (entries for negative
        targets are dropped)."""
        return self._expand(l)

    def _expand(self, l: int) -> dict:
        # (A o B)R(l) = sum_s a_s(l) sum_t b_t(l+s) R(l+s+t)
        def rec(ops, idx):
            if not ops:
                return {0: 1.0}
            outer, inner = ops[0], ops[1:]
            res: dict = {}
            for s, c in _stencil(outer, idx).items():
                j = idx + s
                if j < 0:
                    continue
                for t, d in rec(inner, j).items():
                    if j + t < 0:
                        continue
                    res[s + t] = res.get(s + t, 0.0) + c * d
            return res

        return rec(tuple(self.kinds), l)

    def __call__(self, R: Sequence_, l: int):
        return apply_seq_operator(self, R, l)


def apply_seq_operator(op: Union[SeqOperator, str], R: Sequence_, l: int):
    """Apply ``op`` to the sequence ``R`` at index ``l``.

    ``R`` may be a callable ``l -> value`` (values may be numpy arrays) or an
    indexable sequence.
    """
    if isinstance(op, str):
        op = SeqOperator((op,))
    if l < 0:
        raise ValueError("l must be a natural number")
    total = 0.0
    for s, c in op._expand(l).items():
        if c != 0.0:
            total = total + c * _evaluate(R, l + s)
    return total
