"""Command-line checks.  Every command writes a JSON report
{command, check, inputs, values, residuals, tolerances, pass, seed, timings}
and exits 0 if all checks pass, 1 on a numerical failure, 2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings

import numpy as np
from scipy import special

from . import areafn, group, matpolar, multiplier, plancherel, specfun, spherical
from .group import GroupDims, GroupPoint
from .spherical import SphericalParam


class ConfigError(ValueError):
    pass


def _rng(args):
    return np.random.default_rng(args.seed)


def _tol(args, default):
    if args.tol is None:
        return default
    if args.tol <= 0:
        raise ConfigError("--tol must be positive")
    return args.tol


def _pair(text, name):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(f"{name} expects 'a,b'") from None
    if not 0 < a < b:
        raise ConfigError(f"{name} needs 0 < a < b")
    return a, b


def _load_param(args, v) -> SphericalParam:
    if args.param is None:
        vp = v // 2
        lam = tuple(1.0 / (i + 1) for i in range(vp))
        return SphericalParam(0.5 if v % 2 else 0.0, lam, (0,) * vp, None)
    text = args.param
    if not text.lstrip().startswith("{"):
        with open(text) as fh:
            text = fh.read()
    return SphericalParam.from_json(text).validate(v)


def _load_point(args, v) -> GroupPoint:
    if args.point is None:
        return group.identity(v)
    text = args.point
    if not text.lstrip().startswith("{"):
        with open(text) as fh:
            text = fh.read()
    p = GroupPoint.from_json(text)
    if p.v != v:
        raise ConfigError("point dimension does not match --v")
    return p


def _cx(z):
    z = complex(z)
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# checks; each returns (check name, inputs, values, residuals, tolerances)


def check_specfun(args):
    tol = _tol(args, 1e-8)
    x, w = special.roots_laguerre(60)
    # ortho: Lbar_n^0 = L_n e^{-x/2}; int Lbar_n Lbar_m dx = int L_n L_m e^{-x} dx
    G = np.array([[w @ (specfun.laguerre_poly(n, 0, x) * specfun.laguerre_poly(m, 0, x))
                   for m in range(21)] for n in range(21)])
    ortho = float(np.max(np.abs(G - np.eye(21))))
    # Bessel ODE: y = J_{n-1}(mu sqrt x): 4 x y'' + 4 n y' + mu^2 y = 0
    ode = 0.0
    xs = np.linspace(0.05, 20, 50)
    for n, mu in [(1, 1.0), (2, 2.3), (3, 0.7)]:
        a = n - 1.0
        t = mu * np.sqrt(xs)
        d1 = specfun.bessel_reduced_deriv(a, t, 1)
        d2 = specfun.bessel_reduced_deriv(a, t, 2)
        y = specfun.bessel_reduced(a, t)
        yp = d1 * mu / (2 * np.sqrt(xs))
        ypp = d2 * mu**2 / (4 * xs) - d1 * mu / (4 * xs**1.5)
        r = np.abs(4 * xs * ypp + 4 * n * yp + mu**2 * y) / (1 + np.abs(mu**2 * y))
        ode = max(ode, float(r.max()))
    # shift identities
    shift = 0.0
    xg = np.linspace(0, 40, 81)
    R = lambda k: specfun.laguerre_norm(k, 0.0, xg)  # noqa: E731
    Rp = lambda k: specfun.laguerre_norm_deriv(k, 0.0, xg, 1)  # noqa: E731
    for l in range(31):
        shift = max(shift,
                    float(np.max(np.abs(specfun.apply_seq_operator("beta", R, l) - xg * R(l)))),
                    float(np.max(np.abs(specfun.apply_seq_operator("alpha", R, l) - xg * Rp(l)))),
                    float(np.max(np.abs(specfun.apply_seq_operator("gamma", R, l)
                                        - specfun.apply_seq_operator("alpha", Rp, l)))))
    res = {"laguerre_orthonormality": ortho, "bessel_ode": ode, "shift_identities": shift}
    tols = {"laguerre_orthonormality": tol, "bessel_ode": 1e-6, "shift_identities": 1e-9}
    return "special functions", {"nmax": 20, "lmax": 30}, {}, res, tols


def check_group(args):
    rng = _rng(args)
    v = args.v
    dims = GroupDims(v)

    def rand(n=None):
        shape = (n,) if n else ()
        return GroupPoint(rng.normal(size=shape + (v,)), rng.normal(size=shape + (dims.z,)))

    p, q, r = rand(200), rand(200), rand(200)
    lhs = group.product(group.product(p, q), r)
    rhs = group.product(p, group.product(q, r))
    assoc = float(max(np.abs(lhs.x - rhs.x).max(), np.abs(lhs.a - rhs.a).max()))
    hom = max(float(np.max(np.abs(group.koranyi_norm(group.dilate(s, p))
                                  - s * group.koranyi_norm(p))))
              for s in rng.uniform(0.1, 5, 20))
    res = {"associativity": assoc, "koranyi_homogeneity": hom}
    tols = {"associativity": 1e-12, "koranyi_homogeneity": 1e-12}
    values = {}
    if v == 2:
        f = lambda n: np.exp(-np.sum(n.x**2, -1) - np.sum(n.a**2, -1))  # noqa: E731
        direct = math.pi ** ((v + dims.z) / 2)
        res["polar_identity"] = float(group.polar_identity_residual(f, dims, direct=direct,
                                                                    relative=True))
        tols["polar_identity"] = _tol(args, 1e-4)
        values["gaussian_integral"] = direct
    return "group law and polar identity", {"v": v, "n_samples": 200}, values, res, tols


def check_polar(args):
    rng = _rng(args)
    v = args.v
    z = v * (v - 1) // 2
    worst = 0.0
    for _ in range(1000):
        A = group.vec_to_antisym(rng.normal(size=z), v)
        pol = matpolar.antisym_polar(A, args.group)
        worst = max(worst, float(np.max(np.abs(pol.reconstruct() - A))))
    res = {"reconstruction": worst}
    tols = {"reconstruction": 1e-9}
    values = {"eta_constant": matpolar.eta_constant(v)}
    if v == 2:
        res["eta_constant_v2"] = abs(values["eta_constant"] - 2.0)
        tols["eta_constant_v2"] = 1e-12
    return "antisymmetric polar decomposition", {"v": v, "group": args.group, "n": 1000}, values, res, tols


def _kquad(args, v):
    order = args.order if args.order is not None else (16 if v == 2 else 6)
    return matpolar.haar_quadrature(v, args.group, order=order, seed=args.seed)


def check_spherical(args):
    v = args.v
    param = _load_param(args, v)
    if args.group == "SO" and param.epsilon is None:
        param = SphericalParam(param.r_star, param.lambda_star, param.l, 1)
    kq = _kquad(args, v) if param.v0 else None
    p = _load_point(args, v)
    inputs = {"v": v, "param": param.to_dict(), "point": json.loads(p.to_json()),
              "group": args.group, "order": args.order}
    if args.action == "eval":
        val = complex(spherical.phi_eval(param, p, kq))
        res = {"bound": max(abs(val) - 1.0, 0.0)}
        tols = {"bound": 1e-6}
        if np.all(p.x == 0) and np.all(p.a == 0):
            res["identity"] = abs(val - 1.0)
            tols["identity"] = 1e-12
        return "spherical function value", inputs, {"phi": _cx(val)}, res, tols
    if args.action == "eigencheck":
        E = spherical.sublaplacian_eigenvalue(param)
        r1 = spherical.sublaplacian_fd_residual(param, p, kq)
        r2 = spherical.center_laplacian_fd_residual(param, p, kq)
        Ez = spherical.center_laplacian_eigenvalue(param)
        res = {"sublaplacian": r1, "center_laplacian": r2}
        tols = {"sublaplacian": _tol(args, 1e-4) * (1 + E), "center_laplacian": 1e-4 * (1 + Ez)}
        return "eigenvalue residuals", inputs, {"E_L": E, "E_Z": Ez}, res, tols
    rng = _rng(args)
    dims = GroupDims(v)
    p2 = GroupPoint(0.6 * rng.normal(size=v), 0.6 * rng.normal(size=dims.z))
    r = spherical.functional_equation_residual(param, p, p2, kq)
    return ("functional equation", dict(inputs, point2=json.loads(p2.to_json())), {},
            {"functional_equation": r}, {"functional_equation": _tol(args, 1e-6 if v == 2 else 1e-3)})


def _bump(x, a, b):
    y = np.zeros_like(x)
    m = (x > a) & (x < b)
    s = (x[m] - a) / (b - a)
    y[m] = np.exp(-1.0 / (s * (1 - s)))
    return y


def check_plancherel(args):
    if args.v != 2:
        raise ConfigError("plancherel checks run at v = 2")
    lo, hi = _pair(args.lambda_range, "--lambda-range") if args.lambda_range else (0.05, 20.0)
    grid = plancherel.spectral_grid(2, (lo, hi), 200, 4, args.lmax)
    q = plancherel.V2RadialQuadrature.build()
    inputs = {"v": 2, "lambda_range": [lo, hi], "lmax": args.lmax}
    lam, l = grid.lam[:, 0], grid.l[:, 0]
    if args.action == "roundtrip":
        g = _bump(lam, 0.5, 3.0) * np.exp(-l / 2)
        back = q.analyze(q.synthesize(g, grid), grid)
        on = (g > 1e-2 * g.max()) & (lam > 0.3)
        err = float(np.max(np.abs(back[on] - g[on]) / np.abs(g[on])))
        return "inversion then transform", inputs, {"n_atoms": len(grid)}, \
            {"roundtrip_relative": err}, {"roundtrip_relative": _tol(args, 0.02)}
    if args.action == "parseval":
        g = _bump(lam, 0.5, 3.0) * np.exp(-l / 3)
        F = q.synthesize(g, grid)
        n2 = q.norm2(F)
        seq = []
        for a, b, L in [(1, 2, 3), (0.8, 2.5, 6), (0.6, 2.8, 10), (0.5, 3, 20), (lo, hi, args.lmax)]:
            gg = plancherel.spectral_grid(2, (a, b), 200, 4, L)
            seq.append(plancherel.parseval_residual(n2, q.analyze(F, gg), gg))
        mono = float(max(0.0, max(np.diff(seq))))
        return "Parseval identity", inputs, {"norm2": n2, "refinement": seq}, \
            {"parseval_relative": seq[-1], "monotone_violation": mono}, \
            {"parseval_relative": _tol(args, 0.02), "monotone_violation": 1e-15}
    t = 1.0
    m = lambda E: np.exp(-t * E)  # noqa: E731
    target = m(grid.energies())
    back = q.analyze(q.synthesize(target, grid), grid)
    on = (target > 1e-2) & (lam > 0.3)
    err = float(np.max(np.abs(back[on] - target[on]) / target[on]))
    return "heat multiplier kernel", dict(inputs, t=t), {}, {"kernel_roundtrip": err}, \
        {"kernel_roundtrip": _tol(args, 0.02)}


def _area_grid(args, v):
    vp = v // 2
    lo, hi = _pair(args.lambda_range, "--lambda-range") if args.lambda_range else (0.25, 1.0)
    out = []
    for lam1 in np.geomspace(lo, hi, 3):
        ratios = np.linspace(0.2, 0.8, 3) if vp > 1 else [None]
        for rat in ratios:
            lam = (lam1,) if rat is None else (lam1, lam1 * rat)
            for l in range(min(args.lmax, 2) + 1):
                out.append(SphericalParam(args.rmax if v % 2 else 0.0, lam, (l,) * vp, None))
    return out


def check_areafn(args):
    v = args.v
    param = _load_param(args, v)
    inputs = {"v": v, "param": param.to_dict()}
    if args.action == "pair":
        s = np.array([0.0, 0.5, 1.0, 2.0])
        vals = areafn.mu_phi_pairing(param, s, v)
        mass = group.mu_mass(v)
        res = {"s0_mass": abs(vals[0] - mass), "bounded": float(max(np.abs(vals).max() - mass, 0))}
        return "sphere-measure pairing", dict(inputs, s=s.tolist()), \
            {"pairing": [_cx(x) for x in vals], "mu_mass": mass}, res, \
            {"s0_mass": 1e-10 * mass, "bounded": 1e-8 * mass}
    if args.action == "deriv":
        s = np.array([0.5, 1.0, 2.0])
        j = args.order if args.order is not None and args.order <= 3 else 1
        d, err = areafn.mu_phi_deriv(param, s, j, v)
        rel = float(np.max(np.asarray(err) / (1 + np.abs(d))))
        return "pairing derivative", dict(inputs, s=s.tolist(), j=j), \
            {"deriv": [_cx(x) for x in d]}, {"richardson_error": rel}, \
            {"richardson_error": _tol(args, 1e-3)}
    grid = _area_grid(args, v)
    rep = areafn.scan_uniform_bound(grid, 1, v=v)
    if args.format == "csv":
        args._csv = rep.to_csv()
    return "area function scan", dict(inputs, n_params=len(grid)), \
        {"max": rep.max, "argmax": rep.argmax if rep.labels else None,
         "values": list(map(float, rep.values))}, \
        {"finite": 0.0 if np.all(np.isfinite(rep.values)) else 1.0}, {"finite": 0.5}


def _random_param(rng, v):
    vp = v // 2
    lam = np.sort(rng.uniform(0.01, 50, vp))[::-1]
    return (rng.uniform(0.01, 10) if v % 2 else 0.0, lam, rng.integers(0, 100, vp))


def check_multiplier(args):
    v = args.v
    rng = _rng(args)
    inputs = {"v": v}
    if args.action == "partition-check":
        worst, count, supp = 0.0, 0, 0.0
        for _ in range(1000):
            prm = _random_param(rng, v)
            act = multiplier.enumerate_active(prm, v)
            worst = max(worst, abs(sum(multiplier.chi_iota(i, prm) for i in act) - 1.0))
            count = max(count, len(act))
            r, lam, l = prm
            E = float(np.sum(lam * (2 * l + 1)) + r * r)
            for i in act:
                supp = max(supp, max(0.0, 0.25 * i.s - E, E - 16 * i.s))
        res = {"partition": worst, "support_inequality": supp,
               "overlap_excess": float(max(0, count - multiplier.overlap_bound(v)))}
        tols = {"partition": _tol(args, 1e-12), "support_inequality": 1e-12, "overlap_excess": 0.5}
        return "dyadic partition of unity", dict(inputs, n=1000), {"max_active": count}, res, tols
    if args.action in ("xi-check", "aleph-check"):
        x = rng.normal(size=v) * 0.5
        a = rng.normal(size=v * (v - 1) // 2) * 0.5
        p = GroupPoint(x, a)
        if v == 2:
            F = multiplier.v2_spherical_function(x, a)
            prm = (0.0, (1.3,), (2,))
        elif v == 3:
            F = multiplier.phi_spectral_function(p, matpolar.haar_quadrature(3, "O", order=20))
            prm = (0.7, (1.1,), (1,))
        else:
            raise ConfigError("xi/aleph checks run at v = 2 or 3")
        phi = F(*prm)
        if args.action == "xi-check":
            val = multiplier.xi_apply(F, prm, v)
            target = float(np.sum(x**2)) * phi
            tol = _tol(args, 1e-8 if v == 2 else 1e-3)
        else:
            val = multiplier.aleph_apply(F, prm, v)
            target = float(np.sum(a**2)) * phi
            tol = _tol(args, 1e-3 if v == 2 else 1e-2)
        return f"{args.action[:-6]} identity", dict(inputs, point=json.loads(p.to_json())), \
            {"value": _cx(val), "target": _cx(target)}, {"identity": abs(val - target)}, {"identity": tol}
    if v != 2:
        raise ConfigError("criterion runs at v = 2")

    def f(r, lam, l):
        return _bump(lam[0], 1.5, 2.5) * np.exp(-((l[0] - 5) / 2.0) ** 2) * (l[0] < 12)

    eps = 2.5
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        v1 = multiplier.multiplier_criterion(f, eps, 2, (1.4, 2.6), (0, 12), n=64).value
        v2 = multiplier.multiplier_criterion(f, eps, 2, (1.4, 2.6), (0, 12), n=128).value
    return "multiplier criterion", dict(inputs, eps=eps), {"n64": v1, "n128": v2}, \
        {"refinement_change": abs(v1 - v2) / abs(v2)}, {"refinement_change": _tol(args, 0.05)}


COMMANDS = {
    "specfun-check": check_specfun,
    "group-check": check_group,
    "polar-check": check_polar,
    "spherical": check_spherical,
    "plancherel": check_plancherel,
    "areafn": check_areafn,
    "multiplier": check_multiplier,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--v", type=int, default=2)
    common.add_argument("--group", choices=["O", "SO"], default="O")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--order", type=int, default=None,
                        help="quadrature order (or derivative order for areafn deriv)")
    common.add_argument("--lmax", type=int, default=30)
    common.add_argument("--lambda-range", default=None)
    common.add_argument("--rmax", type=float, default=12.0)
    common.add_argument("--tol", type=float, default=None)
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--param", default=None, help="SphericalParam JSON or file")
    common.add_argument("--point", default=None, help="GroupPoint JSON or file")
    common.add_argument("--no-timings", action="store_true",
                        help="omit wall-clock timings (bit-identical reports)")
    ap = argparse.ArgumentParser(prog="nilharm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("specfun-check", "group-check", "polar-check"):
        sub.add_parser(name, parents=[common])
    actions = {
        "spherical": ["eval", "eigencheck", "funceq-check"],
        "plancherel": ["roundtrip", "parseval", "kernel"],
        "areafn": ["pair", "deriv", "scan"],
        "multiplier": ["partition-check", "xi-check", "aleph-check", "criterion"],
    }
    for name, acts in actions.items():
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("action", choices=acts)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.v < 2:
        ap.error("--v must be >= 2")
    t0 = time.perf_counter()
    try:
        check, inputs, values, residuals, tolerances = COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"nilharm: error: {exc}", file=sys.stderr)
        return 2
    passed = {k: bool(residuals[k] < tolerances[k]) for k in residuals}
    report = {
        "command": args.command + (f" {args.action}" if hasattr(args, "action") else ""),
        "check": check,
        "inputs": inputs,
        "values": values,
        "residuals": residuals,
        "tolerances": tolerances,
        "pass": all(passed.values()),
        "checks": passed,
        "seed": args.seed,
    }
    if not args.no_timings:
        report["timings"] = {"total_s": time.perf_counter() - t0}
    if args.format == "csv":
        if hasattr(args, "_csv"):
            text = args._csv
        else:
            buf = io.StringIO()
            w = csv.writer(buf)
            w.writerow(["check", "residual", "tolerance", "pass"])
            for k in residuals:
                w.writerow([k, residuals[k], tolerances[k], passed[k]])
            text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2, default=float) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not report["pass"]:
        bad = {k: residuals[k] for k in residuals if not passed[k]}
        print(f"nilharm: failing residuals: {bad}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
