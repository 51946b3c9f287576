"""Command-line front end: ``heckeqf <command> [options]``.

Exit codes: 0 success, 1 gate or computation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__, dirichlet, eigenforms, moments, qforms, sieves, signchange, verify
from .errors import (
    CacheError,
    DomainError,
    RangeError,
    UnsupportedDiscriminantError,
)

log = logging.getLogger("heckeqf")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MAX_X = 10 ** 7  # memory budget: about 15 bytes per table entry


def _bound(text: str) -> int:
    """Parse 1e6, 2**20, 1000000 as a positive integer bound."""
    try:
        if "**" in text:
            base, exp = text.split("**")
            val = int(base) ** int(exp)
        else:
            f = float(text)
            val = int(f)
            if val != f:
                raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer bound: {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError("bound must be >= 1")
    return val


def _read_config_file(path: str) -> list[str]:
    """key=value lines become --key value arguments."""
    args = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        args.append("--" + key.strip().replace("_", "-"))
        if value.strip():
            args.append(value.strip())
    return args


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cache-dir", type=Path, default=None,
                        help="coefficient cache directory (default $HECKEQF_CACHE or ~/.cache/heckeqf)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=None, help="output file prefix")
    common.add_argument("--force", action="store_true", help="allow discriminants outside the catalog")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="heckeqf", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"heckeqf {__version__}")
    p.add_argument("--config", help="key=value file of extra options")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", parents=[common], help="list forms and discriminants")
    c.add_argument("--json", action="store_true")

    c = sub.add_parser("verify", parents=[common], help="run every invariant gate")
    c.add_argument("--quick", action="store_true", help="X_max = 10^4 smoke run")
    c.add_argument("--xmax", type=_bound, default=None)

    c = sub.add_parser("coeffs", parents=[common], help="build or load a coefficient cache")
    c.add_argument("--form", required=True)
    c.add_argument("--depth", type=_bound, default=eigenforms.DEFAULT_DEPTH)
    c.add_argument("--show", type=int, default=10)

    c = sub.add_parser("sum", parents=[common], help="S*(X) at dyadic checkpoints")
    c.add_argument("--form", required=True)
    c.add_argument("--disc", type=int, required=True)
    c.add_argument("--xmax", type=_bound, default=10 ** 6)
    c.add_argument("--checkpoints", default="dyadic",
                   help="'dyadic' or a comma-separated list of X values")

    c = sub.add_parser("eta-mean", parents=[common], help="E_eta(X) against its main term")
    c.add_argument("--eta", type=int, default=1)
    c.add_argument("--disc", type=int, required=True)
    c.add_argument("--level", type=int, default=1)
    c.add_argument("--xmax", type=_bound, default=10 ** 6)
    c.add_argument("--checkpoints", default="dyadic")
    c.add_argument("--p-cut", type=_bound, default=dirichlet.DEFAULT_P_CUT)

    c = sub.add_parser("sigma", parents=[common], help="solve the sigma(u) delay equation")
    c.add_argument("--umax", type=float, default=4 / 3)
    c.add_argument("--step", type=float, default=1e-3)
    c.add_argument("--j-max", type=int, default=4)
    c.add_argument("--initial-segment", type=float, default=None,
                   help="impose sigma(u) = u on (0, value]; default one grid step")

    c = sub.add_parser("sign-change", parents=[common], help="first negative lambda on represented n")
    c.add_argument("--form", required=True)
    c.add_argument("--disc", type=int, required=True)
    c.add_argument("--xmax", type=_bound, default=10 ** 6)
    c.add_argument("--all-n", action="store_true", help="scan non-squarefree n too")

    c = sub.add_parser("slope", parents=[common], help="log-log slope of |S*| over dyadic X")
    c.add_argument("--form", default="all")
    c.add_argument("--disc", default="all")
    c.add_argument("--xmin", type=_bound, default=verify.SLOPE_WINDOW[0])
    c.add_argument("--xmax", type=_bound, default=verify.SLOPE_WINDOW[1])
    return p


def _write(text: str, out: Path | None, suffix: str) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = out.with_name(out.name + suffix) if out.suffix == "" else out
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")
    log.info("wrote %s", path)


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default)


def _default(obj):
    import numpy as np
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(type(obj))


def _config(args) -> dict:
    skip = {"func", "verbose", "out"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg["cache_dir"] = str(args.cache_dir) if args.cache_dir else None
    return cfg


def _check_disc(D: int, force: bool) -> None:
    if D not in qforms.CATALOG_DISCRIMINANTS and not force:
        raise DomainError(f"D={D} is not a catalog discriminant (use --force)")


def _checkpoints(spec: str, X_max: int) -> list[int]:
    if spec == "dyadic":
        return moments.dyadic_checkpoints(X_max) or [X_max]
    return sorted({_bound(x) for x in spec.split(",")})


def _table(args, label: str, D: int, X_max: int) -> sieves.CoefficientTable:
    if X_max > MAX_X:
        raise RangeError(f"X_max={X_max} exceeds the memory budget {MAX_X}")
    _check_disc(D, args.force)
    ent = eigenforms.load_entry(label, max(X_max, 1), args.cache_dir)
    return sieves.build_table(ent, D, X_max)


def cmd_catalog(args) -> int:
    forms = [{"label": it.label, "aliases": list(it.aliases), "N": it.spec.level,
              "k": it.spec.weight, "eta_factors": [list(f) for f in it.spec.factors]}
             for it in eigenforms.CATALOG]
    discs = [{"D": D, "form": str(qforms.principal_form(D)), "h": qforms.class_number(D),
              "w_D": qforms.unit_count(D), "fundamental": qforms.is_fundamental(D)}
             for D in qforms.CATALOG_DISCRIMINANTS]
    if args.json:
        _write(_dumps({"version": __version__, "forms": forms, "discriminants": discs}), args.out, ".json")
        return EXIT_OK
    lines = ["forms:"]
    lines += [f"  {f['label']:<6} N={f['N']:<3} k={f['k']:<3} eta{f['eta_factors']}" for f in forms]
    lines.append("discriminants (h=1):")
    lines += [f"  D={d['D']:<5} {d['form']:<10} w_D={d['w_D']} "
              f"{'fundamental' if d['fundamental'] else 'non-fundamental'}" for d in discs]
    _write("\n".join(lines), args.out, ".txt")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.quick:
        cfg = verify.VerifyConfig.quick_config(args.cache_dir, args.seed)
    else:
        cfg = verify.VerifyConfig(cache_dir=args.cache_dir, seed=args.seed)
    if args.xmax:
        cfg.X_max = args.xmax
    gates = verify.run(cfg, threads=args.threads)
    failing = [g.name for g in gates if not g.passed]
    report = {
        "version": __version__,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(cfg).items()},
        "passed": not failing,
        "failing_gates": failing,
        "gates": [asdict(g) for g in gates],
    }
    _write(_dumps(report), args.out, ".json")
    for g in gates:
        status = "SKIP" if g.skipped else ("PASS" if g.passed else "FAIL")
        print(f"{status} {g.name}", file=sys.stderr)
    return EXIT_OK if not failing else EXIT_FAIL


def cmd_coeffs(args) -> int:
    ent = eigenforms.load_entry(args.form, args.depth, args.cache_dir)
    path = eigenforms.cache_path(args.cache_dir or eigenforms.default_cache_dir(), ent.N, ent.k)
    rows = [{"n": n, "a": str(ent.a[n]), "lambda": float(ent.lam[n])}
            for n in range(1, min(args.show, ent.depth) + 1)]
    _write(_dumps({"version": __version__, "label": ent.label, "N": ent.N, "k": ent.k,
                   "depth": ent.depth, "cache": str(path), "head": rows}), args.out, ".json")
    return EXIT_OK


def cmd_sum(args) -> int:
    tab = _table(args, args.form, args.disc, args.xmax)
    rep = moments.sum_S(tab, _checkpoints(args.checkpoints, args.xmax))
    try:
        moments.fit_slope(rep)
    except moments.InsufficientDataError as exc:
        log.warning("slope not fitted: %s", exc)
    rep.params = {"config": _config(args), "version": __version__}
    if args.out is None:
        sys.stdout.write(rep.to_csv())
        return EXIT_OK
    _write(rep.to_csv(), args.out, ".csv")
    _write(rep.to_json(), args.out, ".json")
    return EXIT_OK


def cmd_eta_mean(args) -> int:
    _check_disc(args.disc, args.force)
    # E_eta does not involve lambda; any form of level N supplies the table frame
    label = {it.spec.level: it.label for it in eigenforms.CATALOG}.get(args.level)
    X = args.xmax
    if label is not None:
        tab = _table(args, label, args.disc, X)
    else:
        tab = _bare_table(args.disc, args.level, X)
    rep = moments.sum_E(tab, args.eta, [x for x in _checkpoints(args.checkpoints, X) if x >= 3],
                        with_main_term=True, p_cut=args.p_cut)
    P1 = dirichlet.P_euler(1, args.disc, args.level, args.eta, args.p_cut)
    rep.params = {"config": _config(args), "version": __version__, "P1": P1.value.real,
                  "P1_tail_bound": P1.tail_bound, "L1": dirichlet.L1_chi(args.disc).value,
                  "L1_tail_bound": dirichlet.L1_chi(args.disc).tail_bound}
    if args.out is None:
        sys.stdout.write(rep.to_csv())
        return EXIT_OK
    _write(rep.to_csv(), args.out, ".csv")
    _write(rep.to_json(), args.out, ".json")
    return EXIT_OK


def _bare_table(D: int, N: int, X: int) -> sieves.CoefficientTable:
    import numpy as np
    zeros = np.zeros(X + 1)
    return sieves.CoefficientTable(
        X_max=X, mu_sq=sieves.moebius_squarefree_sieve(X), omega=sieves.omega_sieve(X),
        coprime_N=sieves.coprime_sieve(X, N), r_star=sieves.r_star_sieve(D, X),
        lam=zeros, a_sign=zeros.astype(np.int8), N=N, k=0, D=D, label=f"level{N}")


def cmd_sigma(args) -> int:
    sol = signchange.sigma_march(u_max=args.umax, step=args.step, initial_segment=args.initial_segment)
    u_end = min(args.umax, 4 / 3)
    series = signchange.sigma_series(u=u_end, j_max=args.j_max)
    report = {
        "version": __version__,
        "config": _config(args),
        "march": {"step": sol.step, "initial_segment": sol.params["initial_segment"],
                  "u_max": float(sol.grid[-1]), "sigma_at_u_end": sol.at(u_end),
                  "lipschitz_constant": signchange.SIGMA_LIPSCHITZ},
        "series": {"j_max": args.j_max, "quadrature_step": 1e-4, "sigma_at_u_end": series},
        "u_end": u_end,
        "positive": sol.at(u_end) > 0 and series > 0,
        "agreement": abs(sol.at(u_end) - series),
    }
    _write(_dumps(report), args.out, ".json")
    if args.out is not None:
        _write(signchange.sigma_csv(sol, args.j_max), args.out, ".csv")
    return EXIT_OK


def cmd_sign_change(args) -> int:
    tab = _table(args, args.form, args.disc, args.xmax)
    rec = signchange.first_sign_change(tab, squarefree=not args.all_n)
    out = asdict(rec)
    out.update({"version": __version__, "config": _config(args), "found": rec.found,
                "negativity_threshold": signchange.NEG_THRESHOLD})
    _write(_dumps(out), args.out, ".json")
    return EXIT_OK if rec.found else EXIT_FAIL


def cmd_slope(args) -> int:
    forms = verify.FORMS if args.form == "all" else (eigenforms.catalog_item(args.form).label,)
    discs = qforms.CATALOG_DISCRIMINANTS if args.disc == "all" else (int(args.disc),)
    X_max = args.xmax
    results = {}
    worst = -math.inf
    for label in forms:
        ent = eigenforms.load_entry(label, X_max, args.cache_dir)
        for D in discs:
            _check_disc(D, args.force)
            tab = sieves.build_table(ent, D, X_max)
            rep = moments.sum_S(tab, moments.dyadic_checkpoints(X_max))
            try:
                s = moments.fit_slope(rep, args.xmin, args.xmax)
            except moments.InsufficientDataError as exc:
                results[f"{label},{D}"] = {"slope": None, "error": str(exc)}
                continue
            results[f"{label},{D}"] = {"slope": s, "bound_constant_max": max(c for _, c in rep.bound_constant)}
            worst = max(worst, s)
    ok = all(r["slope"] is not None and r["slope"] <= verify.SLOPE_GATE for r in results.values())
    _write(_dumps({"version": __version__, "config": _config(args), "gate": verify.SLOPE_GATE,
                   "passed": ok, "max_slope": worst, "results": results}), args.out, ".json")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "catalog": cmd_catalog, "verify": cmd_verify, "coeffs": cmd_coeffs, "sum": cmd_sum,
    "eta-mean": cmd_eta_mean, "sigma": cmd_sigma, "sign-change": cmd_sign_change, "slope": cmd_slope,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--config" in argv:
        i = argv.index("--config")
        try:
            extra = _read_config_file(argv[i + 1])
        except (IndexError, OSError) as exc:
            print(f"heckeqf: bad --config: {exc}", file=sys.stderr)
            return EXIT_USAGE
        argv = argv[:i] + argv[i + 2:] + extra
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DomainError, UnsupportedDiscriminantError, KeyError, RangeError) as exc:
        print(f"heckeqf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CacheError, ArithmeticError, ValueError) as exc:
        print(f"heckeqf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
