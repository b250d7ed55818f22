"""Command-line entry point.

Exit codes: 0 when the computed result agrees with the published value
(or no published value applies), 1 on a verified divergence, 2 on usage
or operational errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from . import h3, quadforms, screen, sieve, singular_moduli
from .cache import PolyCache, default_cache_dir

log = logging.getLogger("trinodisc")

EXIT_OK, EXIT_DIVERGENCE, EXIT_ERROR = 0, 1, 2

# Published outcomes that the commands compare against.
SIEVE_REFERENCE = {10**6: (1008, 4450, 79), 10**11: (16329600, 32567861, 163)}
SCAN_EXCEPTIONS = (-1467,)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    precision_bits: int | None
    threads: int
    cache_dir: Path | None
    checkpoint_dir: Path | None
    output: str


# --- output -------------------------------------------------------------

def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, float):
        return v
    return str(v)


def emit(rows: Iterable[dict], fmt: str, out=None) -> None:
    out = out or sys.stdout
    rows = [{k: _plain(v) for k, v in r.items()} for r in rows]
    if fmt == "json-lines":
        for r in rows:
            out.write(json.dumps(r) + "\n")
    elif fmt == "csv":
        if not rows:
            return
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, list) else v for k, v in r.items()})
        out.write(buf.getvalue())
    else:
        if not rows:
            out.write("(no rows)\n")
            return
        keys = list(rows[0])
        cells = [[str(r.get(k, "")) for k in keys] for r in rows]
        widths = [max(len(k), *(len(c[i]) for c in cells)) for i, k in enumerate(keys)]
        out.write("  ".join(k.ljust(w) for k, w in zip(keys, widths)).rstrip() + "\n")
        for c in cells:
            out.write("  ".join(v.ljust(w) for v, w in zip(c, widths)).rstrip() + "\n")


# --- commands -----------------------------------------------------------

def cmd_forms(args, cfg: RunConfig) -> int:
    forms = quadforms.enumerate_forms(args.delta)
    emit(({"a": f.a, "b": f.b, "c": f.c} for f in forms), cfg.output)
    return EXIT_OK


def cmd_classnum(args, cfg: RunConfig) -> int:
    emit([{"delta": args.delta, "h": quadforms.class_number(args.delta)}], cfg.output)
    return EXIT_OK


def cmd_suitable(args, cfg: RunConfig) -> int:
    delta = quadforms.as_discriminant(args.delta)
    by_a: dict[int, list[str]] = {}
    example = {}
    for cert in quadforms.recipe_suitable(delta):
        by_a.setdefault(cert.a, []).append(cert.recipe)
        example.setdefault(cert.a, cert.form)
    for cert in quadforms.certify_by_enumeration(delta):
        by_a.setdefault(cert.a, []).append(cert.recipe)
        example.setdefault(cert.a, cert.form)
    rows = [{"a": a, "form": list(example[a]), "recipes": sorted(set(r))}
            for a, r in sorted(by_a.items())]
    emit(rows, cfg.output)
    return EXIT_OK


def _hilbert(delta: int, cfg: RunConfig) -> singular_moduli.IntPolynomial:
    if cfg.cache_dir is not None:
        return PolyCache(cfg.cache_dir).hilbert(delta, cfg.precision_bits)
    return singular_moduli.hilbert_class_poly(delta, cfg.precision_bits)


def cmd_hilbert(args, cfg: RunConfig) -> int:
    H = _hilbert(args.delta, cfg)
    row = {"delta": args.delta, "h": H.degree,
           "coefficients": [str(c) for c in H.coefficients]}
    if H.certificate is not None:
        row["precision_bits"] = H.certificate.precision_bits
        row["max_rounding_distance"] = H.certificate.max_distance
    if cfg.output == "human":
        print(f"H_{args.delta}(t) = {H}")
    else:
        emit([row], cfg.output)
    return EXIT_OK


def cmd_stats(args, cfg: RunConfig) -> int:
    st = singular_moduli.delta_stats(args.delta, cfg.precision_bits)
    checks = singular_moduli.universal_bounds(args.delta, st)
    row = {"delta": st.delta, "h": st.h,
           "rho": None if st.rho is None else f"{float(st.rho):.12g}",
           "N": str(st.normN), "log_N": f"{float(st.log_normN):.12g}"}
    row.update({f"check_{k}": v for k, v in checks.items()})
    emit([row], cfg.output)
    return EXIT_OK if all(checks.values()) else EXIT_DIVERGENCE


def cmd_scan_small(args, cfg: RunConfig) -> int:
    reports = screen.scan_small(args.limit, args.margin, threads=cfg.threads)
    emit((r.to_json() for r in reports), cfg.output)
    found = [r.delta for r in reports]
    if args.expect_empty:
        expected = []
    else:
        expected = [d for d in SCAN_EXCEPTIONS if -d <= args.limit]
    if found != expected:
        print(f"divergence: expected {expected}, found {found}", file=sys.stderr)
        return EXIT_DIVERGENCE
    return EXIT_OK


def _sieve_oracle(config: sieve.SieveConfig, survivors) -> int:
    """Largest least split prime over the initial list."""
    return max(sieve.least_split_prime(-int(d)).prime for d in survivors)


def cmd_sieve(args, cfg: RunConfig) -> int:
    X = 10**11 if args.large else args.sieve_bound
    if X >= 10**9 and not args.large:
        raise UsageError("bounds of 1e9 and above need --large")
    config = sieve.SieveConfig.from_bound(X)
    ckpt = None
    if cfg.checkpoint_dir is not None:
        cfg.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        ckpt = cfg.checkpoint_dir / f"sieve_{X}.ckpt"
    residues = sieve.build_residues(config)
    if args.resume and ckpt is not None and ckpt.exists():
        state = sieve.load_checkpoint(ckpt, config)
        log.info("resumed at prime %d with %d survivors", state.cursor_prime, len(state.survivors))
    else:
        state = sieve.SieveState.initial(config, residues)
        if ckpt is not None:
            sieve.save_checkpoint(state, ckpt)
    n_disc = state.history[0][1] if state.history else None
    fresh = state.cursor_prime == config.p1
    initial = state.survivors.copy() if X <= 10**5 and fresh else None
    emptied, history = sieve.run_sieve(state, ckpt, threads=cfg.threads)
    rows = [{"prime": p, "survivors": n} for p, n in history]
    emit(rows, cfg.output)
    summary = {"X": X, "p0": config.p0, "p1": config.p1, "p2": config.p2, "N0": config.N0,
               "residues": len(residues), "discriminants": n_disc, "emptying_prime": emptied}
    print(json.dumps(summary), file=sys.stderr)
    ref = SIEVE_REFERENCE.get(X)
    if ref is not None:
        got = (len(residues), n_disc, emptied)
        if got != ref:
            print(f"divergence: expected {ref}, got {got}", file=sys.stderr)
            return EXIT_DIVERGENCE
    elif initial is not None and len(initial):
        oracle = _sieve_oracle(config, initial)
        if oracle != emptied:
            print(f"divergence: oracle says {oracle}, sieve says {emptied}", file=sys.stderr)
            return EXIT_DIVERGENCE
    return EXIT_OK


def cmd_h3_verify(args, cfg: RunConfig) -> int:
    bits = cfg.precision_bits or 256
    if args.delta is not None:
        delta = quadforms.as_discriminant(args.delta)
        h = quadforms.class_number(delta)
        if h != 3:
            raise UsageError(f"h({delta}) = {h}, not 3")
        deltas = [delta]
    else:
        deltas = None
    rows = h3.run_h3_pipeline(deltas, bits, args.trial_bound, threads=cfg.threads)
    out, status = [], EXIT_OK
    for r in rows:
        d = r.as_dict()
        d["lam_display"] = h3.display_bound(r.lam) if r.lam is not None else None
        d["mu_display"] = h3.display_bound(r.mu) if r.mu is not None else None
        issues = h3.compare_with_table(r, args.slack)
        d["issues"] = issues
        out.append(d)
        if r.error:
            status = max(status, EXIT_ERROR)
        elif issues:
            status = max(status, EXIT_DIVERGENCE)
            print(f"divergence at {r.delta}: " + "; ".join(issues), file=sys.stderr)
    if deltas is None:
        census = h3.list_h3_discriminants()
        if sorted(census) != sorted(h3.TABLE1):
            print("divergence: class-number-3 census differs from the table", file=sys.stderr)
            status = max(status, EXIT_DIVERGENCE)
    emit(out, cfg.output)
    return status


def cmd_least_split_prime(args, cfg: RunConfig) -> int:
    r = sieve.least_split_prime(args.delta)
    emit([{"delta": r.delta, "p": r.prime, "bound3": r.bound3, "bound4": r.bound4,
           "below3": r.below3, "below4": r.below4}], cfg.output)
    return EXIT_OK


def cmd_bounds(args, cfg: RunConfig) -> int:
    delta = quadforms.as_discriminant(args.delta)
    if args.kind == "trinomial":
        row = {"delta": delta, **singular_moduli.trinomial_bounds(delta)}
        emit([row], cfg.output)
        return EXIT_OK
    sig = screen.TrinomialSignature(args.m, args.n)
    if args.kind == "principal":
        variant = args.variant or "full"
        if args.log_x1 is None and variant != "half":
            raise UsageError("--log-x1 is required for this variant")
        value = screen.principal_rhs(delta, sig, args.log_x1 or 0.0, variant)
        row = {"delta": delta, "variant": variant, "rhs": singular_moduli.format_mpfr(value)}
    else:
        try:
            variant = int(args.variant or 1)
        except ValueError:
            raise UsageError(f"refined variants are 1-4, got {args.variant!r}") from None
        value = screen.refined_principal_rhs(delta, sig, args.rho, variant)
        row = {"delta": delta, "variant": variant, "rhs": singular_moduli.format_mpfr(value)}
    emit([row], cfg.output)
    return EXIT_OK


# --- parser -------------------------------------------------------------

def _int(text: str) -> int:
    """Integers, also written like 1e5 or 10**6."""
    t = text.replace("_", "")
    try:
        if "**" in t:
            base, exp = t.split("**")
            return int(base) ** int(exp)
        if "e" in t.lower():
            m, e = t.lower().split("e")
            return int(m) * 10 ** int(e)
        return int(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _positive(text: str) -> int:
    v = _int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


_NEGATIVE = re.compile(r"^-\d[\d_]*(\.\d+)?([eE]\d+|\*\*\d+)?$|^-\.\d+$")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision-bits", type=_positive, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=_positive, default=argparse.SUPPRESS,
                        help="worker count (processes for the scan, threads for the sieve)")
    common.add_argument("--cache-dir", type=Path, default=argparse.SUPPRESS)
    common.add_argument("--checkpoint-dir", type=Path, default=argparse.SUPPRESS)
    common.add_argument("--output", choices=("json-lines", "csv", "human"),
                        default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="trinodisc", parents=[common],
                                description="Verify computations on trinomial discriminants.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, fn: Callable, help: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, parents=[common], help=help)
        sp.set_defaults(func=fn)
        # let discriminants such as -1e6 or -10**11 through as positionals
        sp._negative_number_matcher = _NEGATIVE
        return sp

    for name, fn, text in (("forms", cmd_forms, "reduced forms of a discriminant"),
                           ("classnum", cmd_classnum, "class number"),
                           ("suitable", cmd_suitable, "suitable integers with certificates"),
                           ("hilbert", cmd_hilbert, "Hilbert class polynomial"),
                           ("stats", cmd_stats, "h, rho and N with the universal bounds"),
                           ("least-split-prime", cmd_least_split_prime, "smallest split prime")):
        add(name, fn, text).add_argument("delta", type=_int)

    sp = add("scan-small", cmd_scan_small, "margin scan over small discriminants")
    sp.add_argument("--limit", type=_positive, default=10**5)
    sp.add_argument("--margin", type=_positive_float, default=0.15)
    sp.add_argument("--expect-empty", action="store_true")

    sp = add("sieve", cmd_sieve, "residue/character sieve")
    sp.add_argument("--sieve-bound", type=_positive, default=10**6)
    sp.add_argument("--large", action="store_true", help="run at X = 1e11")
    sp.add_argument("--resume", action="store_true")

    sp = add("h3-verify", cmd_h3_verify, "class-number-3 table reproduction")
    sp.add_argument("--delta", type=_int)
    sp.add_argument("--trial-bound", type=_positive, default=10**6)
    sp.add_argument("--slack", type=float, default=0.05,
                    help="allowed excess of lambda, mu over the table values")

    sp = add("bounds", cmd_bounds, "principal-inequality and trinomial bound evaluators")
    sp.add_argument("delta", type=_int)
    sp.add_argument("--kind", choices=("principal", "refined", "trinomial"), default="principal")
    sp.add_argument("--m", type=_positive, default=2)
    sp.add_argument("--n", type=_positive, default=1)
    sp.add_argument("--log-x1", type=float)
    sp.add_argument("--rho", type=float)
    sp.add_argument("--variant",
                    help="full|mn|single|half for principal, 1-4 for refined")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cache_dir = getattr(args, "cache_dir", None) or default_cache_dir()
    cfg = RunConfig(args.command, getattr(args, "precision_bits", None),
                    getattr(args, "threads", 1), cache_dir,
                    getattr(args, "checkpoint_dir", None), getattr(args, "output", "human"))
    try:
        return args.func(args, cfg)
    except (UsageError, quadforms.InvalidDiscriminant, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ArithmeticError, sieve.CheckpointError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
