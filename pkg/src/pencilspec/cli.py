"""Command-line driver and the on-disk tuple/report formats.

Subcommands: ``analyze``, ``decompose``, ``corollary``, ``generate``.
Exit codes are a stable contract:

* 0 - conditions hold / command succeeded,
* 1 - spectral conditions fail (including structural splitting failures),
* 2 - precondition violated (k does not divide N, wrong spectrum pattern,
  tuple not admissible, monomial family over the cap),
* 3 - I/O trouble or numerical breakdown.

Files are JSON.  Complex numbers are stored as ``[re, im]`` pairs with
full shortest-round-trip decimal digits, so a load/save cycle is lossless.
Reports echo the inputs, the seeds and the whole tolerance block; rerunning
with identical inputs reproduces a report byte for byte except for its
``timestamp`` field.  The ``PENCIL_THREADS`` environment variable caps the
worker pool used for the per-word checks.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from itertools import product

import numpy as np

from .charpoly import kth_power_test
from .conditions import ConditionReport, analyze, sample_admissible
from .config import DEFAULT, Tolerances
from .decomposer import decompose, verify_decomposition
from .errors import (
    AdmissibleSamplingFailed,
    ClusterAmbiguity,
    DecompositionError,
    LineSamplingFailed,
    MonomialBlowup,
    NotHermitian,
    NumericalBreakdown,
    SpectralError,
    SpectrumPatternViolation,
)
from .instances import gen_commuting, gen_conjugate_negative, gen_decomposable
from .linalg import HermitianTuple, shift_to_invertible

TUPLE_FORMAT = "pencilspec-tuple"
REPORT_FORMAT = "pencilspec-report"
FORMAT_VERSION = 1
MONOMIAL_CAP = 5000

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_PRECONDITION = 2
EXIT_ERROR = 3


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _complex_to_json(z):
    z = complex(z)
    return [z.real, z.imag]


def _matrix_to_json(a):
    return [[_complex_to_json(z) for z in row] for row in np.asarray(a)]


def _matrix_from_json(rows):
    try:
        arr = np.array(
            [[complex(cell[0], cell[1]) for cell in row] for row in rows],
            dtype=np.complex128,
        )
    except (TypeError, IndexError, ValueError) as exc:
        raise ValueError(f"malformed matrix entry: {exc}") from None
    return arr


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def save_tuple(path, tup: HermitianTuple, metadata=None):
    doc = {
        "format": TUPLE_FORMAT,
        "version": FORMAT_VERSION,
        "dim": tup.dim,
        "m": tup.m,
        "matrices": [_matrix_to_json(a) for a in tup.matrices],
    }
    if metadata:
        doc["metadata"] = metadata
    _atomic_write(path, _dump_json(doc))


def load_tuple(path, allow_nonhermitian: bool = False):
    """Read a tuple file.  Returns ``(HermitianTuple, metadata dict)``.

    With ``allow_nonhermitian`` the matrices are projected onto their
    Hermitian parts instead of being rejected.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != TUPLE_FORMAT:
        raise ValueError(f"{path}: not a {TUPLE_FORMAT} file")
    mats = [_matrix_from_json(rows) for rows in doc["matrices"]]
    if len(mats) != doc.get("m") or any(a.shape != (doc.get("dim"),) * 2 for a in mats):
        raise ValueError(f"{path}: matrix shapes disagree with the header")
    if allow_nonhermitian:
        mats = [(a + a.conj().T) / 2.0 for a in mats]
    return HermitianTuple(tuple(mats)), doc.get("metadata", {})


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _verdict_to_json(v):
    if v is None:
        return None
    return {
        "is_kth_power": v.is_kth_power,
        "k": v.k,
        "n": v.n,
        "worst_spread": v.worst_spread,
        "failure_reason": v.failure_reason,
        "lines": [
            {"seed": seed, "cluster_sizes": list(sizes), "spread": spread}
            for seed, sizes, spread in v.per_line_clusters
        ],
    }


def _word_summary(w, v):
    bad = [rec for rec in v.per_line_clusters if not all(s == v.k for s in rec[1])]
    sample = bad[0] if bad else v.per_line_clusters[0]
    return {
        "letters": list(w.letters),
        "projections": list(w.projections),
        "is_kth_power": v.is_kth_power,
        "cluster_profile": list(sample[1]),
        "worst_spread": v.worst_spread,
    }


def _report_skeleton(command, args, input_path, tol: Tolerances):
    return {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "input": {
            "path": str(input_path),
            "sha256": _file_digest(input_path),
        },
        "parameters": args,
        "tolerances": tol.as_dict(),
    }


def _emit(report, out_path):
    text = _dump_json(report)
    if out_path:
        _atomic_write(out_path, text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _tolerances_from_overrides(pairs):
    if not pairs:
        return DEFAULT
    values = {}
    valid = DEFAULT.as_dict()
    for item in pairs:
        key, _, raw = item.partition("=")
        if key not in valid:
            raise ValueError(f"unknown tolerance name {key!r}")
        values[key] = type(valid[key])(raw)
    merged = {**valid, **values}
    return Tolerances(**merged)


def _analyze_report_body(report: ConditionReport):
    return {
        "overall": report.overall,
        "detail": report.detail,
        "precondition_ok": report.precondition_ok,
        "admissible_ok": report.admissible_ok,
        "admissibility": report.admissibility,
        "n": report.n,
        "k": report.k,
        "mode": report.mode,
        "lines": report.lines,
        "shifts": list(report.shifts),
        "word_enumeration_truncated": report.truncated,
        "full_tuple": _verdict_to_json(report.full_tuple),
        "words": [_word_summary(w, v) for w, v in report.word_results],
        "failing_words": [w.as_dict() for w in report.failing_words],
    }


def cmd_analyze(args) -> int:
    tol = _tolerances_from_overrides(args.tol)
    tup, meta = load_tuple(args.input, allow_nonhermitian=args.allow_nonhermitian)
    if tup.dim % args.k:
        report = _report_skeleton(
            "analyze",
            {"k": args.k, "mode": args.mode, "seed": args.seed, "lines": args.lines},
            args.input,
            tol,
        )
        report["overall"] = "precondition_violated"
        report["detail"] = f"k={args.k} does not divide N={tup.dim}"
        _emit(report, args.out)
        return EXIT_PRECONDITION
    cond = analyze(
        tup, args.k, mode=args.mode, seed=args.seed, lines=args.lines, tol=tol
    )
    report = _report_skeleton(
        "analyze",
        {"k": args.k, "mode": args.mode, "seed": args.seed, "lines": args.lines},
        args.input,
        tol,
    )
    report.update(_analyze_report_body(cond))
    if meta:
        report["input"]["metadata"] = meta
    _emit(report, args.out)
    if cond.overall == "pass":
        return EXIT_PASS
    if cond.overall == "fail":
        return EXIT_FAIL
    return EXIT_PRECONDITION


def cmd_decompose(args) -> int:
    tol = _tolerances_from_overrides(args.tol)
    tup, meta = load_tuple(args.input, allow_nonhermitian=args.allow_nonhermitian)
    report = _report_skeleton(
        "decompose", {"k": args.k, "seed": args.seed}, args.input, tol
    )
    if meta:
        report["input"]["metadata"] = meta
    if tup.dim % args.k:
        report["outcome"] = "precondition_violated"
        report["detail"] = f"k={args.k} does not divide N={tup.dim}"
        _emit(report, args.out)
        return EXIT_PRECONDITION
    try:
        result = decompose(tup, args.k, seed=args.seed, tol=tol)
    except SpectrumPatternViolation as exc:
        report["outcome"] = "precondition_violated"
        report["detail"] = str(exc)
        _emit(report, args.out)
        return EXIT_PRECONDITION
    except DecompositionError as exc:
        report["outcome"] = "conditions_violated"
        report["violated_condition"] = type(exc).__name__
        report["detail"] = str(exc)
        cycle = getattr(exc, "cycle", None)
        if cycle is not None:
            report["cycle"] = [int(c) + 1 for c in cycle]
        _emit(report, args.out)
        return EXIT_FAIL
    report["outcome"] = "decomposed"
    report["n"] = result.n
    report["k"] = result.k
    report["residual"] = result.residual
    report["eigenvalues"] = [float(x) for x in result.eigenvalues]
    report["partition"] = [[int(i) + 1 for i in blk] for blk in result.partition]
    report["shifts"] = list(result.shifts)
    report["permutation"] = [int(p) for p in result.permutation]
    report["eigenbasis"] = _matrix_to_json(result.eigenbasis)
    report["block_unitary"] = _matrix_to_json(result.block_unitary)
    report["reduced_tuple"] = [_matrix_to_json(b) for b in result.reduced.matrices]
    report["verification"] = verify_decomposition(tup, result, tol=tol)
    _emit(report, args.out)
    return EXIT_PASS


def _enumerate_monomials(m, max_degree):
    """Non-commutative monomials over generator labels 1..m in graded
    lexicographic order, degrees 1..max_degree."""
    for degree in range(1, max_degree + 1):
        yield from product(range(1, m + 1), repeat=degree)


def cmd_corollary(args) -> int:
    tol = _tolerances_from_overrides(args.tol)
    tup, meta = load_tuple(args.input, allow_nonhermitian=args.allow_nonhermitian)
    report = _report_skeleton(
        "corollary",
        {
            "k": args.k,
            "seed": args.seed,
            "lines": args.lines,
            "max_degree": args.max_degree,
        },
        args.input,
        tol,
    )
    if meta:
        report["input"]["metadata"] = meta
    if tup.dim % args.k:
        report["outcome"] = "precondition_violated"
        report["detail"] = f"k={args.k} does not divide N={tup.dim}"
        _emit(report, args.out)
        return EXIT_PRECONDITION
    n = tup.dim // args.k
    degree_bound = n * n - n + 1
    if args.max_degree is not None:
        degree_bound = min(degree_bound, args.max_degree)
    family_size = sum(tup.m**d for d in range(1, degree_bound + 1))
    report["degree_bound"] = degree_bound
    report["family_size"] = family_size
    report["monomial_order"] = "graded lexicographic in generator labels"
    if family_size > MONOMIAL_CAP:
        report["outcome"] = "monomial_blowup"
        report["detail"] = f"{family_size} monomials exceed the cap {MONOMIAL_CAP}"
        _emit(report, args.out)
        return EXIT_PRECONDITION

    master = np.random.default_rng(args.seed)
    transform_seed, test_seed = (int(s) for s in master.integers(0, 2**63 - 1, size=2))
    c, _ = sample_admissible(tup, args.k, seed=transform_seed, tol=tol)
    report["admissible_transform"] = _matrix_to_json(c)

    # The certificate needs invertible generators; a scalar shift changes
    # neither the monomial family's splitting behavior nor the verdict.
    shifted, shifts = shift_to_invertible(tup, tol=tol)
    report["shifts"] = list(shifts)

    # Each monomial is normalized to unit spectral norm.  That is a diagonal
    # rescaling of the pencil variables, which maps a perfect k-th power to a
    # perfect k-th power, and it keeps the restricted roots at one scale even
    # though raw monomial norms spread over many orders of magnitude.
    monomials = []
    for word in _enumerate_monomials(tup.m, degree_bound):
        mat = shifted.matrices[word[0] - 1]
        for letter in word[1:]:
            mat = mat @ shifted.matrices[letter - 1]
        nrm = np.linalg.norm(mat, 2)
        monomials.append(mat / nrm if nrm > 1.0 else mat)
    verdict = kth_power_test(
        monomials, args.k, n, lines=args.lines, seed=test_seed, tol=tol
    )
    report["verdict"] = _verdict_to_json(verdict)
    report["outcome"] = "pass" if verdict.is_kth_power else "fail"
    _emit(report, args.out)
    return EXIT_PASS if verdict.is_kth_power else EXIT_FAIL


_FAMILIES = ("decomposable", "conjugate_negative", "commuting")


def cmd_generate(args) -> int:
    if args.family not in _FAMILIES:
        sys.stderr.write(
            f"unknown family {args.family!r}; choose one of {', '.join(_FAMILIES)}\n"
        )
        return EXIT_ERROR
    if args.family == "decomposable":
        tup, desc = gen_decomposable(args.n, args.k, args.m, args.seed)
    elif args.family == "commuting":
        tup, desc = gen_commuting(args.n, args.k, args.m, args.seed)
    else:
        tup, desc = gen_conjugate_negative(args.seed)
    save_tuple(args.out, tup, metadata={"descriptor": desc.as_dict()})
    return EXIT_PASS


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="pencilspec",
        description=(
            "Test whether the joint spectrum of a Hermitian matrix tuple (and of "
            "its projection-interleaved words) is a perfect k-th power, and "
            "construct the unitary splitting the tuple into k identical copies."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("input", help="tuple file (JSON)")
        p.add_argument("--k", type=int, required=True, help="number of copies to certify")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--lines", type=int, default=None, help="random lines per power test")
        p.add_argument("--out", default=None, help="report path (stdout if omitted)")
        p.add_argument(
            "--tol",
            action="append",
            metavar="NAME=VALUE",
            help="override a named tolerance (repeatable)",
        )
        p.add_argument(
            "--allow-nonhermitian",
            action="store_true",
            help="project loaded matrices onto their Hermitian parts",
        )

    p_an = sub.add_parser("analyze", help="run the spectral condition battery")
    common(p_an)
    p_an.add_argument("--mode", choices=("all", "proof_core"), default="all")
    p_an.set_defaults(func=cmd_analyze)

    p_de = sub.add_parser("decompose", help="construct the splitting unitary")
    common(p_de)
    p_de.set_defaults(func=cmd_decompose)

    p_co = sub.add_parser("corollary", help="monomial-family certificate (no admissibility hypothesis)")
    common(p_co)
    p_co.add_argument("--max-degree", type=int, default=None)
    p_co.set_defaults(func=cmd_corollary)

    p_ge = sub.add_parser("generate", help="write a seeded instance to a tuple file")
    p_ge.add_argument("--family", required=True, help="|".join(_FAMILIES))
    p_ge.add_argument("--n", type=int, default=2)
    p_ge.add_argument("--k", type=int, default=2)
    p_ge.add_argument("--m", type=int, default=2)
    p_ge.add_argument("--seed", type=int, default=0)
    p_ge.add_argument("--out", required=True)
    p_ge.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ClusterAmbiguity, MonomialBlowup) as exc:
        sys.stderr.write(f"precondition violated: {exc}\n")
        return EXIT_PRECONDITION
    except (OSError, ValueError, json.JSONDecodeError, NotHermitian) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR
    except (NumericalBreakdown, LineSamplingFailed, AdmissibleSamplingFailed) as exc:
        sys.stderr.write(f"numerical breakdown: {exc}\n")
        return EXIT_ERROR
    except SpectralError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
