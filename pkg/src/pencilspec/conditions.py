"""Spectral conditions for splitting a Hermitian tuple into identical copies.

The certificate has three layers:

1. a cheap precondition: the first generator must carry exactly n eigenvalue
   clusters of multiplicity k;
2. admissibility: every generator separately shows n clusters of size k with
   well-separated centers (the regularity the construction leans on);
3. the word conditions: for every word ``A_s1 P_j1 A_s2 ... P_jr A_s(r+1)``
   built from generators interleaved with distinct spectral projections of
   the first generator (r <= n-1), the pair pencil with the first generator
   must pass the perfect k-th power test.

``analyze`` aggregates all three into a :class:`ConditionReport`.  Word
checks are independent and may run in a thread pool; their sub-seeds are
fixed before dispatch, so the report is identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, permutations, product

import numpy as np

from .charpoly import KPowerVerdict, branch_derivative, kth_power_test
from .config import DEFAULT, Tolerances
from .errors import (
    ClusterAmbiguity,
    AdmissibleSamplingFailed,
    IndexOutOfRange,
    ZeroCoefficientOnCycle,
)
from .linalg import (
    HermitianTuple,
    SpectralData,
    apply_tuple_map,
    eigendecompose_clustered,
    norm_scale,
    shift_to_invertible,
)

__all__ = [
    "WordSpec",
    "ConditionReport",
    "enumerate_words",
    "count_words",
    "realize_word",
    "check_word_condition",
    "check_admissibility",
    "sample_admissible",
    "analyze",
    "verify_first_order_identity",
    "verify_cycle_identity",
    "worker_count",
]


@dataclass(frozen=True)
class WordSpec:
    """Symbolic word: generator labels interleaved with projection labels.

    ``letters`` are generator labels in {2..m} (2 means the second
    generator), ``projections`` are cluster labels in {1..n}, pairwise
    distinct, one fewer than the letters.  The realized matrix is
    ``A_letters[0] P_projections[0] A_letters[1] ... A_letters[-1]``.
    """

    letters: tuple
    projections: tuple

    def __post_init__(self):
        letters = tuple(int(s) for s in self.letters)
        projections = tuple(int(j) for j in self.projections)
        if len(letters) != len(projections) + 1:
            raise ValueError("need exactly one more letter than projections")
        if any(s < 2 for s in letters):
            raise ValueError("generator labels start at 2")
        if any(j < 1 for j in projections):
            raise ValueError("projection labels start at 1")
        if len(set(projections)) != len(projections):
            raise ValueError("projection labels must be pairwise distinct")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "projections", projections)

    @property
    def r(self) -> int:
        return len(self.projections)

    def as_dict(self):
        return {"letters": list(self.letters), "projections": list(self.projections)}


def count_words(n: int, m: int, mode: str = "all") -> int:
    """Closed-form size of the word family."""
    total = 0
    for r in range(n):
        letters = (m - 1) ** (r + 1)
        if mode == "all":
            arrangements = 1
            for t in range(r):
                arrangements *= n - t
        elif mode == "proof_core":
            arrangements = 1
            num, den = 1, 1
            for t in range(r):
                num *= n - t
                den *= t + 1
            arrangements = num // den
        else:
            raise ValueError(f"unknown mode {mode!r}")
        total += letters * arrangements
    return total


def enumerate_words(n: int, m: int, mode: str = "all", cap: int = None):
    """All words with r <= n-1 distinct projection labels.

    ``mode="all"`` walks every ordered tuple of distinct projections (the
    hypothesis of the splitting theorem); ``mode="proof_core"`` keeps one
    representative per projection subset (strictly increasing labels), the
    words the constructive argument actually consumes.  Returns
    ``(words, truncated)``; enumeration stops silently at ``cap``.
    """
    if n < 1 or m < 2:
        raise ValueError("need n >= 1 and m >= 2")
    if mode not in ("all", "proof_core"):
        raise ValueError(f"unknown mode {mode!r}")
    if cap is None:
        cap = DEFAULT.word_cap
    words = []
    truncated = False
    for r in range(n):
        if mode == "all":
            proj_iter = permutations(range(1, n + 1), r)
        else:
            proj_iter = combinations(range(1, n + 1), r)
        for projections in proj_iter:
            for letters in product(range(2, m + 1), repeat=r + 1):
                if len(words) >= cap:
                    truncated = True
                    return words, truncated
                words.append(WordSpec(letters=letters, projections=projections))
    return words, truncated


def realize_word(tup: HermitianTuple, spec: SpectralData, w: WordSpec) -> np.ndarray:
    """Multiply out the word as a matrix in the tuple's algebra."""
    if max(w.letters) > tup.m:
        raise IndexOutOfRange(f"letter {max(w.letters)} exceeds tuple length {tup.m}")
    if w.projections and max(w.projections) > spec.n:
        raise IndexOutOfRange(
            f"projection label {max(w.projections)} exceeds cluster count {spec.n}"
        )
    out = tup.matrices[w.letters[0] - 1]
    for jlab, s in zip(w.projections, w.letters[1:]):
        out = out @ spec.projections[jlab - 1] @ tup.matrices[s - 1]
    return out


def check_word_condition(
    tup: HermitianTuple,
    spec: SpectralData,
    w: WordSpec,
    k: int,
    n: int,
    seed: int = 0,
    lines: int = None,
    tol: Tolerances = DEFAULT,
) -> KPowerVerdict:
    """Perfect-power test for the pair pencil of (first generator, word).

    The word need not be Hermitian; the test is purely polynomial.
    """
    word = realize_word(tup, spec, w)
    return kth_power_test(
        [tup.matrices[0], word], k, n, lines=lines, seed=seed, tol=tol
    )


# --------------------------------------------------------------------------
# admissibility
# --------------------------------------------------------------------------


def check_admissibility(tup: HermitianTuple, k: int, tol: Tolerances = DEFAULT):
    """Each generator must show n = N/k clusters of size k, separated centers.

    This is the specialization of regular intersection with the coordinate
    lines to the single-component perfect-power premise: on the j-th
    coordinate line the spectrum is the reciprocal spectrum of the j-th
    generator, and regularity of the reduced polynomial there means n
    simple, hence separated, reduced roots.  Generators are shifted to
    invertible before inspection (a scalar shift moves the intersection
    points but not their multiplicity pattern).

    Returns ``(ok, diagnostics)``; never raises on a failing tuple.
    """
    if tup.dim % k:
        return False, {"reason": f"k={k} does not divide N={tup.dim}"}
    n = tup.dim // k
    shifted, shifts = shift_to_invertible(tup, tol=tol)
    per_gen = []
    ok = True
    for idx, a in enumerate(shifted.matrices):
        scale = norm_scale(a)
        entry = {"generator": idx + 1, "shift": shifts[idx]}
        try:
            sd = eigendecompose_clustered(a, tol=tol)
        except ClusterAmbiguity as exc:
            entry.update(ok=False, reason=f"ambiguous clustering: {exc}")
            per_gen.append(entry)
            ok = False
            continue
        centers = sd.eigenvalues
        min_sep = (
            float(np.min(np.abs(np.subtract.outer(centers, centers))[~np.eye(sd.n, dtype=bool)]))
            if sd.n > 1
            else float("inf")
        )
        gen_ok = (
            sd.n == n
            and all(mu == k for mu in sd.multiplicities)
            and min_sep >= tol.admissible_sep_rel * scale
        )
        entry.update(
            ok=gen_ok,
            clusters=[float(c) for c in centers],
            multiplicities=list(sd.multiplicities),
            min_separation=min_sep if np.isfinite(min_sep) else None,
        )
        if not gen_ok:
            entry["reason"] = (
                f"wanted {n} clusters of size {k}, got sizes {list(sd.multiplicities)}"
                if sd.n != n or any(mu != k for mu in sd.multiplicities)
                else f"cluster separation {min_sep:.3e} below threshold"
            )
            ok = False
        per_gen.append(entry)
    return ok, {"generators": per_gen, "shifts": list(shifts)}


def sample_admissible(
    tup: HermitianTuple,
    k: int,
    radius: float = None,
    seed: int = 0,
    max_tries: int = None,
    tol: Tolerances = DEFAULT,
):
    """Draw real mixing matrices ``C = I + radius * U(-1, 1)`` until the
    mixed tuple passes :func:`check_admissibility`.

    Returns ``(C, mixed_tuple)``.  Admissible mixings are dense near the
    identity, so small radii almost always succeed in a few tries.
    """
    if radius is None:
        radius = tol.admissible_radius
    if not 0.0 < radius <= 0.5:
        raise ValueError("radius must lie in (0, 0.5]")
    if max_tries is None:
        max_tries = tol.admissible_max_tries
    rng = np.random.default_rng(seed)
    m = tup.m
    for _ in range(max_tries):
        c = np.eye(m) + radius * rng.uniform(-1.0, 1.0, size=(m, m))
        if abs(np.linalg.det(c)) <= 1e-10:
            continue
        cand = apply_tuple_map(tup, c)
        ok, _ = check_admissibility(cand, k, tol=tol)
        if ok:
            return c, cand
    raise AdmissibleSamplingFailed(
        f"no admissible mixing found in {max_tries} tries at radius {radius}"
    )


# --------------------------------------------------------------------------
# aggregate analysis
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    """Aggregated verdicts; ``overall`` is "pass" exactly when the
    precondition, admissibility, the full-tuple power test and every word
    verdict hold."""

    overall: str                      # "pass" | "fail" | "precondition_violated"
    precondition_ok: bool
    admissible_ok: bool
    full_tuple: KPowerVerdict
    word_results: tuple               # ((WordSpec, KPowerVerdict), ...)
    failing_words: tuple
    n: int
    k: int
    mode: str
    seed: int
    lines: int
    shifts: tuple
    truncated: bool
    detail: str = ""
    admissibility: dict = None


def worker_count(n_tasks: int) -> int:
    """Worker pool size: CPU count capped by the PENCIL_THREADS variable."""
    cap = os.environ.get("PENCIL_THREADS")
    workers = os.cpu_count() or 1
    if cap is not None:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, min(workers, n_tasks))


def analyze(
    tup: HermitianTuple,
    k: int,
    mode: str = "all",
    seed: int = 0,
    lines: int = None,
    cap: int = None,
    tol: Tolerances = DEFAULT,
) -> ConditionReport:
    """Run the full battery and aggregate the outcome.

    Sub-seeds for the full-tuple test and every word are derived from
    ``seed`` before any dispatch, and results are assembled in enumeration
    order, so the report does not depend on the worker count.
    """
    if lines is None:
        lines = tol.lines
    if k < 1:
        raise ValueError("k must be a positive integer")
    if tup.m < 2:
        raise ValueError("need at least two generators")

    def bail(detail, precondition_ok=False, admissible_ok=False, adm=None, shifts=()):
        return ConditionReport(
            overall="precondition_violated",
            precondition_ok=precondition_ok,
            admissible_ok=admissible_ok,
            full_tuple=None,
            word_results=(),
            failing_words=(),
            n=tup.dim // k if tup.dim % k == 0 else 0,
            k=k,
            mode=mode,
            seed=seed,
            lines=lines,
            shifts=tuple(shifts),
            truncated=False,
            detail=detail,
            admissibility=adm,
        )

    if tup.dim % k:
        return bail(f"k={k} does not divide N={tup.dim}")
    n = tup.dim // k

    shifted, shifts = shift_to_invertible(tup, tol=tol)
    try:
        spec = eigendecompose_clustered(shifted.matrices[0], tol=tol)
    except ClusterAmbiguity as exc:
        return bail(f"first generator: {exc}", shifts=shifts)
    if spec.n != n or any(mu != k for mu in spec.multiplicities):
        return bail(
            f"first generator has cluster sizes {list(spec.multiplicities)}, "
            f"wanted {n} clusters of size {k}",
            shifts=shifts,
        )

    admissible_ok, adm = check_admissibility(shifted, k, tol=tol)
    if not admissible_ok:
        return bail(
            "tuple is not admissible", precondition_ok=True, adm=adm, shifts=shifts
        )

    words, truncated = enumerate_words(n, tup.m, mode=mode, cap=cap)
    master = np.random.default_rng(seed)
    sub_seeds = [int(s) for s in master.integers(0, 2**63 - 1, size=1 + len(words))]

    full_verdict = kth_power_test(
        list(shifted.matrices), k, n, lines=lines, seed=sub_seeds[0], tol=tol
    )

    def one_word(iw):
        return check_word_condition(
            shifted, spec, words[iw], k, n, seed=sub_seeds[1 + iw], lines=lines, tol=tol
        )

    workers = worker_count(len(words))
    if workers > 1 and len(words) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(one_word, range(len(words))))
    else:
        verdicts = [one_word(i) for i in range(len(words))]

    word_results = tuple(zip(words, verdicts))
    failing = tuple(w for w, v in word_results if not v.is_kth_power)
    ok = full_verdict.is_kth_power and not failing
    return ConditionReport(
        overall="pass" if ok else "fail",
        precondition_ok=True,
        admissible_ok=True,
        full_tuple=full_verdict,
        word_results=word_results,
        failing_words=failing,
        n=n,
        k=k,
        mode=mode,
        seed=seed,
        lines=lines,
        shifts=shifts,
        truncated=truncated,
        detail="" if ok else (full_verdict.failure_reason or f"{len(failing)} failing words"),
        admissibility=adm,
    )


# --------------------------------------------------------------------------
# local identities
# --------------------------------------------------------------------------


def verify_first_order_identity(
    tup: HermitianTuple,
    spec: SpectralData,
    i: int,
    l: int,
    tol: Tolerances = DEFAULT,
) -> float:
    """Residual of the compression identity on one cluster.

    The compression of generator ``l`` (label in {2..m}) to the range of the
    i-th projection must be the scalar ``c = -lambda_i * d(branch)/dx``
    where the branch through ``1/lambda_i`` of the pair pencil is tracked
    numerically.  Returns ``||P_i A_l P_i - c P_i||_F``.
    """
    if not 2 <= l <= tup.m:
        raise IndexOutOfRange(f"generator label {l} out of range 2..{tup.m}")
    if not 0 <= i < spec.n:
        raise IndexOutOfRange(f"cluster index {i} out of range")
    a1 = tup.matrices[0]
    al = tup.matrices[l - 1]
    slope = branch_derivative([a1, al], spec, i, tol=tol)
    c = -float(spec.eigenvalues[i]) * slope
    p = spec.projections[i]
    return float(np.linalg.norm(p @ al @ p - c * p))


def verify_cycle_identity(bs, cycle, tol: Tolerances = DEFAULT):
    """Check one cycle of block unitaries for unimodular-scalar defect.

    ``bs`` is a :class:`~pencilspec.decomposer.BlockStructure`; ``cycle``
    is a sequence of distinct 0-based cluster indices.  Returns
    ``(theta, residual)`` where ``theta`` is the least-squares phase
    (argument of the normalized trace) and ``residual`` the Frobenius
    distance of the cycle product from ``exp(i theta) I``.
    """
    cyc = tuple(int(j) for j in cycle)
    if len(set(cyc)) != len(cyc) or not cyc:
        raise ValueError("cycle must be a non-empty tuple of distinct indices")
    k = bs.k
    prod = np.eye(k, dtype=np.complex128)
    for a, b in zip(cyc, cyc[1:] + cyc[:1]):
        if a == b:
            continue
        if (a, b) not in bs.pairs:
            raise ZeroCoefficientOnCycle(
                f"pair of clusters ({a + 1}, {b + 1}) carries no nonzero block"
            )
        prod = prod @ bs.u[(a, b)]
    tr = complex(np.trace(prod)) / k
    theta = float(np.angle(tr)) if tr != 0 else 0.0
    residual = float(np.linalg.norm(prod - np.exp(1j * theta) * np.eye(k)))
    return theta, residual
