"""Fast-path classifiers built from rank and involutivity conditions.

Each checker measures a small family of bracket-augmented input
distributions and maps the outcome to a verdict.  Checkers whose
conditions are necessary as well as sufficient may return NOT_P2_FLAT;
the sufficient-only m-input checker degrades to INCONCLUSIVE, and the
exhaustive tower search (:mod:`p2flat.prolong`) is always available as
an independent cross-check.
"""

from __future__ import annotations

import itertools
from typing import Optional, Sequence

from .geometry import (
    Distribution,
    SampleSet,
    VectorField,
    is_involutive,
    largest_involutive_input_sub,
    lie_bracket,
    pointwise_rank,
    spans_member,
    SingularityDetected,
)
from .result import ClassificationResult, Verdict
from .system import ControlSystem

__all__ = [
    "check_static_feedback_linearizable",
    "check_mr_flatness",
    "classify_two_input",
    "classify_3_inputs_6_states",
    "classify_3_inputs_5_states",
    "classify_m_inputs",
]


def _require_constant_rank(D: Distribution, S: SampleSet, label: str):
    rep = pointwise_rank(D, S)
    if not rep.constant:
        raise SingularityDetected(f"{label} has non-constant rank {rep.ranks}", rep.ranks)
    return rep


def _dist(chart, fields) -> Distribution:
    return Distribution(chart, tuple(fields))


# ---------------------------------------------------------------------------
# static feedback linearizability


def check_static_feedback_linearizable(sys: ControlSystem, S: SampleSet) -> ClassificationResult:
    """Tower test for exact linearization by state feedback alone.

    Builds D_i spanned by all drift-brackets of the inputs up to order
    i; the system linearises iff every level is involutive of constant
    rank and some level reaches full rank.
    """
    if sys.m >= sys.n:
        raise ValueError("requires fewer inputs than states")
    chart = sys.chart
    drift = sys.drift if sys.drift is not None else VectorField.zero(chart)
    gens = list(sys.fields)
    level = list(sys.fields)
    evidence = {}
    for i in range(sys.n):
        D = _dist(chart, gens)
        rep = _require_constant_rank(D, S, f"D_{i}")
        if rep.max_rank == sys.n:
            evidence[f"D_{i}"] = {"rank": rep.max_rank, "involutive": True}
            return ClassificationResult(
                Verdict.STATIC_LINEARIZABLE,
                theorem="static-feedback-tower",
                evidence=evidence,
                seed=S.seed,
                reason=f"D_{i} reaches full rank {sys.n}",
            )
        inv = is_involutive(D, S)
        evidence[f"D_{i}"] = {"rank": rep.max_rank, "involutive": inv.involutive}
        if not inv.involutive:
            return ClassificationResult(
                Verdict.NOT_STATIC_LINEARIZABLE,
                theorem="static-feedback-tower",
                evidence=evidence,
                seed=S.seed,
                reason=f"D_{i} is not involutive (witness generators {inv.witness[:2]})",
            )
        level = [lie_bracket(drift, g) for g in level]
        gens = gens + level
    return ClassificationResult(
        Verdict.NOT_STATIC_LINEARIZABLE,
        theorem="static-feedback-tower",
        evidence=evidence,
        seed=S.seed,
        reason=f"rank never reaches {sys.n}",
    )


# ---------------------------------------------------------------------------
# bracket-growth flatness test


def check_mr_flatness(sys: ControlSystem, S: SampleSet) -> ClassificationResult:
    """Rank-growth test on D_{i+1} = D_i + [D_i, D_i].

    Flatness requires ranks m, m+1, m+2, ... up to n.  For two inputs
    this is an exact characterisation; for more inputs success is only
    sufficient, so failure is INCONCLUSIVE there.
    """
    if not sys.is_driftless():
        raise ValueError("requires a driftless system")
    if not (2 <= sys.m < sys.n):
        raise ValueError("requires 2 <= m < n")
    chart = sys.chart
    gens = list(sys.fields)
    ranks = []
    ok = True
    i = 0
    while True:
        rep = _require_constant_rank(_dist(chart, gens), S, f"D_{i}")
        ranks.append(rep.max_rank)
        if rep.max_rank != min(sys.m + i, sys.n):
            ok = False
            break
        if rep.max_rank == sys.n:
            break
        new = []
        current = gens[:]
        for a, b in itertools.combinations(range(len(gens)), 2):
            br = lie_bracket(gens[a], gens[b])
            if br.is_zero():
                continue
            if not spans_member(br, _dist(chart, current), S):
                new.append(br)
                current.append(br)
        if not new:
            ok = False
            ranks.append(rep.max_rank)
            break
        gens = current
        i += 1
    evidence = {"ranks": ranks, "expected": [min(sys.m + k, sys.n) for k in range(len(ranks))]}
    exact_for_two = sys.m == 2
    if ok:
        return ClassificationResult(
            Verdict.FLAT_SUFFICIENT,
            theorem="bracket-growth-flatness",
            case="necessary-and-sufficient" if exact_for_two else "sufficient-only",
            evidence=evidence,
            seed=S.seed,
            reason="ranks grow by one per bracket level up to full rank",
        )
    if exact_for_two:
        return ClassificationResult(
            Verdict.NOT_FLAT,
            theorem="bracket-growth-flatness",
            case="necessary-and-sufficient",
            evidence=evidence,
            seed=S.seed,
            reason=f"rank sequence {ranks} breaks the +1 growth pattern",
        )
    return ClassificationResult(
        Verdict.INCONCLUSIVE,
        theorem="bracket-growth-flatness",
        case="sufficient-only",
        evidence=evidence,
        seed=S.seed,
        reason=f"rank sequence {ranks} breaks the +1 growth pattern",
    )


# ---------------------------------------------------------------------------
# two inputs


def classify_two_input(sys: ControlSystem, S: SampleSet) -> ClassificationResult:
    """Exact prolongation-flatness test for two-input driftless systems.

    In one of the two input orderings (a, b), the repeated brackets
    ad_b^k a must satisfy a second-order bracket confinement for
    k = 1..n-3 and together with b span the whole tangent space.
    """
    if sys.m != 2 or sys.n < 3 or not sys.is_driftless():
        raise ValueError("requires a driftless system with two inputs and n >= 3")
    chart = sys.chart
    evidence = {}
    for a_idx, b_idx in ((0, 1), (1, 0)):
        a, b = sys.fields[a_idx], sys.fields[b_idx]
        tag = f"ordering (g{a_idx + 1}, g{b_idx + 1})"
        chain = [a]
        for _ in range(sys.n - 2):
            chain.append(lie_bracket(b, chain[-1]))
        confined = True
        for k in range(1, sys.n - 2):
            x = chain[k]
            t = lie_bracket(x, lie_bracket(x, b))
            if t.is_zero():
                continue
            if not spans_member(t, _dist(chart, chain[: k + 1]), S):
                confined = False
                evidence[tag] = {"confinement_fails_at": k}
                break
        if not confined:
            continue
        full = _dist(chart, chain + [b])
        rep = _require_constant_rank(full, S, "bracket chain")
        evidence[tag] = {"chain_rank": rep.max_rank, "confined": True}
        if rep.max_rank == sys.n:
            return ClassificationResult(
                Verdict.P2_FLAT,
                theorem="two-input-prolongation-criterion",
                permutation=(a_idx, b_idx),
                evidence=evidence,
                seed=S.seed,
                reason=f"{tag}: bracket chain spans all {sys.n} directions",
            )
    return ClassificationResult(
        Verdict.NOT_P2_FLAT,
        theorem="two-input-prolongation-criterion",
        evidence=evidence,
        seed=S.seed,
        reason="both input orderings fail the chain conditions",
    )


# ---------------------------------------------------------------------------
# three inputs, shared distribution builders


def _role_fields(sys: ControlSystem, perm: Sequence[int]):
    return [sys.fields[p] for p in perm]


def _g_label(perm, role: int) -> str:
    return f"g{perm[role] + 1}"


def _measure(D, S, label, evidence, want_involutive=True):
    rep = _require_constant_rank(D, S, label)
    entry = {"rank": rep.max_rank}
    if want_involutive:
        entry["involutive"] = is_involutive(D, S).involutive
    evidence[label] = entry
    return entry


def _orig_j(perm, role_j) -> tuple:
    out = [0] * len(perm)
    for role, orig in enumerate(perm):
        out[orig] = role_j[role]
    return tuple(out)


def classify_3_inputs_6_states(sys: ControlSystem, S: SampleSet) -> ClassificationResult:
    """Six-state, three-input prolongation-flatness dichotomy.

    With the involutive pair (h1, h2) first: flat by prolongation iff
    {h1, h2, [h3,h1], [h3,h2]} is involutive of rank 4, with minimal
    order (0,0,2).  With only a single involutive direction: flat iff
    {h1, h2, [h2,h1], [h3,h1]} is involutive of rank 3 and the
    second-order tower has full rank 6, with minimal order (0,1,2).
    """
    return _classify_three_inputs(sys, S, n_expected=6)


def classify_3_inputs_5_states(sys: ControlSystem, S: SampleSet) -> ClassificationResult:
    """Five-state, three-input analogue of the six-state dichotomy.

    Pair case: rank {h1,h2,h3,[h3,h1],[h3,h2]} = 5 alone decides, with
    minimal order (0,0,1).  Single case: as in six states but with the
    second-order tower of rank 5, minimal order (0,1,2).
    """
    return _classify_three_inputs(sys, S, n_expected=5)


def _classify_three_inputs(sys: ControlSystem, S: SampleSet, n_expected: int) -> ClassificationResult:
    if sys.m != 3 or sys.n != n_expected or not sys.is_driftless():
        raise ValueError(f"requires a driftless system with 3 inputs and {n_expected} states")
    theorem = (
        "three-input-six-state-criterion"
        if n_expected == 6
        else "three-input-five-state-criterion"
    )
    case = largest_involutive_input_sub(sys.fields, S)
    if case.kind == "full-involutive":
        return ClassificationResult(
            Verdict.INCONCLUSIVE,
            theorem=theorem,
            case="full-involutive",
            evidence={},
            seed=S.seed,
            reason="the input span is involutive, outside this dichotomy",
        )
    chart = sys.chart
    if case.kind == "pair":
        perm = case.permutation
        g1, g2, g3 = _role_fields(sys, perm)
        evidence = {"detected": f"involutive pair {{{_g_label(perm,0)}, {_g_label(perm,1)}}}"}
        b31 = lie_bracket(g3, g1)
        b32 = lie_bracket(g3, g2)
        if n_expected == 6:
            lbl = (
                f"{{{_g_label(perm,0)}, {_g_label(perm,1)}, "
                f"[{_g_label(perm,2)},{_g_label(perm,0)}], [{_g_label(perm,2)},{_g_label(perm,1)}]}}"
            )
            entry = _measure(_dist(chart, (g1, g2, b31, b32)), S, lbl, evidence)
            passed = entry["involutive"] and entry["rank"] == 4
            role_j = (0, 0, 2)
            pde = [
                {"outputs": 2, "annihilates": Distribution(chart, (g1, g2, b31, b32)), "description": lbl},
                {
                    "outputs": 1,
                    "annihilates": Distribution(chart, (g1, g2)),
                    "description": f"{{{_g_label(perm,0)}, {_g_label(perm,1)}}}",
                },
            ]
        else:
            lbl = (
                f"{{{_g_label(perm,0)}, {_g_label(perm,1)}, {_g_label(perm,2)}, "
                f"[{_g_label(perm,2)},{_g_label(perm,0)}], [{_g_label(perm,2)},{_g_label(perm,1)}]}}"
            )
            entry = _measure(_dist(chart, (g1, g2, g3, b31, b32)), S, lbl, evidence, want_involutive=False)
            passed = entry["rank"] == 5
            role_j = (0, 0, 1)
            pde = [
                {
                    "outputs": 3,
                    "annihilates": Distribution(chart, (g1, g2)),
                    "description": f"{{{_g_label(perm,0)}, {_g_label(perm,1)}}}",
                }
            ]
        if passed:
            return ClassificationResult(
                Verdict.P2_FLAT,
                theorem=theorem,
                case="pair",
                minimal_j=_orig_j(perm, role_j),
                permutation=perm,
                evidence=evidence,
                seed=S.seed,
                details={"pde_data": pde},
            )
        return ClassificationResult(
            Verdict.NOT_P2_FLAT,
            theorem=theorem,
            case="pair",
            permutation=perm,
            evidence=evidence,
            seed=S.seed,
            reason="pair-case rank/involutivity conditions fail",
        )

    # single involutive direction: the conditions single out both which
    # input is doubly prolonged and which stays unprolonged, so every
    # role assignment is tried.
    evidence = {"detected": "no involutive input pair"}
    target_h23 = n_expected
    last_perm = None
    for perm in itertools.permutations(range(3)):
        last_perm = perm
        g1, g2, g3 = _role_fields(sys, perm)
        b21 = lie_bracket(g2, g1)
        b31 = lie_bracket(g3, g1)
        b32 = lie_bracket(g3, g2)
        b331 = lie_bracket(g3, b31)
        b332 = lie_bracket(g3, b32)
        lblp = (
            f"{{{_g_label(perm,0)}, {_g_label(perm,1)}, "
            f"[{_g_label(perm,1)},{_g_label(perm,0)}], [{_g_label(perm,2)},{_g_label(perm,0)}]}}"
        )
        hp = _dist(chart, (g1, g2, b21, b31))
        entry = _measure(hp, S, lblp, evidence)
        if not (entry["involutive"] and entry["rank"] == 3):
            continue
        lbl23 = (
            f"{{{_g_label(perm,0)}, {_g_label(perm,1)}, {_g_label(perm,2)}, "
            f"[{_g_label(perm,1)},{_g_label(perm,0)}], [{_g_label(perm,2)},{_g_label(perm,1)}], "
            f"[{_g_label(perm,2)},[{_g_label(perm,2)},{_g_label(perm,0)}]], "
            f"[{_g_label(perm,2)},[{_g_label(perm,2)},{_g_label(perm,1)}]]}}"
        )
        h23 = _dist(chart, (g1, g2, g3, b21, b32, b331, b332))
        entry23 = _measure(h23, S, lbl23, evidence, want_involutive=False)
        if entry23["rank"] != target_h23:
            continue
        pde = [{"outputs": 2, "annihilates": hp, "description": lblp}]
        if n_expected == 5:
            pde.append(
                {
                    "outputs": 1,
                    "annihilates": Distribution(chart, (g1,)),
                    "description": f"{{{_g_label(perm,0)}}} (third output also free of the"
                    " unprolonged and once-prolonged controls)",
                }
            )
        return ClassificationResult(
            Verdict.P2_FLAT,
            theorem=theorem,
            case="single",
            minimal_j=_orig_j(perm, (0, 1, 2)),
            permutation=perm,
            evidence=evidence,
            seed=S.seed,
            details={"pde_data": pde},
        )
    return ClassificationResult(
        Verdict.NOT_P2_FLAT,
        theorem=theorem,
        case="single",
        permutation=last_perm,
        evidence=evidence,
        seed=S.seed,
        reason="single-case conditions fail for every input permutation",
    )


# ---------------------------------------------------------------------------
# m inputs, 2m or 2m-1 states (sufficient only)


def classify_m_inputs(sys: ControlSystem, S: SampleSet) -> ClassificationResult:
    """Sufficient prolongation-flatness test for m inputs and 2m or
    2m-1 states.

    One input is singled out for prolongation (every choice is tried);
    the remaining m-1 inputs must span an involutive distribution, and
    the brackets of the prolonged input against them must fill the
    state space at first or second order.  Failure is INCONCLUSIVE.
    """
    if sys.m < 3 or not sys.is_driftless():
        raise ValueError("requires a driftless system with at least 3 inputs")
    if sys.n not in (2 * sys.m - 1, 2 * sys.m):
        raise ValueError("requires n = 2m-1 or n = 2m states")
    chart = sys.chart
    m, n = sys.m, sys.n
    evidence = {}
    for last in range(m):
        perm = tuple([i for i in range(m) if i != last] + [last])
        fields = _role_fields(sys, perm)
        head, gm = fields[:-1], fields[-1]
        lbl_head = "{" + ", ".join(_g_label(perm, r) for r in range(m - 1)) + "}"
        entry_head = _measure(_dist(chart, head), S, lbl_head, evidence)
        if not entry_head["involutive"]:
            continue
        brackets = [lie_bracket(gm, g) for g in head]
        if n == 2 * m - 1:
            lbl = (
                "{" + ", ".join(_g_label(perm, r) for r in range(m)) + ", "
                + ", ".join(f"[{_g_label(perm, m - 1)},{_g_label(perm, r)}]" for r in range(m - 1))
                + "}"
            )
            entry = _measure(_dist(chart, fields + brackets), S, lbl, evidence, want_involutive=False)
            if entry["rank"] != n:
                continue
            role_j = tuple([0] * (m - 1) + [1])
            pde = [{"outputs": m, "annihilates": _dist(chart, head), "description": lbl_head}]
        else:
            lbl12 = (
                "{" + ", ".join(_g_label(perm, r) for r in range(m - 1)) + ", "
                + ", ".join(f"[{_g_label(perm, m - 1)},{_g_label(perm, r)}]" for r in range(m - 1))
                + "}"
            )
            h12 = _dist(chart, head + brackets)
            entry12 = _measure(h12, S, lbl12, evidence)
            if not (entry12["involutive"] and entry12["rank"] == 2 * m - 2):
                continue
            second = [lie_bracket(gm, b) for b in brackets]
            lbl23 = lbl12[:-1] + ", second-order brackets}"
            entry23 = _measure(
                _dist(chart, fields + brackets + second), S, lbl23, evidence, want_involutive=False
            )
            if entry23["rank"] != n:
                continue
            role_j = tuple([0] * (m - 1) + [2])
            pde = [
                {"outputs": 2, "annihilates": h12, "description": lbl12},
                {"outputs": m - 2, "annihilates": _dist(chart, head), "description": lbl_head},
            ]
        return ClassificationResult(
            Verdict.P2_FLAT,
            theorem="m-input-prolongation-criterion",
            case=f"n=2m-1" if n == 2 * m - 1 else "n=2m",
            minimal_j=_orig_j(perm, role_j),
            permutation=perm,
            evidence=evidence,
            seed=S.seed,
            details={"pde_data": pde},
        )
    return ClassificationResult(
        Verdict.INCONCLUSIVE,
        theorem="m-input-prolongation-criterion",
        evidence=evidence,
        seed=S.seed,
        reason="sufficient conditions fail for every choice of prolonged input",
    )
