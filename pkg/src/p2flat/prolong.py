"""Prolonged systems, bracket towers and the minimal-order search.

A pure prolongation of order ``j = (j_1, ..., j_m)`` adds each input
channel and its derivatives up to order ``j_i - 1`` as new states and
takes ``u_i^(j_i)`` as the new controls.  On the extended chart that
also carries the current controls as coordinates, the drift is

    g0 = sum_i u_i^(0) g_i + sum_i sum_{p < j_i} u_i^(p+1) d/du_i^(p)

and the analysis runs over two towers of distributions:

    Delta_k = { ad_g0^(l - j_p) d/du_p^(0) : l = j_p..k, p = 1..m }
    Gamma_k = { d/du_i^(j_i - r) : r = 0..min(k, j_i - 1), j_i >= 1 }

The prolonged system linearises by static feedback iff every Delta_k is
involutive of locally constant rank, bracketing with Gamma_k stays
inside Delta_k, and rank Delta_k reaches n + m at some k* <= n + |j|.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .expr import INPUT_JET, Chart, Expr
from .geometry import (
    Distribution,
    InvolutivityReport,
    RankReport,
    SampleSet,
    SingularityDetected,
    VectorField,
    is_involutive,
    lie_bracket,
    pointwise_rank,
)
from ._span import PointSpan
from .result import ClassificationResult, Verdict
from .system import ControlSystem

__all__ = [
    "ProlongationOrder",
    "ProlongedSystem",
    "TowerLevel",
    "P2Report",
    "build_prolonged",
    "tower_level",
    "check_p2_conditions",
    "search_minimal_prolongation",
    "jet_name",
]


def jet_name(i: int, p: int) -> str:
    """Chart spelling of the p-th derivative of input channel i (1-based)."""
    return f"u{i}_{p}"


@dataclass(frozen=True)
class ProlongationOrder:
    """Multi-index of per-input prolongation orders.

    At least one entry is zero; prolonging every channel is never
    needed because a common integrator can be absorbed.
    """

    orders: tuple

    def __post_init__(self):
        orders = tuple(int(v) for v in self.orders)
        if not orders:
            raise ValueError("empty order vector")
        if any(v < 0 for v in orders):
            raise ValueError("orders must be natural numbers")
        if min(orders) != 0:
            raise ValueError("at least one input must stay unprolonged")
        object.__setattr__(self, "orders", orders)

    @property
    def total(self) -> int:
        return sum(self.orders)

    def __iter__(self):
        return iter(self.orders)

    def __getitem__(self, k):
        return self.orders[k]

    def __len__(self):
        return len(self.orders)


class ProlongedSystem:
    """A control system together with a pure prolongation of its inputs.

    Lives on the chart ``(x, u_i^(p) for p = 0..j_i)``; the top-order
    jets are the controls of the prolonged system.  Iterated brackets
    of the drift with the base input directions are cached since every
    tower level reuses the lower ones.
    """

    def __init__(self, base: ControlSystem, order: ProlongationOrder):
        if len(order) != base.m:
            raise ValueError("one prolongation order per input channel required")
        if not base.is_driftless():
            raise ValueError("pure prolongation applies to driftless systems")
        self.base = base
        self.order = order
        jets = []
        roles = []
        for i in range(1, base.m + 1):
            for p in range(order[i - 1] + 1):
                jets.append(jet_name(i, p))
                roles.append(INPUT_JET)
        self.chart = base.chart.extended(jets, roles)
        self._embedded = tuple(g.on_chart(self.chart) for g in base.fields)
        self.drift = self._build_drift()
        self.inputs = tuple(
            VectorField.basis(self.chart, jet_name(i, order[i - 1]))
            for i in range(1, base.m + 1)
        )
        self._chains: list = [None] * base.m

    def _build_drift(self) -> VectorField:
        chart = self.chart
        acc = VectorField.zero(chart)
        for i, g in enumerate(self._embedded, start=1):
            u0 = Expr.var(chart, jet_name(i, 0))
            acc = acc + g.scaled(u0)
        for i in range(1, self.base.m + 1):
            for p in range(self.order[i - 1]):
                coeff = Expr.var(chart, jet_name(i, p + 1))
                acc = acc + VectorField.basis(chart, jet_name(i, p)).scaled(coeff)
        return acc.simplified()

    @property
    def n_plus_m(self) -> int:
        return self.base.n + self.base.m

    def chain(self, p: int, upto: int) -> list:
        """ad powers of the drift on d/du_p^(0), orders 0..upto."""
        cached = self._chains[p - 1]
        if cached is None:
            cached = [VectorField.basis(self.chart, jet_name(p, 0))]
            self._chains[p - 1] = cached
        while len(cached) <= upto:
            cached.append(lie_bracket(self.drift, cached[-1]))
        return cached[: upto + 1]

    def delta_generators(self, k: int) -> list:
        gens = []
        for p in range(1, self.base.m + 1):
            jp = self.order[p - 1]
            if k < jp:
                continue
            gens.extend(self.chain(p, k - jp))
        return gens

    def gamma_generators(self, k: int) -> list:
        gens = []
        for i in range(1, self.base.m + 1):
            ji = self.order[i - 1]
            if ji == 0:
                continue
            for r in range(min(k, ji - 1) + 1):
                gens.append(VectorField.basis(self.chart, jet_name(i, ji - r)))
        return gens

    def to_affine(self) -> ControlSystem:
        """The prolonged dynamics as an affine system on its true state
        space (top-order jets become the controls, not coordinates)."""
        base = self.base
        names = list(base.chart.names)
        roles = list(base.chart.roles)
        for i in range(1, base.m + 1):
            for p in range(self.order[i - 1]):
                names.append(jet_name(i, p))
                roles.append(INPUT_JET)
        chart = Chart(tuple(names), tuple(roles))
        drift = VectorField.zero(chart)
        for i in range(1, base.m + 1):
            ji = self.order[i - 1]
            g = base.fields[i - 1].on_chart(chart)
            if ji >= 1:
                drift = drift + g.scaled(Expr.var(chart, jet_name(i, 0)))
            for p in range(ji - 1):
                drift = drift + VectorField.basis(chart, jet_name(i, p)).scaled(
                    Expr.var(chart, jet_name(i, p + 1))
                )
        inputs = []
        for i in range(1, base.m + 1):
            ji = self.order[i - 1]
            if ji == 0:
                inputs.append(base.fields[i - 1].on_chart(chart))
            else:
                inputs.append(VectorField.basis(chart, jet_name(i, ji - 1)))
        drift = drift.simplified()
        if drift.is_zero():
            drift = None
        return ControlSystem(chart, tuple(inputs), drift, name=f"{base.name}-prolonged")

    def __repr__(self):
        return f"ProlongedSystem(order={self.order.orders}, chart_dim={self.chart.dimension})"


def build_prolonged(sys: ControlSystem, j) -> ProlongedSystem:
    """Construct the prolonged system of order ``j``."""
    order = j if isinstance(j, ProlongationOrder) else ProlongationOrder(tuple(j))
    return ProlongedSystem(sys, order)


@dataclass
class TowerLevel:
    k: int
    delta: Distribution
    gamma: Distribution
    delta_rank: RankReport
    gamma_rank: int
    g_rank: RankReport
    involutivity: InvolutivityReport
    gamma_invariant: bool
    gamma_witness: Optional[tuple] = None  # (gamma_idx, delta_idx, sample)


def _membership_all(
    candidates: Sequence[VectorField],
    base_fields: Sequence[VectorField],
    S: SampleSet,
) -> Optional[tuple]:
    """First candidate leaving span(base_fields) at some sample, or None."""
    live = [(idx, f) for idx, f in enumerate(candidates) if not f.is_zero()]
    if not live:
        return None

    def compute(slot):
        rows, exact = S.matrix(base_fields, slot)
        cand_rows = [(idx, S.field_row(f, slot)) for idx, f in live]
        use_exact = exact and all(s.exact for _, row in cand_rows for s in row)
        span = PointSpan(use_exact, S.chart.dimension, S.tol)
        for row in rows:
            span.insert([s.value for s in row] if use_exact else [s.as_float() for s in row])
        for idx, row in cand_rows:
            vec = [s.value for s in row] if use_exact else [s.as_float() for s in row]
            if not span.contains(vec):
                return idx
        return None

    for slot, res in enumerate(S.for_each_slot(compute)):
        if res is not None:
            return (res, slot)
    return None


def tower_level(ps: ProlongedSystem, k: int, S: SampleSet) -> TowerLevel:
    """Build and measure Delta_k and Gamma_k over samples lifted to the
    prolonged chart (jet coordinates are sampled like states)."""
    if k < 0:
        raise ValueError("k must be a natural number")
    if S.chart != ps.chart:
        S = S.lift(ps.chart)
    delta = Distribution(ps.chart, ps.delta_generators(k))
    gamma = Distribution(ps.chart, ps.gamma_generators(k))

    rank_rep = pointwise_rank(delta, S)
    if not rank_rep.constant:
        raise SingularityDetected(
            f"Delta_{k} has non-constant rank {rank_rep.ranks} across samples",
            rank_rep.ranks,
        )
    inv_rep = is_involutive(delta, S)

    brackets = []
    for gi, gfield in enumerate(gamma.generators):
        for di, dfield in enumerate(delta.generators):
            b = lie_bracket(gfield, dfield)
            if not b.is_zero():
                brackets.append(((gi, di), b))
    witness = None
    if brackets:
        res = _membership_all([b for _, b in brackets], delta.generators, S)
        if res is not None:
            which, slot = res
            witness = (*brackets[which][0], slot)

    g_rank = pointwise_rank(
        Distribution(ps.chart, tuple(gamma.generators) + tuple(delta.generators)), S
    )
    return TowerLevel(
        k=k,
        delta=delta,
        gamma=gamma,
        delta_rank=rank_rep,
        gamma_rank=len(gamma.generators),
        g_rank=g_rank,
        involutivity=inv_rep,
        gamma_invariant=witness is None,
        gamma_witness=witness,
    )


@dataclass
class P2Report:
    """Level-by-level evidence for one prolongation order."""

    order: ProlongationOrder
    passed: bool
    k_star: Optional[int]
    levels: list
    n_plus_m: int
    failure: Optional[dict] = None
    seed: Optional[int] = None

    def rank_table(self) -> dict:
        return {
            lvl.k: {
                "delta_rank": lvl.delta_rank.max_rank,
                "gamma_rank": lvl.gamma_rank,
                "g_rank": lvl.g_rank.max_rank,
                "involutive": lvl.involutivity.involutive,
                "gamma_invariant": lvl.gamma_invariant,
            }
            for lvl in self.levels
        }


def check_p2_conditions(
    sys: ControlSystem,
    j,
    S: SampleSet,
    k_max: Optional[int] = None,
) -> P2Report:
    """Run the three tower conditions for a fixed prolongation order.

    Levels are computed incrementally; the first violated condition
    stops the scan.  Once rank Delta_k reaches n + m the span is the
    whole of the x and u^(0) directions, where all later generators
    live, so higher levels cannot break conditions that held below.
    """
    ps = build_prolonged(sys, j)
    order = ps.order
    bound = sys.n + order.total
    if k_max is None:
        k_max = bound
    elif k_max < bound:
        raise ValueError(f"k_max must be at least n + |j| = {bound}")
    S_lift = S.lift(ps.chart)
    levels = []
    for k in range(k_max + 1):
        lvl = tower_level(ps, k, S_lift)
        levels.append(lvl)
        if not lvl.involutivity.involutive:
            return P2Report(
                order,
                False,
                None,
                levels,
                ps.n_plus_m,
                failure={
                    "condition": "i",
                    "k": k,
                    "witness": lvl.involutivity.witness,
                },
                seed=S.seed,
            )
        if not lvl.gamma_invariant:
            return P2Report(
                order,
                False,
                None,
                levels,
                ps.n_plus_m,
                failure={"condition": "ii", "k": k, "witness": lvl.gamma_witness},
                seed=S.seed,
            )
        if lvl.delta_rank.max_rank == ps.n_plus_m:
            return P2Report(order, True, k, levels, ps.n_plus_m, seed=S.seed)
    return P2Report(
        order,
        False,
        None,
        levels,
        ps.n_plus_m,
        failure={
            "condition": "iii",
            "k": k_max,
            "witness": {"max_rank": levels[-1].delta_rank.max_rank},
        },
        seed=S.seed,
    )


def _patterns(m: int, total: int):
    """Nondecreasing order vectors with leading zero, lexicographic."""

    def rec(slots, minimum, left):
        if slots == 0:
            if left == 0:
                yield ()
            return
        for v in range(minimum, left + 1):
            for rest in rec(slots - 1, v, left - v):
                yield (v,) + rest

    for tail in rec(m - 1, 0, total):
        yield (0,) + tail


def _assignments(pattern):
    """Distinct input assignments of a sorted pattern, higher orders on
    earlier inputs first."""
    return sorted(set(itertools.permutations(pattern)), reverse=True)


def search_minimal_prolongation(
    sys: ControlSystem,
    S: SampleSet,
    max_total: Optional[int] = None,
) -> ClassificationResult:
    """Exhaustive minimal-prolongation search.

    Candidate orders keep one channel unprolonged and are visited in
    increasing (total, lexicographic-sorted-pattern) order, so the
    first success is minimal; within a tied pattern, prolonging
    earlier-numbered inputs is preferred.  Exhaustion up to
    ``max_total`` (default 2n) yields INCONCLUSIVE, not a proof of
    non-flatness.
    """
    if not sys.is_driftless():
        raise ValueError("the prolongation search applies to driftless systems")
    if max_total is None:
        max_total = 2 * sys.n
    trace = []
    tried = None
    try:
        for total in range(max_total + 1):
            for pattern in _patterns(sys.m, total):
                for j in _assignments(pattern):
                    tried = j
                    rep = check_p2_conditions(sys, j, S)
                    trace.append(
                        {
                            "order": list(j),
                            "passed": rep.passed,
                            "failure": rep.failure,
                            "ranks": rep.rank_table(),
                        }
                    )
                    if rep.passed:
                        perm = tuple(sorted(range(sys.m), key=lambda i: (j[i], i)))
                        return ClassificationResult(
                            verdict=Verdict.P2_FLAT,
                            theorem="prolongation-tower-search",
                            case=None,
                            minimal_j=tuple(j),
                            permutation=perm,
                            evidence={"trace": trace, "k_star": rep.k_star},
                            seed=S.seed,
                            details=rep,
                        )
    except SingularityDetected as exc:
        exc.partial_trace = {"trace": trace, "aborted_at": list(tried) if tried else None}
        raise
    return ClassificationResult(
        verdict=Verdict.INCONCLUSIVE,
        theorem="prolongation-tower-search",
        case=None,
        minimal_j=None,
        permutation=None,
        evidence={"trace": trace},
        seed=S.seed,
        reason=f"no pure prolongation with total order <= {max_total} linearises the system",
    )
