"""Controllability indices, flat-output PDE data and verification.

The flat outputs of a prolongation-linearizable system solve the
annihilation ladder

    < G_k, dy_i > = 0   for k = 0..kappa_i - 2,
    < G_{kappa_i - 1}, dy_i > != 0,

where G_k is the direct sum of the control-jet directions Gamma_k and
the bracket tower Delta_k, and kappa are the controllability indices
counted from the rank jumps of G_k.  This module computes the indices,
emits annihilator one-forms (and first integrals when the forms are
closed with polynomial potentials), and verifies candidate flat
outputs and flat parametrizations symbolically and numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import sympy as sp

from .expr import (
    Chart,
    Expr,
    STATE,
    differentiate,
    parse_expr,
    simplify,
    to_text,
)
from .geometry import (
    Distribution,
    SampleSet,
    SingularityDetected,
    VectorField,
    is_zero_expr,
    pointwise_rank,
)
from ._span import PointSpan
from .prolong import ProlongedSystem, build_prolonged, check_p2_conditions, tower_level
from .system import ControlSystem

__all__ = [
    "OneForm",
    "BrunovskyIndices",
    "FlatOutputCandidate",
    "ParametrizationSpec",
    "TrajectoryConfig",
    "NotProlongationFlatError",
    "DegenerateCandidateError",
    "differential",
    "annihilator_basis",
    "first_integrals",
    "brunovsky_indices",
    "lie_derivative",
    "verify_flat_outputs",
    "verify_parametrization",
    "yjet_name",
]


class NotProlongationFlatError(Exception):
    """Raised when an operation requires a passing prolongation order."""


class DegenerateCandidateError(Exception):
    """Candidate flat outputs with dependent differentials."""


class OneForm:
    """A one-form on a chart; pairing with a vector field is the
    coefficientwise dot product."""

    __slots__ = ("chart", "coefficients")

    def __init__(self, chart: Chart, coefficients: Sequence[Expr]):
        coefficients = tuple(coefficients)
        if len(coefficients) != chart.dimension:
            raise ValueError("one coefficient per chart symbol required")
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "coefficients", coefficients)

    def __setattr__(self, *args):
        raise AttributeError("OneForm is immutable")

    def pair(self, v: VectorField) -> Expr:
        if v.chart != self.chart:
            raise ValueError("chart mismatch")
        acc = Expr.zero(self.chart)
        for c, comp in zip(self.coefficients, v.components):
            if c.sym != 0 and comp.sym != 0:
                acc = acc + c * comp
        return simplify(acc)

    def __repr__(self):
        parts = [
            f"({to_text(c)})*d{n}"
            for c, n in zip(self.coefficients, self.chart.names)
            if c.sym != 0
        ]
        return " + ".join(parts) if parts else "0"


def differential(y: Expr) -> OneForm:
    """dy as a one-form on y's chart."""
    return OneForm(y.chart, tuple(differentiate(y, n) for n in y.chart.names))


def lie_derivative(y: Expr, v: VectorField) -> Expr:
    """Derivative of the scalar y along the vector field v."""
    if v.chart != y.chart:
        raise ValueError("chart mismatch")
    chart = y.chart
    acc = sp.S.Zero
    for name, comp in zip(chart.names, v.components):
        if comp.sym == 0:
            continue
        if name not in y.free_names:
            continue
        acc += comp.sym * sp.diff(y.sym, chart.sym(name))
    return simplify(Expr(chart, acc, _validate=False))


# ---------------------------------------------------------------------------
# annihilators


def _is_zero_entry(e: Expr, S: SampleSet) -> bool:
    verdict, _ = is_zero_expr(e, S)
    return verdict


def annihilator_basis(D: Distribution, S: SampleSet) -> list:
    """Basis of one-forms annihilating every generator of ``D``.

    Symbolic Gaussian elimination over the rational-function field with
    first-nonzero-column pivoting; zero entries are decided exactly for
    rational entries and by sampling otherwise.  Returns
    ``dim - rank(D)`` forms with rational-function coefficients.
    """
    chart = D.chart
    dim = chart.dimension
    rows = [list(g.components) for g in D.generators]
    rows = [[simplify(c) for c in row] for row in rows]

    pivot_cols: list = []
    r = 0
    for col in range(dim):
        pivot = None
        for i in range(r, len(rows)):
            if not _is_zero_entry(rows[i][col], S):
                pivot = i
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        p = rows[r][col]
        rows[r] = [simplify(c / p) for c in rows[r]]
        for i in range(len(rows)):
            if i == r:
                continue
            f = rows[i][col]
            if _is_zero_entry(f, S):
                continue
            rows[i] = [simplify(a - f * b) for a, b in zip(rows[i], rows[r])]
        pivot_cols.append(col)
        r += 1
        if r == len(rows):
            break

    rank = len(pivot_cols)
    rank_rep = pointwise_rank(D, S)
    if not rank_rep.constant:
        raise SingularityDetected(
            f"annihilator of a non-constant-rank distribution: {rank_rep.ranks}",
            rank_rep.ranks,
        )
    free_cols = [c for c in range(dim) if c not in pivot_cols]
    forms = []
    for fcol in free_cols:
        coeffs = [Expr.zero(chart) for _ in range(dim)]
        coeffs[fcol] = Expr.one(chart)
        for prow, pcol in enumerate(pivot_cols):
            coeffs[pcol] = simplify(-rows[prow][fcol])
        form = OneForm(chart, coeffs)
        for g in D.generators:
            if not _is_zero_entry(form.pair(g), S):
                raise RuntimeError("annihilator construction failed to pair to zero")
        forms.append(form)
    if len(forms) != dim - rank:
        raise RuntimeError("unexpected annihilator count")
    return forms


def first_integrals(forms: Sequence[OneForm], S: SampleSet) -> list:
    """Polynomial potentials of closed one-forms, or None per form.

    A form is integrated only when it is closed and every coefficient
    is polynomial; the potential is checked by re-differentiation.
    """
    out = []
    for form in forms:
        chart = form.chart
        closed = True
        for i in range(chart.dimension):
            for j in range(i + 1, chart.dimension):
                if form.coefficients[i].sym == 0 and form.coefficients[j].sym == 0:
                    continue
                d = differentiate(form.coefficients[j], chart.names[i]) - differentiate(
                    form.coefficients[i], chart.names[j]
                )
                if not _is_zero_entry(d, S):
                    closed = False
                    break
            if not closed:
                break
        if not closed or not all(
            c.sym.is_polynomial(*chart.syms) for c in form.coefficients
        ):
            out.append(None)
            continue
        t = sp.Dummy("t")
        scaled = {s: t * s for s in chart.syms}
        total = sp.S.Zero
        for c, s in zip(form.coefficients, chart.syms):
            if c.sym == 0:
                continue
            total += sp.integrate(c.sym.xreplace(scaled) * s, (t, 0, 1))
        potential = simplify(Expr(chart, sp.expand(total), _validate=False))
        ok = all(
            (differentiate(potential, n) - c).sym == 0
            for n, c in zip(chart.names, form.coefficients)
        )
        out.append(potential if ok else None)
    return out


# ---------------------------------------------------------------------------
# controllability indices


@dataclass(frozen=True)
class BrunovskyIndices:
    """Rank jumps rho of the G tower and the chain lengths kappa.

    rho is recorded as computed (no monotonicity is assumed); kappa_k
    counts the levels with rho >= k and is nonincreasing by
    construction, with sum(kappa) = rank G at stabilisation.
    """

    rho: tuple
    kappa: tuple
    k_star: int
    rank_g_star: int

    def linear_system_shape(self) -> tuple:
        return tuple(f"y{i + 1}^({k}) = v{i + 1}" for i, k in enumerate(self.kappa))


def brunovsky_indices(sys: ControlSystem, j, S: SampleSet) -> BrunovskyIndices:
    """Controllability indices of the prolongation of order ``j``.

    Requires the prolongation conditions to pass for (sys, j).
    """
    rep = check_p2_conditions(sys, j, S)
    if not rep.passed:
        raise NotProlongationFlatError(
            f"prolongation order {tuple(j)} fails: {rep.failure}"
        )
    ps = build_prolonged(sys, j)
    S_l = S.lift(ps.chart)
    k_stop = max(rep.k_star, max(ps.order.orders) - 1 if ps.order.total else 0)
    g_ranks = []
    for k in range(k_stop + 1):
        lvl = tower_level(ps, k, S_l)
        if not lvl.g_rank.constant:
            raise SingularityDetected(
                f"G_{k} has non-constant rank {lvl.g_rank.ranks}", lvl.g_rank.ranks
            )
        g_ranks.append(lvl.g_rank.max_rank)
    rho = [g_ranks[0]] + [g_ranks[k] - g_ranks[k - 1] for k in range(1, len(g_ranks))]
    if rho[0] != sys.m:
        raise RuntimeError(f"rank G_0 = {rho[0]} but m = {sys.m}")
    kappa = tuple(sum(1 for r in rho if r >= k) for k in range(1, sys.m + 1))
    if sum(kappa) != g_ranks[-1]:
        raise RuntimeError("index sum does not match the stabilised G rank")
    return BrunovskyIndices(tuple(rho), kappa, rep.k_star, g_ranks[-1])


# ---------------------------------------------------------------------------
# flat output verification


@dataclass
class FlatOutputCandidate:
    """m scalar expressions proposed as flat outputs (state functions,
    possibly using jet coordinates below the top prolongation)."""

    outputs: tuple

    @classmethod
    def from_strings(cls, texts: Sequence[str], chart: Chart) -> "FlatOutputCandidate":
        return cls(tuple(parse_expr(t, chart) for t in texts))


@dataclass
class PairingFailure:
    output: int
    k: int
    generator: int
    value: str


@dataclass
class FlatOutputReport:
    passed: bool
    kappa: tuple
    annihilation_modes: list
    failure: Optional[PairingFailure]
    jet_dependent_outputs: tuple
    seed: int


def _nonzero_at(e: Expr, S: SampleSet, slot: int) -> bool:
    v = S.value(e, slot)
    if v.exact:
        return v.value != 0
    terms = e.sym.args if e.sym.is_Add else (e.sym,)
    scale = sum(
        abs(S.value(Expr(e.chart, t, _validate=False), slot).as_float()) for t in terms
    )
    return abs(v.as_float()) > S.zero_rel * max(scale, 1.0)


def verify_flat_outputs(sys: ControlSystem, j, cand, S: SampleSet) -> FlatOutputReport:
    """Check the annihilation ladder and the non-degeneracy step for a
    candidate flat output tuple.

    Output i must annihilate every G_k with k <= kappa_i - 2 and pair
    non-trivially with G_{kappa_i - 1} at every sample; candidates are
    expected ordered by nonincreasing chain length.
    """
    outputs = cand.outputs if isinstance(cand, FlatOutputCandidate) else tuple(cand)
    if len(outputs) != sys.m:
        raise ValueError("one candidate output per input channel required")
    indices = brunovsky_indices(sys, j, S)
    ps = build_prolonged(sys, j)
    S_l = S.lift(ps.chart)
    lifted = tuple(y.on_chart(ps.chart) for y in outputs)

    top_jets = {f"u{i + 1}_{ps.order[i]}" for i in range(sys.m)}
    jet_dependent = tuple(
        i
        for i, y in enumerate(lifted)
        if any(n not in sys.chart.names and n not in top_jets for n in y.free_names)
    )

    grads = [
        VectorField(ps.chart, tuple(differentiate(y, n) for n in ps.chart.names))
        for y in lifted
    ]

    def indep(slot):
        rows, exact = S_l.matrix(grads, slot)
        span = PointSpan(exact, ps.chart.dimension, S_l.tol)
        count = 0
        for row in rows:
            vec = [s.value for s in row] if exact else [s.as_float() for s in row]
            if span.insert(vec):
                count += 1
        return count

    if any(c != sys.m for c in S_l.for_each_slot(indep)):
        raise DegenerateCandidateError("candidate differentials are dependent at a sample")

    levels = {k: tower_level(ps, k, S_l) for k in range(max(indices.kappa))}
    modes = []
    for i, y in enumerate(lifted):
        kappa_i = indices.kappa[i]
        mode = "exact"
        for k in range(kappa_i - 1):
            lvl = levels[k]
            gens = tuple(lvl.gamma.generators) + tuple(lvl.delta.generators)
            for gi, gen in enumerate(gens):
                pairing = lie_derivative(y, gen)
                zero, how = is_zero_expr(pairing, S_l)
                if how == "sampled":
                    mode = "sampled"
                if not zero:
                    return FlatOutputReport(
                        False,
                        indices.kappa,
                        modes,
                        PairingFailure(i, k, gi, to_text(simplify(pairing))),
                        jet_dependent,
                        S.seed,
                    )
        lvl = levels[kappa_i - 1]
        gens = tuple(lvl.gamma.generators) + tuple(lvl.delta.generators)
        pairings = [lie_derivative(y, gen) for gen in gens]

        def nondegenerate(slot):
            return any(_nonzero_at(p, S_l, slot) for p in pairings)

        if not all(S_l.for_each_slot(nondegenerate)):
            return FlatOutputReport(
                False,
                indices.kappa,
                modes,
                PairingFailure(i, kappa_i - 1, -1, "all pairings vanish at a sample"),
                jet_dependent,
                S.seed,
            )
        modes.append(mode)
    return FlatOutputReport(True, indices.kappa, modes, None, jet_dependent, S.seed)


# ---------------------------------------------------------------------------
# flat parametrization verification


def yjet_name(i: int, q: int) -> str:
    """Chart spelling of the q-th derivative of flat output i (1-based)."""
    return f"y{i}_{q}"


@dataclass
class ParametrizationSpec:
    """Expressions for states and inputs in terms of flat-output jets.

    Entries map a state name (or ``u<i>`` for input channel i) to an
    expression over the jet symbols ``y<i>_<q>``; partial tables are
    allowed (entries outside the rational-trigonometric grammar, such
    as inverse trigonometric reconstructions, are simply omitted).
    """

    m: int
    max_order: int
    entries: dict
    jet_chart: Chart = field(init=False)

    def __post_init__(self):
        names = [
            yjet_name(i, q)
            for i in range(1, self.m + 1)
            for q in range(self.max_order + 1)
        ]
        self.jet_chart = Chart(tuple(names))

    @classmethod
    def from_strings(cls, entries: Mapping[str, str], m: int, max_order: int) -> "ParametrizationSpec":
        spec = cls(m, max_order, {})
        spec.entries = {k: parse_expr(v, spec.jet_chart) for k, v in entries.items()}
        return spec


@dataclass
class TrajectoryConfig:
    """Exogenous input signals and integration window for the numeric
    check."""

    input_texts: tuple
    initial: dict
    horizon: Fraction = Fraction(1)
    step: Fraction = Fraction(1, 1000)
    seed: int = 20240


@dataclass
class ParametrizationEntryResult:
    target: str
    symbolic: str  # "exact" | "sampled" | "failed" | "skipped"
    residual: Optional[str]
    numeric_sup: Optional[float]


@dataclass
class ParametrizationReport:
    passed: bool
    symbolic_ok: bool
    numeric_ok: bool
    entries: list
    numeric_tolerance: float
    failure_time: Optional[float] = None


def _rk4(f, x0, t0, t1, h):
    """Fixed-step fourth-order integration; yields (t, state) pairs."""
    t, x = float(t0), [float(v) for v in x0]
    n = len(x)
    steps = int(round((float(t1) - float(t0)) / float(h)))
    h = float(h)
    yield t, list(x)
    for _ in range(steps):
        k1 = f(t, x)
        k2 = f(t + h / 2, [x[i] + h / 2 * k1[i] for i in range(n)])
        k3 = f(t + h / 2, [x[i] + h / 2 * k2[i] for i in range(n)])
        k4 = f(t + h, [x[i] + h * k3[i] for i in range(n)])
        x = [x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(n)]
        t += h
        yield t, list(x)


def verify_parametrization(
    sys: ControlSystem,
    cand,
    spec: ParametrizationSpec,
    traj: TrajectoryConfig,
    sup_tol: float = 1e-6,
) -> ParametrizationReport:
    """Verify a flat parametrization symbolically and numerically.

    Flat-output jets are expanded by repeated differentiation along the
    closed-loop field with the inputs treated as declared time signals,
    so both checks share exact jet expressions.  The symbolic residual
    state - spec(state) is simplified to zero where the rational engine
    succeeds (sampled zero testing covers trigonometric residuals); the
    numeric check integrates the closed loop with a fixed-step
    fourth-order scheme and reports sup-norm reconstruction errors.
    """
    outputs = cand.outputs if isinstance(cand, FlatOutputCandidate) else tuple(cand)
    if len(outputs) != sys.m:
        raise ValueError("one candidate output per input channel required")
    ext = sys.chart.extended(("t",), (STATE,))
    sigmas = tuple(parse_expr(txt, ext) for txt in traj.input_texts)
    if len(sigmas) != sys.m:
        raise ValueError("one input signal per channel required")

    comps = []
    for row in range(sys.n):
        acc = Expr.zero(ext)
        for sig, g in zip(sigmas, sys.fields):
            c = g.components[row]
            if c.sym != 0:
                acc = acc + sig * c.on_chart(ext)
        comps.append(simplify(acc))
    closed_loop = VectorField(ext, comps + [Expr.one(ext)])

    orders = {i: 0 for i in range(1, sys.m + 1)}
    for e in spec.entries.values():
        for name in e.free_names:
            i, q = name[1:].split("_")
            orders[int(i)] = max(orders[int(i)], int(q))
    jets = {}
    for i, y in enumerate(outputs, start=1):
        cur = y.on_chart(ext)
        jets[yjet_name(i, 0)] = cur
        for q in range(1, orders[i] + 1):
            cur = lie_derivative(cur, closed_loop)
            jets[yjet_name(i, q)] = cur
    subs_map = {spec.jet_chart.sym(k): v.sym for k, v in jets.items()}

    sset = SampleSet(ext, seed=traj.seed)
    entry_results = []
    symbolic_ok = True
    substituted = {}
    for target, e in sorted(spec.entries.items()):
        missing = [k for k in e.free_names if k not in jets]
        if missing:
            raise ValueError(f"entry '{target}' uses undeclared jets {missing}")
        pred = Expr(ext, e.sym.xreplace(subs_map), _validate=False)
        if target.startswith("u") and "_" not in target:
            actual = sigmas[int(target[1:]) - 1]
        else:
            actual = Expr.var(ext, target)
        substituted[target] = (pred, actual)
        residual = simplify(pred - actual)
        zero, how = is_zero_expr(residual, sset)
        entry_results.append(
            ParametrizationEntryResult(
                target,
                how if zero else "failed",
                None if zero else to_text(residual),
                None,
            )
        )
        symbolic_ok = symbolic_ok and zero

    # numeric branch
    ext_names = [str(s) for s in ext.syms]
    lam_field = [sp.lambdify(ext_names, c.sym, "math") for c in closed_loop.components[:-1]]
    lam_entries = {
        t: (
            sp.lambdify(ext_names, pred.sym, "math"),
            sp.lambdify(ext_names, actual.sym, "math"),
        )
        for t, (pred, actual) in substituted.items()
    }

    def f(t, x):
        vals = list(x) + [t]
        return [fn(*vals) for fn in lam_field]

    x0 = [Fraction(traj.initial[n]) for n in sys.chart.names]
    sups = {t: 0.0 for t in substituted}
    numeric_ok = True
    failure_time = None
    try:
        for t, x in _rk4(f, x0, 0, traj.horizon, traj.step):
            vals = list(x) + [t]
            for target, (fp, fa) in lam_entries.items():
                err = abs(fp(*vals) - fa(*vals))
                if err > sups[target]:
                    sups[target] = err
    except ZeroDivisionError:
        numeric_ok = False
        failure_time = t
    else:
        numeric_ok = all(v <= sup_tol for v in sups.values())
    for r in entry_results:
        r.numeric_sup = sups.get(r.target)
    return ParametrizationReport(
        passed=symbolic_ok and numeric_ok,
        symbolic_ok=symbolic_ok,
        numeric_ok=numeric_ok,
        entries=entry_results,
        numeric_tolerance=sup_tol,
        failure_time=failure_time,
    )
