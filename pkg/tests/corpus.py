"""Shared fixture systems for the test suite.

Each builder returns a fresh ControlSystem.  The names encode the
expected classification: structure (pair / single involutive input
subdistribution), state count, and whether the system is flat by pure
prolongation.  Systems expected NOT to be flat are engineered with an
unreachable direction, so no prolongation can ever linearise them and
the exhaustive search agrees with the fast-path verdict.
"""

from __future__ import annotations

from p2flat import Chart, ControlSystem

__all__ = [
    "car",
    "sampei",
    "chain6",
    "case2five",
    "case2six",
    "pair5_not",
    "pair6_not",
    "single5_not",
    "single6_not",
    "ladder4_two_input",
    "uncontrollable_two_input",
    "single_f3",
    "single_f4",
    "m4_n7",
    "m4_n8",
    "m4_n8_not",
]


def car() -> ControlSystem:
    """Kinematic car: rolling in the heading direction plus steering."""
    return ControlSystem.driftless(
        Chart.states("x", 3),
        [["cos(x3)", "sin(x3)", "0"], ["0", "0", "1"]],
        name="car",
    )


def sampei() -> ControlSystem:
    """Five-state, three-input system with an involutive input pair."""
    return ControlSystem.driftless(
        Chart.states("x", 5),
        [
            ["-1/2", "0", "1", "0", "0"],
            ["0", "-1/2", "0", "1", "0"],
            ["-x2/2", "x1/2", "0", "0", "1"],
        ],
        name="sampei",
    )


def chain6() -> ControlSystem:
    """Six-state chained system; pair case with minimal order (0,0,2)."""
    return ControlSystem.driftless(
        Chart.states("x", 6),
        [
            ["1", "0", "0", "0", "0", "0"],
            ["0", "1", "0", "0", "0", "0"],
            ["0", "0", "1", "x1", "x2", "x4"],
        ],
        name="chain6",
    )


def case2five() -> ControlSystem:
    """Five states, no involutive input pair; minimal order (0,1,2)."""
    return ControlSystem.driftless(
        Chart.states("x", 5),
        [
            ["1", "0", "0", "0", "0"],
            ["0", "1", "x1", "0", "0"],
            ["0", "x1", "0", "1", "x3"],
        ],
        name="case2five",
    )


def case2six() -> ControlSystem:
    """Six states, no involutive input pair; minimal order (0,1,2)."""
    return ControlSystem.driftless(
        Chart.states("x", 6),
        [
            ["1", "0", "0", "0", "0", "0"],
            ["0", "1", "x1", "0", "0", "0"],
            ["0", "x1", "0", "1", "x2", "x3"],
        ],
        name="case2six",
    )


def pair5_not() -> ControlSystem:
    """Sampei with the last field flattened so the bracket tower never
    reaches the fifth direction; pair case, not flat."""
    return ControlSystem.driftless(
        Chart.states("x", 5),
        [
            ["-1/2", "0", "1", "0", "0"],
            ["0", "-1/2", "0", "1", "0"],
            ["-x2/2", "x1/2", "0", "0", "0"],
        ],
        name="pair5-not",
    )


def pair6_not() -> ControlSystem:
    """Pair case on six states with two unreachable directions."""
    return ControlSystem.driftless(
        Chart.states("x", 6),
        [
            ["1", "0", "0", "0", "0", "0"],
            ["0", "1", "0", "0", "0", "0"],
            ["0", "0", "1", "x1 + x2", "0", "0"],
        ],
        name="pair6-not",
    )


def single5_not() -> ControlSystem:
    """No involutive pair, second-order tower rank deficient."""
    return ControlSystem.driftless(
        Chart.states("x", 5),
        [
            ["1", "0", "0", "0", "0"],
            ["0", "1", "x1", "0", "0"],
            ["0", "x1", "x2", "1", "0"],
        ],
        name="single5-not",
    )


def single6_not() -> ControlSystem:
    """Six-state variant of single5_not with two dead directions."""
    return ControlSystem.driftless(
        Chart.states("x", 6),
        [
            ["1", "0", "0", "0", "0", "0"],
            ["0", "1", "x1", "0", "0", "0"],
            ["0", "x1", "x2", "1", "0", "0"],
        ],
        name="single6-not",
    )


def ladder4_two_input() -> ControlSystem:
    """Four-state chained form, two inputs, flat by prolongation."""
    return ControlSystem.driftless(
        Chart.states("x", 4),
        [["1", "0", "0", "0"], ["0", "1", "x1", "x3"]],
        name="ladder4",
    )


def uncontrollable_two_input() -> ControlSystem:
    """Two commuting directions on three states; never flat."""
    return ControlSystem.driftless(
        Chart.states("x", 3),
        [["1", "0", "0"], ["0", "1", "0"]],
        name="planar-pair",
    )


def single_f3() -> ControlSystem:
    """No involutive pair and rank-2 adjoint chain {g1,[g2,g1],[g3,g1]}."""
    return ControlSystem.driftless(
        Chart.states("x", 6),
        [
            ["1", "0", "0", "0", "0", "0"],
            ["0", "1", "x1", "0", "0", "0"],
            ["0", "0", "x1", "1", "x3", "x5"],
        ],
        name="single-f3",
    )


def single_f4() -> ControlSystem:
    """No involutive pair on four states; the first-order bracket
    distribution {g1,g2,g3,[g3,g1],[g3,g2]} is the full involutive
    tangent space."""
    return ControlSystem.driftless(
        Chart.states("x", 4),
        [
            ["1", "0", "0", "0"],
            ["0", "1", "x1", "0"],
            ["0", "x1", "x2", "1"],
        ],
        name="single-f4",
    )


def m4_n7() -> ControlSystem:
    """Four inputs, seven states; one-order prolongation of the last
    input suffices."""
    return ControlSystem.driftless(
        Chart.states("x", 7),
        [
            ["1", "0", "0", "0", "0", "0", "0"],
            ["0", "1", "0", "0", "0", "0", "0"],
            ["0", "0", "1", "0", "0", "0", "0"],
            ["0", "0", "0", "1", "x1", "x2", "x3"],
        ],
        name="m4n7",
    )


def m4_n8() -> ControlSystem:
    """Four inputs, eight states; two-order prolongation of the last
    input suffices."""
    return ControlSystem.driftless(
        Chart.states("x", 8),
        [
            ["1", "0", "0", "0", "0", "0", "0", "0"],
            ["0", "1", "0", "0", "0", "0", "0", "0"],
            ["0", "0", "1", "0", "0", "0", "0", "0"],
            ["0", "0", "0", "1", "x1", "x2", "x3", "x5"],
        ],
        name="m4n8",
    )


def m4_n8_not() -> ControlSystem:
    """m4_n8 with the first-order bracket distribution made
    non-involutive; the sufficient test is inconclusive."""
    return ControlSystem.driftless(
        Chart.states("x", 8),
        [
            ["1", "0", "0", "0", "0", "0", "0", "0"],
            ["0", "1", "0", "0", "0", "0", "0", "0"],
            ["0", "0", "1", "0", "0", "0", "0", "0"],
            ["0", "0", "0", "1", "x1", "x2", "x1*x6", "0"],
        ],
        name="m4n8-not",
    )
