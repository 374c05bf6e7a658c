"""Control systems in input-affine form."""

from __future__ import annotations

from typing import Optional, Sequence

from .expr import Chart
from .geometry import SampleSet, VectorField

__all__ = ["ControlSystem"]


class ControlSystem:
    """``xdot = drift(x) + sum_i u_i g_i(x)`` on a state chart.

    ``drift`` is None for driftless systems.  Input fields are expected
    to be pointwise independent on the sampled region; nothing here
    enforces controllability.
    """

    __slots__ = ("chart", "fields", "drift", "name")

    def __init__(
        self,
        chart: Chart,
        fields: Sequence[VectorField],
        drift: Optional[VectorField] = None,
        name: str = "",
    ):
        fields = tuple(fields)
        if not fields:
            raise ValueError("at least one input field is required")
        for g in fields:
            if g.chart != chart:
                raise ValueError("input fields must live on the state chart")
        if drift is not None and drift.chart != chart:
            raise ValueError("drift must live on the state chart")
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "name", name)

    def __setattr__(self, *args):
        raise AttributeError("ControlSystem is immutable")

    @classmethod
    def driftless(cls, chart: Chart, rows: Sequence[Sequence[str]], name: str = "") -> "ControlSystem":
        fields = tuple(VectorField.from_strings(chart, r) for r in rows)
        return cls(chart, fields, None, name)

    @property
    def n(self) -> int:
        return self.chart.dimension

    @property
    def m(self) -> int:
        return len(self.fields)

    def is_driftless(self) -> bool:
        return self.drift is None or self.drift.is_zero()

    def permuted(self, perm: Sequence[int], name: str = "") -> "ControlSystem":
        """Relabel inputs so that new channel k is old channel perm[k]."""
        if sorted(perm) != list(range(self.m)):
            raise ValueError("not a permutation of the input indices")
        return ControlSystem(
            self.chart,
            tuple(self.fields[p] for p in perm),
            self.drift,
            name or self.name,
        )

    def sample_set(self, seed: int = 20240, count: int = 25, **kw) -> SampleSet:
        return SampleSet(self.chart, seed=seed, count=count, **kw)

    def __repr__(self):
        kind = "driftless" if self.is_driftless() else "affine"
        label = f" '{self.name}'" if self.name else ""
        return f"ControlSystem({kind}{label}, n={self.n}, m={self.m})"
