"""Holding-cost registry.

Costs come from a small registry (identity, square, polynomials with
non-negative coefficients) rather than arbitrary callables so convexity and
monotonicity can actually be validated at load time.  A cost model is either
stationary or a per-stage schedule of registry entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParameterError


@dataclass(frozen=True)
class PolyCost:
    """c(x) = sum_i coeffs[i] * x**i with coeffs >= 0 (convex, non-decreasing)."""

    coeffs: tuple[float, ...]

    def __call__(self, x: int) -> float:
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    @property
    def name(self) -> str:
        if self.coeffs == (0.0, 1.0):
            return "linear"
        if self.coeffs == (0.0, 0.0, 1.0):
            return "square"
        return "poly:" + ",".join(repr(c) for c in self.coeffs)


def _validate(fn, check_range: int):
    for x in range(check_range):
        if fn(x + 1) < fn(x):
            raise ParameterError(f"cost not non-decreasing at x={x}")
        if x >= 1 and fn(x + 1) + fn(x - 1) < 2 * fn(x):
            raise ParameterError(f"cost not convex at x={x}")
        if fn(x) < 0:
            raise ParameterError(f"cost negative at x={x}")


@dataclass(frozen=True)
class CostModel:
    """Stationary or horizon-indexed per-queue holding cost.

    ``stages`` maps slot index to a cost function; slots at or past
    ``len(stages)`` use the last entry, so a one-element schedule is a
    stationary cost.
    """

    stages: tuple[PolyCost, ...]
    name: str = field(default="")
    check_range: int = 200

    def __post_init__(self):
        if not self.stages:
            raise ParameterError("cost model needs at least one stage")
        for s in self.stages:
            _validate(s, self.check_range)
        if not self.name:
            object.__setattr__(self, "name", "|".join(s.name for s in self.stages))

    def __call__(self, t: int, x: int) -> float:
        stage = self.stages[min(t, len(self.stages) - 1)]
        return stage(x)

    def stationary(self) -> PolyCost:
        if len(self.stages) != 1:
            raise ParameterError("infinite-horizon analysis needs a stationary cost")
        return self.stages[0]

    def table(self, t: int, size: int) -> list[float]:
        """Dense table [c_t(0), ..., c_t(size-1)] for kernel consumption."""
        stage = self.stages[min(t, len(self.stages) - 1)]
        return [stage(x) for x in range(size)]


LINEAR = PolyCost((0.0, 1.0))
SQUARE = PolyCost((0.0, 0.0, 1.0))
ZERO = PolyCost((0.0,))


def parse_cost(spec: str) -> CostModel:
    """Parse a CLI cost spec: ``linear``, ``square``, or ``poly:a0,a1,...``.

    A ``;``-separated list of specs is a per-stage schedule (stage t uses
    entry min(t, last)).
    """
    stages = []
    for part in spec.split(";"):
        part = part.strip()
        if part == "linear":
            stages.append(LINEAR)
        elif part == "square":
            stages.append(SQUARE)
        elif part == "zero":
            stages.append(ZERO)
        elif part.startswith("poly:"):
            try:
                coeffs = tuple(float(c) for c in part[5:].split(","))
            except ValueError as exc:
                raise ParameterError(f"bad polynomial spec {part!r}") from exc
            if any(c < 0 for c in coeffs):
                raise ParameterError("polynomial cost coefficients must be >= 0")
            stages.append(PolyCost(coeffs))
        else:
            raise ParameterError(f"unknown cost spec {part!r}")
    return CostModel(stages=tuple(stages), name=spec)
