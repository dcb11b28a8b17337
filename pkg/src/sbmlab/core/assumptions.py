"""Executable checks for the model assumptions A1-A4.

- A1: no two classes share both their row and their column of π.
- A2: every π entry strictly inside (0, 1) lies in [ζ, 1-ζ].
- A3: every α_q lies in [γ, 1-γ] (no class is drained).
- A4: the empirical class frequencies of the true labels are all at least γ,
  for every n ≥ n0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBoundError
from .graph import class_counts, validate_labels
from .params import SbmParams


@dataclass(frozen=True)
class AssumptionReport:
    """
    The outcome of :func:`check_assumptions`.

    :ivar a1_ok: A1 holds.
    :ivar a2_ok: A2 holds for ``zeta``.
    :ivar a3_ok: A3 holds for ``gamma``.
    :ivar a4_ok: A4 holds for ``gamma``; ``None`` when no labels were given.
    :ivar zeta: The ζ the report was computed with.
    :ivar gamma: The γ the report was computed with.
    :ivar n0: The n0 used for A4.
    :ivar violations: ``(assumption, detail)`` pairs, one per failure.
    :ivar notes: Informational ``(assumption, detail)`` pairs that are not failures.
    """

    a1_ok: bool
    a2_ok: bool
    a3_ok: bool
    a4_ok: bool | None
    zeta: float
    gamma: float
    n0: int = 1
    violations: list[tuple[str, str]] = field(default_factory=list)
    notes: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        """All evaluated assumptions hold."""
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "a1_ok": self.a1_ok,
            "a2_ok": self.a2_ok,
            "a3_ok": self.a3_ok,
            "a4_ok": self.a4_ok,
            "zeta": self.zeta,
            "gamma": self.gamma,
            "n0": self.n0,
            "violations": [list(v) for v in self.violations],
            "notes": [list(v) for v in self.notes],
        }


def a1_violations(pi) -> list[tuple[str, str]]:
    """A1 failures: pairs of classes sharing both their row and their column of π."""
    pi = np.asarray(pi, dtype=float)
    q = pi.shape[0]
    found = []
    for a in range(q):
        for b in range(a + 1, q):
            if np.array_equal(pi[a], pi[b]) and np.array_equal(pi[:, a], pi[:, b]):
                found.append(("A1", f"classes {a + 1} and {b + 1} have identical rows and columns of pi"))
    return found


def _check_a2(pi: np.ndarray, zeta: float) -> list[tuple[str, str]]:
    inside = (pi > 0) & (pi < 1)
    bad = inside & ((pi < zeta) | (pi > 1 - zeta))
    return [
        ("A2", f"pi[{q + 1},{l + 1}]={float(pi[q, l])!r} is in (0,1) but outside [{zeta}, {1 - zeta}]")
        for q, l in zip(*np.nonzero(bad), strict=True)
    ]


def _check_a3(alpha: np.ndarray, gamma: float) -> list[tuple[str, str]]:
    return [
        ("A3", f"alpha[{q + 1}]={float(a)!r} is outside [{gamma}, {1 - gamma}]")
        for q, a in enumerate(alpha)
        if a < gamma or a > 1 - gamma
    ]


def check_assumptions(
    params: SbmParams,
    labels=None,
    *,
    zeta: float,
    gamma: float,
    n0: int = 1,
) -> AssumptionReport:
    """
    Evaluate A1-A4 for a parameter set and, optionally, a true label vector.

    :param params: Model parameters.
    :param labels: Optional 0-based true labels; A4 is evaluated only when given.
    :param zeta: ζ for A2, in (0, 1/2].
    :param gamma: γ for A3/A4, in (0, 1/Q).
    :param n0: A4 is only required from ``n >= n0`` on; shorter label vectors
        pass vacuously with a note. The assumption's n0 is existential, so the
        caller chooses it.
    :raises InvalidBoundError: If a bound is outside its admissible range.
    """
    q = params.q
    if not 0 < zeta <= 0.5:
        raise InvalidBoundError("zeta", zeta, "(0, 1/2]")
    if not 0 < gamma < 1 / q:
        raise InvalidBoundError("gamma", gamma, f"(0, 1/Q) = (0, {1 / q})")
    if n0 < 1:
        raise InvalidBoundError("n0", n0, "[1, inf)")

    a1 = a1_violations(params.pi)
    a2 = _check_a2(params.pi, zeta)
    a3 = _check_a3(params.alpha, gamma)
    violations = [*a1, *a2, *a3]
    notes = []

    a4_ok = None
    if labels is not None:
        z = validate_labels(labels, len(labels), q)
        n = z.size
        if n < n0:
            a4_ok = True
            notes.append(("A4", f"n={n} is below n0={n0}; not required"))
        else:
            freq = class_counts(z, q) / n if n else np.zeros(q)
            a4 = [
                ("A4", f"class {c + 1} has empirical frequency {float(f)!r} < gamma={gamma}")
                for c, f in enumerate(freq)
                if f < gamma
            ]
            a4_ok = not a4
            violations.extend(a4)

    return AssumptionReport(
        a1_ok=not a1,
        a2_ok=not a2,
        a3_ok=not a3,
        a4_ok=a4_ok,
        zeta=zeta,
        gamma=gamma,
        n0=n0,
        violations=violations,
        notes=notes,
    )
