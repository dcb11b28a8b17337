"""Label switching: permutations, the symmetry group of π, and permutation-quotiented errors.

The model is unchanged when class indices are permuted simultaneously in α, π
and the labels, so every comparison between an estimate and the truth has to
minimize over relabelings. Equivalence classes of label vectors are never
materialized; they are quotiented out at evaluation time through
:func:`symmetry_group`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SizeLimitError
from .params import SbmParams

#: Default tolerance when deciding whether π^σ equals π.
DEFAULT_SYMMETRY_TOL = 1e-9

#: Largest Q for which the Q! permutations are enumerated.
MAX_PERMUTATION_Q = 8


@dataclass(frozen=True, order=True)
class Permutation:
    """
    A bijection σ on the class indices ``0..Q-1``.

    ``mapping[q]`` is σ(q). Ordering is lexicographic on ``mapping``, which is
    the tie-break :func:`param_distance` documents.
    """

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(v) for v in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"{list(mapping)} is not a permutation of 0..{len(mapping) - 1}")
        object.__setattr__(self, "mapping", mapping)

    @classmethod
    def identity(cls, q: int) -> Permutation:
        return cls(tuple(range(q)))

    @property
    def q(self) -> int:
        return len(self.mapping)

    @property
    def is_identity(self) -> bool:
        return self.mapping == tuple(range(self.q))

    def __call__(self, label: int) -> int:
        return self.mapping[label]

    def compose(self, other: Permutation) -> Permutation:
        """``self ∘ other``: apply ``other`` first."""
        return Permutation(tuple(self.mapping[v] for v in other.mapping))

    def inverse(self) -> Permutation:
        inverse = [0] * self.q
        for q, image in enumerate(self.mapping):
            inverse[image] = q
        return Permutation(tuple(inverse))

    def apply(self, labels) -> np.ndarray:
        """Relabel a vector: ``z_i -> σ(z_i)``."""
        return np.asarray(self.mapping, dtype=np.int64)[np.asarray(labels, dtype=np.int64)]

    def permute_matrix(self, pi: np.ndarray) -> np.ndarray:
        """π^σ with ``π^σ[q, l] = π[σ(q), σ(l)]``."""
        index = np.asarray(self.mapping)
        return np.asarray(pi)[np.ix_(index, index)]

    def permute_params(self, params: SbmParams) -> SbmParams:
        """(α^σ, π^σ) with ``α^σ[q] = α[σ(q)]``; describes the same model."""
        index = np.asarray(self.mapping)
        return SbmParams(params.alpha[index], self.permute_matrix(params.pi))

    def one_based(self) -> list[int]:
        """The mapping written with 1-based class labels, for display."""
        return [v + 1 for v in self.mapping]

    def __str__(self):
        return "(" + " ".join(str(v) for v in self.one_based()) + ")"


def all_permutations(q: int, max_q: int = MAX_PERMUTATION_Q) -> list[Permutation]:
    """
    Every permutation of ``0..q-1`` in lexicographic order.

    :raises SizeLimitError: If ``q > max_q``.
    """
    if q > max_q:
        raise SizeLimitError(f"enumerating the {q}! permutations exceeds the limit Q <= {max_q}")
    return [Permutation(p) for p in itertools.permutations(range(q))]


def symmetry_group(pi, tol: float = DEFAULT_SYMMETRY_TOL, max_q: int = MAX_PERMUTATION_Q) -> list[Permutation]:
    """
    The set of permutations σ leaving π invariant.

    Exactly the σ with ``max |π[σ(q), σ(l)] - π[q, l]| <= tol`` are returned,
    in lexicographic order; the identity is always first. Estimated matrices
    are never exactly symmetric, so pass a looser ``tol`` for them.

    :param pi: Q×Q connectivity matrix.
    :param tol: Non-negative tolerance on the sup-norm difference.
    :raises SizeLimitError: If Q exceeds ``max_q``.
    """
    pi = np.asarray(pi, dtype=float)
    if tol < 0:
        raise ValueError(f"tol must be non-negative, got {tol}")
    return [
        sigma
        for sigma in all_permutations(pi.shape[0], max_q)
        if sigma.is_identity or np.max(np.abs(sigma.permute_matrix(pi) - pi)) <= tol
    ]


def param_distance(
    a: SbmParams, b: SbmParams, max_q: int = MAX_PERMUTATION_Q
) -> tuple[float, float, Permutation]:
    """
    Sup-norm distance between two parameter sets, up to relabeling.

    Minimizes ``max |π^a[σ(q), σ(l)] - π^b[q, l]|`` over all Q! permutations;
    ``err_alpha = max |α^a[σ(q)] - α^b[q]|`` at the minimizing σ. Ties go to
    the smaller ``err_alpha``, then to the lexicographically smaller σ.

    :return: ``(err_pi, err_alpha, best_perm)``; ``best_perm`` maps a class of
        ``b`` to the matching class of ``a``.
    :raises ShapeError: If the class counts differ.
    :raises SizeLimitError: If Q exceeds ``max_q``.
    """
    if a.q != b.q:
        raise ShapeError(f"cannot compare parameters with Q={a.q} and Q={b.q}")
    best = None
    for sigma in all_permutations(a.q, max_q):
        index = np.asarray(sigma.mapping)
        err_pi = float(np.max(np.abs(a.pi[np.ix_(index, index)] - b.pi)))
        err_alpha = float(np.max(np.abs(a.alpha[index] - b.alpha)))
        candidate = (err_pi, err_alpha, sigma)
        if best is None or candidate < best:
            best = candidate
    return best


def label_error(z, z_star, pi, tol: float = DEFAULT_SYMMETRY_TOL, max_q: int = MAX_PERMUTATION_Q) -> float:
    """
    Misclassification rate of ``z`` against ``z_star``, quotiented by the symmetry group of π.

    Returns ``min over σ in symmetry_group(pi) of mean(σ(z_i) != z*_i)``, and
    0 for empty vectors.

    :raises ShapeError: If the vectors differ in length.
    """
    z = np.asarray(z, dtype=np.int64)
    z_star = np.asarray(z_star, dtype=np.int64)
    if z.shape != z_star.shape:
        raise ShapeError(f"label vectors differ in length: {z.size} vs {z_star.size}")
    if z.size == 0:
        return 0.0
    return min(float(np.mean(sigma.apply(z) != z_star)) for sigma in symmetry_group(pi, tol, max_q))


def equivalence_class(z, pi, tol: float = DEFAULT_SYMMETRY_TOL, max_q: int = MAX_PERMUTATION_Q) -> list[np.ndarray]:
    """The distinct label vectors σ(z) for σ in the symmetry group of π."""
    seen: dict[bytes, np.ndarray] = {}
    for sigma in symmetry_group(pi, tol, max_q):
        image = sigma.apply(z)
        seen.setdefault(image.tobytes(), image)
    return list(seen.values())
