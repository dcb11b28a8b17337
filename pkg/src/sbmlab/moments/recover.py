"""
Parameters from moments: the constructive identifiability algorithm.

Given ``u[0..2Q-1]`` and ``U``, the class profile r is the root set of a
degree-Q polynomial built from determinants of the moment Hankel matrix, α
follows from a Vandermonde system in r, and π from U sandwiched between the
inverse Vandermonde and diag(α) factors.

The algebra runs in standardized coordinates ``t = (r - u1)/s`` with
``s^2 = u2 - u1^2`` (the variance of r under α). The construction is
affine-invariant, and in these coordinates the Hankel matrix stays well
scaled even when the r coordinates are close together, where the raw-moment
determinants would vanish into rounding error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import linalg

from ..core.errors import (
    DegenerateModelError,
    DegenerateMomentsError,
    ParameterError,
    RootExtractionError,
    SizeLimitError,
)
from ..core.params import SbmParams
from .estimate import MomentSet

logger = logging.getLogger(__name__)

DEFAULT_SINGULARITY_TOL = 1e-10
DEFAULT_ROOT_IMAG_TOL = 1e-8
DEFAULT_CLAMP_TOL = 1e-6
DEFAULT_DEGENERACY_Z = 4.0
MAX_MOMENT_Q = 6


@dataclass
class RecoveryResult:
    """
    Recovered parameters and diagnostics.

    :ivar params: The recovered (α, π).
    :ivar r_roots: The class profile r, ascending.
    :ivar residuals: ``|B(t_q)| / |D_Q|`` at every root, in standardized coordinates.
    :ivar condition_flags: Non-fatal conditions (clamping, the two-class
        equal-profile path).
    :ivar normalized_det: ``D_Q`` over the product of the Hankel diagonal; a
        scale-free measure of how distinct the r coordinates are.
    """

    params: SbmParams
    r_roots: np.ndarray
    residuals: np.ndarray
    condition_flags: list[str] = field(default_factory=list)
    normalized_det: float | None = None


def standardize(m: MomentSet) -> tuple[float, float]:
    """``(u1, s)`` with ``s^2 = u2 - u1^2``; s is 0 when the variance is not positive."""
    mean = float(m.u[1])
    var = float(m.u[2]) - mean * mean if m.q >= 2 else 0.0
    return mean, float(np.sqrt(var)) if var > 0 else 0.0


def _profile_degenerate(m: MomentSet, singularity_tol: float, degeneracy_z: float) -> bool:
    """Whether the spread of r is indistinguishable from zero."""
    mean, _ = standardize(m)
    var = float(m.u[2]) - mean * mean
    return var <= max(singularity_tol * float(m.u[2]), degeneracy_z * m.variance_stderr())


def _shift_matrix(q: int, mean: float, s: float) -> np.ndarray:
    """T with ``T[i, k] = C(i, k) (-mean)^(i-k) / s^i``, mapping r-powers to t-powers."""
    t = np.zeros((q, q))
    for i in range(q):
        for k in range(i + 1):
            t[i, k] = comb(i, k) * (-mean) ** (i - k) / s**i
    return t


def standardized_moments(m: MomentSet) -> tuple[np.ndarray, np.ndarray]:
    """``(v, V)``: the moments of t = (r - u1)/s in place of r."""
    mean, s = standardize(m)
    n_u = 2 * m.q
    v = np.array(
        [sum(comb(i, k) * m.u[k] * (-mean) ** (i - k) for k in range(i + 1)) / s**i for i in range(n_u)]
    )
    shift = _shift_matrix(m.q, mean, s)
    return v, shift @ m.bigU @ shift.T


def hankel(v: np.ndarray, q: int) -> np.ndarray:
    """The (Q+1)×Q matrix ``M[i, j] = v[i + j]``."""
    return np.array([[v[i + j] for j in range(q)] for i in range(q + 1)])


def characteristic_coefficients(hankel_matrix: np.ndarray) -> np.ndarray:
    """
    ``(-1)^(k+Q) D_k`` for k = 0..Q, lowest degree first.

    D_k is the determinant of the Hankel matrix with row k deleted, so the
    polynomial vanishes exactly at the Q support points of the moments.
    """
    q = hankel_matrix.shape[1]
    return np.array(
        [(-1) ** (k + q) * np.linalg.det(np.delete(hankel_matrix, k, axis=0)) for k in range(q + 1)]
    )


def _roots(coefficients: np.ndarray, imag_tol: float) -> np.ndarray:
    """Real roots of the polynomial, one Newton step each, ascending."""
    highest_first = coefficients[::-1] / coefficients[-1]
    roots = np.roots(highest_first)
    if np.any(np.abs(roots.imag) > imag_tol * np.maximum(1.0, np.abs(roots.real))):
        raise RootExtractionError(f"the characteristic polynomial has complex roots {roots.tolist()}")
    roots = roots.real
    derivative = np.polyder(highest_first)
    slope = np.polyval(derivative, roots)
    safe = slope != 0
    roots[safe] -= np.polyval(highest_first, roots[safe]) / slope[safe]
    return np.sort(roots)


def _check_box(name: str, values: np.ndarray, clamp_tol: float, flags: list[str]) -> np.ndarray:
    if np.any(values < -clamp_tol) or np.any(values > 1 + clamp_tol):
        raise RootExtractionError(f"recovered {name} {values.tolist()} leaves [0, 1] by more than {clamp_tol}")
    if np.any(values < 0) or np.any(values > 1):
        flags.append(f"clamped-{name}")
        logger.warning("recovery: %s clamped into [0, 1] (off by at most %s)", name, clamp_tol)
    return np.clip(values, 0.0, 1.0)


def _oriented_result(m: MomentSet, alpha: np.ndarray, pi: np.ndarray) -> SbmParams:
    params = SbmParams(alpha, pi)
    return params.transposed() if m.orientation == "column" else params


def recover_from_moments(
    m: MomentSet,
    *,
    singularity_tol: float = DEFAULT_SINGULARITY_TOL,
    root_imag_tol: float = DEFAULT_ROOT_IMAG_TOL,
    clamp_tol: float = DEFAULT_CLAMP_TOL,
    degeneracy_z: float = DEFAULT_DEGENERACY_Z,
    max_q: int = MAX_MOMENT_Q,
) -> RecoveryResult:
    """
    Recover (α, π) from ``u`` and ``U``.

    The roots of the characteristic polynomial are the coordinates of r;
    ``α = diag(R^-1 M_Q R^-T)`` with R the Vandermonde matrix of the roots and
    M_Q the leading Q×Q Hankel block; ``π = A^-1 R^-1 U R^-T A^-1`` with
    A = diag(α). Values outside their boxes by at most ``clamp_tol`` are
    clamped and flagged; anything further fails.

    For column-oriented moments the result is transposed back, so it always
    describes the original model.

    :raises DegenerateMomentsError: If the r coordinates are not distinct: the
        variance of r is not above ``max(singularity_tol * u2, degeneracy_z *
        its standard error)``, or the normalized D_Q is below ``singularity_tol``.
    :raises RootExtractionError: On complex roots or out-of-box values.
    :raises SizeLimitError: If Q exceeds ``max_q``.
    """
    q = m.q
    if q > max_q:
        raise SizeLimitError(f"moment recovery is limited to Q <= {max_q}, got Q={q}")
    if q == 1:
        mean = float(m.u[1])
        return RecoveryResult(
            _oriented_result(m, np.ones(1), np.array([[mean]])), np.array([mean]), np.zeros(1), normalized_det=1.0
        )
    if _profile_degenerate(m, singularity_tol, degeneracy_z):
        raise DegenerateMomentsError(
            f"the coordinates of r are not distinct (u2 - u1^2 = {float(m.u[2] - m.u[1] ** 2)!r})"
        )

    mean, s = standardize(m)
    v, big_v = standardized_moments(m)
    full = hankel(v, q)
    coefficients = characteristic_coefficients(full)
    leading = full[:q]
    scale = float(np.prod(np.diag(leading)))
    normalized_det = abs(coefficients[-1]) / scale
    if normalized_det < singularity_tol:
        raise DegenerateMomentsError(
            f"D_Q vanishes (normalized determinant {normalized_det:.3g} < {singularity_tol}); "
            "the coordinates of r are not distinct or a class is empty"
        )

    flags: list[str] = []
    t = _roots(coefficients, root_imag_tol)
    residuals = np.abs(np.polyval(coefficients[::-1], t)) / abs(coefficients[-1])

    vandermonde = t[None, :] ** np.arange(q)[:, None]
    left = linalg.solve(vandermonde, leading)
    a_matrix = linalg.solve(vandermonde, left.T).T
    alpha = np.diag(a_matrix).copy()
    if np.any(alpha <= 0):
        raise RootExtractionError(f"recovered class proportions {alpha.tolist()} are not all positive")
    alpha = _check_box("alpha", alpha, clamp_tol, flags)
    if abs(alpha.sum() - 1.0) > 1e-12:
        flags.append("alpha-renormalized")
    alpha = alpha / alpha.sum()

    inner = linalg.solve(vandermonde, big_v)
    inner = linalg.solve(vandermonde, inner.T).T
    pi = inner / np.outer(alpha, alpha)
    pi = _check_box("pi", pi, clamp_tol, flags)

    r = _check_box("r", mean + s * t, clamp_tol, flags)
    logger.debug("recover_from_moments: r=%s residuals=%s", r.tolist(), residuals.tolist())
    return RecoveryResult(_oriented_result(m, alpha, pi), r, residuals, flags, normalized_det)


def recover_q2_n4(
    m: MomentSet,
    *,
    singularity_tol: float = DEFAULT_SINGULARITY_TOL,
    root_imag_tol: float = DEFAULT_ROOT_IMAG_TOL,
    clamp_tol: float = DEFAULT_CLAMP_TOL,
    degeneracy_z: float = DEFAULT_DEGENERACY_Z,
) -> RecoveryResult:
    """
    Two-class recovery that also covers equal class profiles.

    When r has distinct coordinates this is :func:`recover_from_moments`.
    Otherwise both classes have out-profile ``a = u1``, the model is taken to
    be the balanced affiliation model, and the 3-cycle probability pins it
    down: ``e = cbrt(d - a^3)``, ``α = (1/2, 1/2)``, ``π = [[a+e, a-e], [a-e, a+e]]``.
    If the 2-cycle probability c equals a² the graph is Erdős-Rényi and α
    cannot be found.

    :raises ParameterError: If Q != 2, or if the profiles are equal and c or d is missing.
    :raises DegenerateModelError: If c = a² within tolerance.
    """
    if m.q != 2:
        raise ParameterError(f"the two-class recovery needs Q=2, got Q={m.q}")
    if not _profile_degenerate(m, singularity_tol, degeneracy_z):
        return recover_from_moments(
            m,
            singularity_tol=singularity_tol,
            root_imag_tol=root_imag_tol,
            clamp_tol=clamp_tol,
            degeneracy_z=degeneracy_z,
        )
    if m.d is None or m.c is None:
        raise ParameterError("the two-class recovery needs the 2-cycle and 3-cycle moments c and d")

    a = float(m.u[1])
    c_se = m.stderr.c if m.stderr is not None else 0.0
    if abs(m.c - a * a) <= max(singularity_tol, degeneracy_z * c_se):
        raise DegenerateModelError(
            f"c = a^2 (c={m.c!r}, a={a!r}): the graph is Erdős-Rényi and alpha cannot be found"
        )
    e = float(np.cbrt(m.d - a**3))
    flags = ["equal-profile"]
    pi = _check_box("pi", np.array([[a + e, a - e], [a - e, a + e]]), clamp_tol, flags)
    logger.info("recover_q2_n4: equal class profiles, a=%.17g e=%.17g", a, e)
    return RecoveryResult(
        _oriented_result(m, np.array([0.5, 0.5]), pi),
        np.array([a, a]),
        np.zeros(2),
        flags,
        0.0,
    )
