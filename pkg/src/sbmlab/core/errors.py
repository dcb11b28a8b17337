"""Exceptions raised by sbmlab.

Every exception derives from :class:`SbmError` and carries an ``exit_code``.
The command line maps a failure to its exit status through that attribute
alone, so the taxonomy lives here rather than in :mod:`sbmlab.cli`:

- 3: validation or assumption failure (bad parameters, files, bounds)
- 4: numeric degeneracy (vanishing moment determinants, impossible models)
- 5: size limit (enumeration cap, permutation or moment limits)
"""

EXIT_VALIDATION = 3
EXIT_DEGENERATE = 4
EXIT_SIZE_LIMIT = 5


class SbmError(Exception):
    """
    Base class for errors raised by the block-model library.

    :ivar kind: A short machine-readable name, printed by the CLI before the
        message (``error: <kind>: <message>``).
    :ivar exit_code: The process exit status the CLI uses for this error.
    """

    kind = "error"
    exit_code = EXIT_VALIDATION

    def __init__(self, message):
        super().__init__(message)


class ParameterError(SbmError):
    """Parameters, graphs, or membership matrices violate their invariants."""

    kind = "invalid-parameters"


class InvalidBoundError(SbmError):
    """A bound given to an assumption check lies outside its admissible range."""

    kind = "invalid-bound"

    def __init__(self, name, value, admissible):
        super().__init__(f"{name}={value!r} is outside the admissible range {admissible}")


class ShapeError(SbmError):
    """Two arguments disagree on the class count or the vertex count."""

    kind = "shape"


class FormatError(SbmError):
    """A params, graph, fit, or moment file could not be parsed."""

    kind = "format"

    def __init__(self, path, detail):
        super().__init__(f"{path}: {detail}")


class AssumptionError(SbmError):
    """
    One or more of the model assumptions A1-A4 fails.

    Raised by the command line when a report carries violations; the library
    itself reports violations as data and never raises this.
    """

    kind = "assumption"

    def __init__(self, violations):
        detail = "; ".join(f"{name}: {why}" for name, why in violations)
        super().__init__(f"assumptions violated: {detail}")
        self.violations = list(violations)


class SizeLimitError(SbmError):
    """A computation would exceed a configured size limit."""

    kind = "size-limit"
    exit_code = EXIT_SIZE_LIMIT


class DegenerateModelError(SbmError):
    """
    The model admits no usable answer.

    Raised when every label vector is impossible under the parameters, and on
    the Erdős-Rényi branch of the two-class recovery where the class
    proportions cannot be found.
    """

    kind = "degenerate-model"
    exit_code = EXIT_DEGENERATE


class DegenerateMomentsError(SbmError):
    """The moment matrix is singular: the coordinates of r coincide or a class is empty."""

    kind = "degenerate-moments"
    exit_code = EXIT_DEGENERATE


class RootExtractionError(SbmError):
    """
    The characteristic polynomial's roots cannot be turned into parameters.

    Complex roots, roots outside [0, 1], and recovered proportions or
    connectivities outside their boxes by more than the clamp tolerance all
    land here.
    """

    kind = "root-extraction"
    exit_code = EXIT_DEGENERATE
