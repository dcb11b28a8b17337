"""
Settings for the sbmlab command line.

The section models below (:class:`ExactSettings`, :class:`VariationalSettings`,
:class:`MomentSettings`, :class:`SymmetrySettings`, :class:`RuntimeSettings`)
declare every knob the CLI can turn, with its type, range, default and help
text. Field defaults are the library's own module constants, so a setting left
alone behaves exactly like calling the library function without that keyword.

A setting ``[s] k`` is read from the environment as ``SBMLAB__S__K``; see
:func:`env_name`. :func:`resolve` stacks four layers, later ones winning:

1. the field defaults,
2. ``sbmlab.toml`` (located by :func:`find_config_file`),
3. ``SBMLAB__*`` environment variables,
4. command-line flags, passed in as :class:`Override` values,

and remembers which layer supplied each value, which ``sbmlab config show``
prints next to it.

``SBMLAB_CONFIG`` (a config file path) and ``SBMLAB_HOME`` (a directory holding
``sbmlab.toml``) are read while locating the file, before any setting exists,
and so carry a single underscore. ``SBM_LAB_SEED`` belongs to
:func:`sbmlab.core.rng.resolve_seed`.

Nothing outside :mod:`sbmlab.cli` imports this module.
"""

from __future__ import annotations

import json
import os
import tomllib
import warnings
from collections.abc import Iterator, Mapping, Sequence
from functools import cache
from pathlib import Path
from typing import Any, Literal, NamedTuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator
from pydantic.fields import FieldInfo

from .assets import read_data_text
from .core.symmetry import DEFAULT_SYMMETRY_TOL, MAX_PERMUTATION_Q
from .inference.exact import DEFAULT_CHUNK_SIZE, DEFAULT_ENUMERATION_CAP
from .inference.variational import (
    DEFAULT_BACKTRACK_STEPS,
    DEFAULT_DAMPING,
    DEFAULT_INNER_ITERS,
    DEFAULT_MAX_ITER,
    DEFAULT_RESTARTS,
    DEFAULT_TAU_FLOOR,
    DEFAULT_TOL,
)
from .moments.recover import (
    DEFAULT_CLAMP_TOL,
    DEFAULT_DEGENERACY_Z,
    DEFAULT_ROOT_IMAG_TOL,
    DEFAULT_SINGULARITY_TOL,
    MAX_MOMENT_Q,
)

#: `[s] k` is read from ENV_PREFIX + "__" + S + "__" + K.
ENV_PREFIX = "SBMLAB"
ENV_SEPARATOR = "__"

#: Consulted while locating the config file.
CONFIG_PATH_ENV = "SBMLAB_CONFIG"
HOME_ENV = "SBMLAB_HOME"

#: The file name searched for and written by `config init`.
CONFIG_FILENAME = "sbmlab.toml"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigError(Exception):
    """A config file is missing or malformed, or a setting is out of range."""


class _Section(BaseModel):
    # Unknown keys are errors.
    model_config = ConfigDict(extra="forbid")


class ExactSettings(_Section):
    """Exhaustive enumeration over label vectors."""

    enumeration_cap: int = Field(
        default=DEFAULT_ENUMERATION_CAP, ge=1, description="Largest Q^n any exact computation may enumerate."
    )
    chunk_size: int = Field(default=DEFAULT_CHUNK_SIZE, ge=1, description="Label vectors per enumeration chunk.")


class VariationalSettings(_Section):
    """Mean-field variational EM."""

    restarts: int = Field(default=DEFAULT_RESTARTS, ge=1, description="Initializations per fit; the best J wins.")
    max_iter: int = Field(default=DEFAULT_MAX_ITER, ge=1, description="Iteration limit per restart.")
    tol: float = Field(default=DEFAULT_TOL, gt=0, description="Stop once J gains less than this (absolute).")
    damping: float = Field(
        default=DEFAULT_DAMPING, ge=0, lt=1, description="Weight kept on the old tau row in each fixed-point step."
    )
    inner_iters: int = Field(default=DEFAULT_INNER_ITERS, ge=1, description="Fixed-point sweeps per iteration.")
    tau_floor: float = Field(default=DEFAULT_TAU_FLOOR, ge=0, lt=1, description="Floor applied to tau entries.")
    backtrack_steps: int = Field(
        default=DEFAULT_BACKTRACK_STEPS, ge=0, description="Damping increases tried before a tau step stalls."
    )


class MomentSettings(_Section):
    """Moment estimation and recovery."""

    singularity_tol: float = Field(
        default=DEFAULT_SINGULARITY_TOL, gt=0, description="Threshold on the normalized moment determinant."
    )
    root_imag_tol: float = Field(
        default=DEFAULT_ROOT_IMAG_TOL, gt=0, description="Largest imaginary part accepted on a polynomial root."
    )
    clamp_tol: float = Field(
        default=DEFAULT_CLAMP_TOL, ge=0, description="How far a recovered value may leave its box and be clamped."
    )
    degeneracy_z: float = Field(
        default=DEFAULT_DEGENERACY_Z,
        ge=0,
        description="Standard errors of the r spread below which empirical moments count as degenerate.",
    )
    max_q: int = Field(default=MAX_MOMENT_Q, ge=1, le=MAX_MOMENT_Q, description="Largest Q moment recovery accepts.")
    orientation: Literal["row", "column"] = Field(
        default="row", description="row uses r = pi.alpha; column uses the transposed graph."
    )


class SymmetrySettings(_Section):
    """Label switching."""

    tol: float = Field(default=DEFAULT_SYMMETRY_TOL, ge=0, description="Tolerance when testing pi for symmetries.")
    max_q: int = Field(
        default=MAX_PERMUTATION_Q, ge=1, le=10, description="Largest Q for which all Q! permutations are tried."
    )


class RuntimeSettings(_Section):
    """Process-wide behaviour."""

    threads: int = Field(default=1, ge=1, description="Worker threads for enumeration, restarts, and sweeps.")
    log_level: str = Field(default="WARNING", description="Logging level for messages on standard error.")
    seed: int | None = Field(default=None, ge=0, description="Seed used when a command gets no --seed.")

    @field_validator("log_level")
    @classmethod
    def _check_level(cls, level: str) -> str:
        if level.upper() not in LOG_LEVELS:
            raise ValueError(f"must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
        return level.upper()


class Settings(BaseModel):
    """All five sections; constructible with no arguments."""

    model_config = ConfigDict(extra="forbid")

    exact: ExactSettings = ExactSettings()
    variational: VariationalSettings = VariationalSettings()
    moments: MomentSettings = MomentSettings()
    symmetry: SymmetrySettings = SymmetrySettings()
    runtime: RuntimeSettings = RuntimeSettings()

    def advisories(self) -> list[str]:
        """Non-fatal warnings about the effective configuration, printed by ``config show``."""
        notes = []
        if self.exact.chunk_size > self.exact.enumeration_cap:
            notes.append(
                f"exact.chunk_size ({self.exact.chunk_size}) exceeds exact.enumeration_cap "
                f"({self.exact.enumeration_cap}); every enumeration fits in one chunk."
            )
        if self.exact.enumeration_cap > 2**30:
            notes.append(
                f"exact.enumeration_cap is {self.exact.enumeration_cap}; enumerations that large can take hours."
            )
        return notes


# --- Schema ----------------------------------------------------------------


@cache
def _fields() -> dict[tuple[str, str], FieldInfo]:
    return {
        (section, key): info
        for section, outer in Settings.model_fields.items()
        for key, info in outer.annotation.model_fields.items()  # type: ignore[union-attr]
    }


@cache
def _env_lookup() -> dict[str, tuple[str, str]]:
    return {env_name(section, key): (section, key) for section, key in _fields()}


def section_names() -> tuple[str, ...]:
    """Sections in declaration order."""
    return tuple(Settings.model_fields)


def iter_schema() -> Iterator[tuple[str, str, FieldInfo]]:
    """Yield ``(section, key, field_info)`` for every setting, in declaration order."""
    for (section, key), info in _fields().items():
        yield section, key, info


def env_name(section: str, key: str) -> str:
    """
    The environment variable for one setting.

    ``env_name("exact", "enumeration_cap") == "SBMLAB__EXACT__ENUMERATION_CAP"``.
    """
    return ENV_SEPARATOR.join((ENV_PREFIX, section, key)).upper()


def describe(section: str, key: str) -> str:
    return _fields()[(section, key)].description or ""


# --- Layers ----------------------------------------------------------------


class Override(NamedTuple):
    """A value for one setting and the layer (``file``, ``env``, ``cli``) that supplied it."""

    section: str
    key: str
    value: Any
    layer: str
    origin: str = ""

    def describe_source(self) -> str:
        return f"{self.layer}: {self.origin}" if self.origin else self.layer


def _candidates(
    explicit: str | os.PathLike[str] | None, environ: Mapping[str, str], cwd: str | os.PathLike[str]
) -> Iterator[tuple[Path, str | None]]:
    """Config file locations in search order, each with whoever demanded it (``None`` if merely searched)."""
    if explicit:
        yield Path(explicit).expanduser(), "--config"
    if demanded := environ.get(CONFIG_PATH_ENV):
        yield Path(demanded).expanduser(), CONFIG_PATH_ENV
    yield Path(cwd) / CONFIG_FILENAME, None
    if home := environ.get(HOME_ENV):
        yield Path(home).expanduser() / CONFIG_FILENAME, None
    if user := environ.get("HOME"):
        yield Path(user) / ".config" / "sbmlab" / CONFIG_FILENAME, None


def find_config_file(
    explicit: str | os.PathLike[str] | None = None,
    environ: Mapping[str, str] | None = None,
    cwd: str | os.PathLike[str] | None = None,
) -> Path | None:
    """
    The config file to read, or ``None`` when there is none.

    Tried in order: ``explicit`` (the ``--config`` flag), ``$SBMLAB_CONFIG``,
    ``./sbmlab.toml``, ``$SBMLAB_HOME/sbmlab.toml``, ``~/.config/sbmlab/sbmlab.toml``.

    :raises ConfigError: If ``--config`` or ``SBMLAB_CONFIG`` names a missing file.
    """
    environ = os.environ if environ is None else environ
    for path, demanded_by in _candidates(explicit, environ, Path.cwd() if cwd is None else cwd):
        if path.is_file():
            return path
        if demanded_by:
            raise ConfigError(f"Config file not found: {path} (requested by {demanded_by})")
    return None


def default_config_path(
    environ: Mapping[str, str] | None = None,
    cwd: str | os.PathLike[str] | None = None,
) -> Path:
    """Where ``sbmlab config init`` writes: ``$SBMLAB_HOME`` when set, else the working directory."""
    environ = os.environ if environ is None else environ
    home = environ.get(HOME_ENV)
    directory = Path(home).expanduser() if home else Path(Path.cwd() if cwd is None else cwd)
    return directory / CONFIG_FILENAME


def default_config_text() -> str:
    """The commented default ``sbmlab.toml`` shipped in ``sbmlab/data``."""
    return read_data_text(CONFIG_FILENAME)


def write_default_config(
    *,
    force: bool = False,
    environ: Mapping[str, str] | None = None,
    cwd: str | os.PathLike[str] | None = None,
) -> Path:
    """
    Write :func:`default_config_text` to :func:`default_config_path` and return the path.

    :raises ConfigError: If the file exists and ``force`` is false, or it cannot be written.
    """
    path = default_config_path(environ, cwd)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w" if force else "x", encoding="utf-8") as handle:
            handle.write(default_config_text())
    except FileExistsError:
        raise ConfigError(f"{path} already exists; pass --force to replace it.") from None
    except OSError as e:
        raise ConfigError(f"Could not write {path}: {e.strerror or e}") from e
    return path


def _file_layer(path: Path | None) -> list[Override]:
    if path is None:
        return []
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Could not parse config file {path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"Could not read config file {path}: {e.strerror or e}") from e

    loose = [name for name, table in data.items() if not isinstance(table, dict)]
    if loose:
        tables = ", ".join(f"[{name}]" for name in section_names())
        raise ConfigError(f"Invalid config file {path}: {', '.join(loose)} must be a table, one of {tables}")
    return [Override(section, key, value, "file", str(path)) for section, table in data.items() for key, value in table.items()]


def _env_layer(environ: Mapping[str, str]) -> list[Override]:
    """
    Settings from ``SBMLAB__SECTION__KEY`` variables, in sorted name order.

    A prefixed variable that names no setting is skipped with a warning.
    """
    lookup = _env_lookup()
    prefix = ENV_PREFIX + ENV_SEPARATOR
    layer = []
    for name in sorted(n for n in environ if n.startswith(prefix)):
        if name in lookup:
            section, key = lookup[name]
            layer.append(Override(section, key, environ[name], "env", name))
        elif name.count(ENV_SEPARATOR) != 2 or name.endswith(ENV_SEPARATOR):
            warnings.warn(f"Ignoring malformed setting variable {name!r}; expected {prefix}SECTION__KEY.", stacklevel=3)
        else:
            warnings.warn(f"Ignoring {name!r}: no such setting.", stacklevel=3)
    return layer


# --- Resolution ------------------------------------------------------------


class ResolvedSettings(Settings):
    """:class:`Settings` that remember which layer supplied each value."""

    _sources: dict[tuple[str, str], Override] = PrivateAttr(default_factory=dict)

    def source(self, section: str, key: str) -> str:
        """``"default"``, or the layer and origin of the winning override, e.g. ``"env: SBMLAB__RUNTIME__THREADS"``."""
        winner = self._sources.get((section, key))
        return "default" if winner is None else winner.describe_source()


def resolve(
    overrides: Sequence[Override] = (),
    *,
    config_path: str | os.PathLike[str] | None = None,
    environ: Mapping[str, str] | None = None,
    cwd: str | os.PathLike[str] | None = None,
) -> ResolvedSettings:
    """
    Stack the file, environment and ``overrides`` layers on the defaults and validate.

    ``overrides`` come last, so command-line flags win; among them, later
    entries win over earlier ones.

    :raises ConfigError: If a file is missing or malformed, or a value is out of range.
    """
    environ = os.environ if environ is None else environ
    path = find_config_file(config_path, environ, cwd)

    winners: dict[tuple[str, str], Override] = {}
    for override in (*_file_layer(path), *_env_layer(environ), *overrides):
        winners[(override.section, override.key)] = override

    nested: dict[str, dict[str, Any]] = {}
    for (section, key), override in winners.items():
        nested.setdefault(section, {})[key] = override.value
    try:
        settings = ResolvedSettings.model_validate(nested)
    except ValidationError as e:
        raise ConfigError(_explain(e, winners, path)) from e
    settings._sources = winners
    return settings


def _explain(error: ValidationError, winners: dict[tuple[str, str], Override], path: Path | None) -> str:
    """One line per pydantic error, naming the layer that supplied the bad value."""
    lines = ["Invalid configuration:"]
    for problem in error.errors():
        loc = tuple(str(part) for part in problem["loc"])
        supplied = winners.get(loc[:2]) if len(loc) >= 2 else None
        blame = f" (set by {supplied.describe_source()})" if supplied else ""
        lines.append(f"  {'.'.join(loc) or 'settings'}: {problem['msg']}{blame}")
    if path is not None:
        lines.append(f"Config file: {path}")
    return "\n".join(lines)


def format_settings(settings: ResolvedSettings, *, as_json: bool = False) -> str:
    """
    Every effective value with its source: an aligned table, or JSON for scripts.

    The JSON form is ``{"settings": {section: {key: {"value", "source"}}}, "advisories": [...]}``.
    """
    values = {(section, key): getattr(getattr(settings, section), key) for section, key, _ in iter_schema()}

    if as_json:
        tree: dict[str, dict[str, Any]] = {}
        for (section, key), value in values.items():
            tree.setdefault(section, {})[key] = {"value": value, "source": settings.source(section, key)}
        return json.dumps({"settings": tree, "advisories": settings.advisories()}, indent=2)

    shown = {name: "<unset>" if value is None else str(value) for name, value in values.items()}
    key_width = max(len(key) for _, key in shown)
    value_width = max(map(len, shown.values()))
    blocks = []
    for section in section_names():
        rows = [
            f"  {key:<{key_width}}  {text:<{value_width}}  ({settings.source(section, key)})"
            for (s, key), text in shown.items()
            if s == section
        ]
        blocks.append("\n".join([f"[{section}]", *rows]))
    if notes := settings.advisories():
        blocks.append("\n".join(f"warning: {note}" for note in notes))
    return "\n\n".join(blocks)
