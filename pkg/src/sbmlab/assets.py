"""Files shipped inside the sbmlab wheel.

They sit under ``sbmlab/data`` and must match a ``[tool.setuptools.package-data]``
pattern in ``pyproject.toml``. Today that is the commented default
configuration written by ``sbmlab config init``.
"""

from importlib.resources import files
from importlib.resources.abc import Traversable

#: Directory inside the package that holds shipped files.
DATA_DIR = "data"


def data_file(name: str) -> Traversable:
    """A shipped file, addressed by its name under ``sbmlab/data``; it need not exist."""
    return files("sbmlab").joinpath(DATA_DIR, name)


def read_data_text(name: str) -> str:
    """
    Read a shipped text file.

    :raises FileNotFoundError: If the wheel does not carry ``name``.
    """
    resource = data_file(name)
    if not resource.is_file():
        raise FileNotFoundError(f"sbmlab/{DATA_DIR}/{name} is not packaged with this install")
    return resource.read_text(encoding="utf-8")
