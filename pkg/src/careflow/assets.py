"""Access to the data files bundled with the package."""

from __future__ import annotations

from importlib import resources

from .errors import AssetReadError


def _root():
    return resources.files("careflow").joinpath("assets")


def asset_names() -> list[str]:
    return sorted(p.name for p in _root().iterdir() if p.name.endswith(".json"))


def asset_text(name: str) -> str:
    if "/" in name or "\\" in name or name.startswith("."):
        raise AssetReadError(f"invalid asset name {name!r}")
    path = _root().joinpath(name)
    try:
        return path.read_text(encoding="utf-8")
    except (FileNotFoundError, NotADirectoryError):
        raise AssetReadError(f"no bundled asset named {name!r}") from None
