"""Named model presets, layer-list parsing and TOML config loading.

A preset bundles the tuned (tau, beta, candidate layer) triple for a model
family.  ``parse_layer_spec`` understands the compact strings used on the
command line ("18-32:even", "31-40", "2,4,6").  ``load_config_file`` reads a
TOML table of the same keys the CLI exposes; explicit flags always win over
file values.
"""

import sys
from dataclasses import dataclass
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError

__all__ = [
    "Preset",
    "PRESETS",
    "get_preset",
    "parse_layer_spec",
    "load_config_file",
    "merge_config",
]


@dataclass(frozen=True)
class Preset:
    name: str
    tau: float
    beta: float
    candidate_layers: tuple[int, ...]


def _even(lo: int, hi: int) -> tuple[int, ...]:
    return tuple(l for l in range(lo, hi + 1) if l % 2 == 0)


PRESETS = {
    "llama2-7b": Preset("llama2-7b", tau=0.1, beta=5.0, candidate_layers=_even(18, 32)),
    "llama2-13b": Preset("llama2-13b", tau=0.1, beta=0.25, candidate_layers=tuple(range(31, 41))),
    "mistral-7b-v0.1": Preset(
        "mistral-7b-v0.1", tau=0.1, beta=0.25, candidate_layers=_even(18, 32)
    ),
    "llama3-8b": Preset("llama3-8b", tau=0.25, beta=0.25, candidate_layers=_even(18, 32)),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


def parse_layer_spec(spec: str) -> tuple[int, ...]:
    """Parse a candidate-layer string into a sorted tuple of layer indices.

    Accepted forms: "7" (single layer), "2,4,6" (explicit list),
    "18-32" (inclusive range), "18-32:even" / "18-32:odd" (filtered range).
    """
    s = spec.strip()
    if not s:
        raise ConfigurationError("empty layer spec")
    if "," in s:
        try:
            layers = tuple(int(p.strip()) for p in s.split(","))
        except ValueError:
            raise ConfigurationError(f"bad layer list {spec!r}") from None
    elif "-" in s:
        body, _, parity = s.partition(":")
        try:
            lo_s, hi_s = body.split("-")
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise ConfigurationError(f"bad layer range {spec!r}") from None
        if hi < lo:
            raise ConfigurationError(f"descending layer range {spec!r}")
        layers = tuple(range(lo, hi + 1))
        if parity == "even":
            layers = tuple(l for l in layers if l % 2 == 0)
        elif parity == "odd":
            layers = tuple(l for l in layers if l % 2 == 1)
        elif parity:
            raise ConfigurationError(
                f"bad range filter {parity!r} in {spec!r}; expected 'even' or 'odd'"
            )
    else:
        try:
            layers = (int(s),)
        except ValueError:
            raise ConfigurationError(f"bad layer spec {spec!r}") from None
    if not layers:
        raise ConfigurationError(f"layer spec {spec!r} selects no layers")
    if len(set(layers)) != len(layers):
        raise ConfigurationError(f"duplicate layers in {spec!r}")
    if any(l < 1 for l in layers):
        raise ConfigurationError(f"layer indices must be >= 1 in {spec!r}")
    return tuple(sorted(layers))


_KNOWN_KEYS = {
    "method", "tau", "beta", "layers", "layer_strategy", "backend", "base_url",
    "seed", "mock_spec", "dataset", "docs", "question", "top_k",
    "max_new_tokens", "overflow", "out", "trace", "parallelism", "preset",
}


def load_config_file(path: str) -> dict:
    """Read a flat TOML table of CLI option defaults."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML in {path}: {exc}") from None
    unknown = set(data) - _KNOWN_KEYS
    if unknown:
        raise ConfigurationError(
            f"unknown config keys in {path}: {', '.join(sorted(unknown))}"
        )
    return data


def merge_config(file_values: dict, flag_values: dict) -> dict:
    """Overlay explicitly given flags on file values; flags win."""
    merged = dict(file_values)
    for k, v in flag_values.items():
        if v is not None:
            merged[k] = v
    return merged
