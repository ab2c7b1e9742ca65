"""Run configuration loaded from TOML.

Recognized key paths::

    grid.m
    params.R  params.kappa  params.sigma  params.n
    dio.r  dio.K
    ic.kind  ic.amplitude  ic.seed
    time.t_end  time.dt_max  time.cfl  time.sample_stride
    functional.big_n  functional.beta  functional.gamma
    output.dir  output.checkpoint_stride
    compare.params.*  compare.t_end        (second branch for ``compare``)

``grid.m``, ``params.n``, ``ic.kind`` and ``time.t_end`` are required; every
error names the offending path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import tomli

from .diagnostics import FunctionalConfig, default_gamma
from .errors import ConfigError
from .initial import KINDS
from .spectral import Grid
from .system import Params
from .timestepper import StepperConfig

_MISSING = object()
_SECTIONS = {
    "grid": {"m"},
    "params": {"R", "kappa", "sigma", "n"},
    "dio": {"r", "K"},
    "ic": {"kind", "amplitude", "seed"},
    "time": {"t_end", "dt_max", "cfl", "sample_stride"},
    "functional": {"big_n", "beta", "gamma"},
    "output": {"dir", "checkpoint_stride"},
    "compare": {"params", "t_end"},
}


@dataclass(frozen=True)
class RunConfig:
    m: int
    params: Params
    r: float
    K: int
    ic_kind: str
    amplitude: float
    seed: int
    stepper: StepperConfig
    functional: FunctionalConfig
    out_dir: Path
    checkpoint_stride: int
    compare_params: Params | None = None
    compare_t_end: float | None = None

    @property
    def grid(self) -> Grid:
        return Grid(self.m)


def _get(table: dict, path: str, kind, default=_MISSING):
    node = table
    parts = path.split(".")
    for part in parts:
        if not isinstance(node, dict) or part not in node:
            if default is _MISSING:
                raise ConfigError("required key is missing", path)
            return default
        node = node[part]
    return _coerce(node, path, kind)


def _coerce(value, path, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    if kind == "vec3":
        if not isinstance(value, list) or len(value) != 3:
            raise ConfigError(f"expected a list of 3 numbers, got {value!r}", path)
        return tuple(_coerce(v, path, float) for v in value)
    raise TypeError(kind)


def _check_keys(raw: dict) -> None:
    for section, value in raw.items():
        if section not in _SECTIONS:
            raise ConfigError("unknown section", section)
        if not isinstance(value, dict):
            raise ConfigError("expected a table", section)
        for key in value:
            if key not in _SECTIONS[section]:
                raise ConfigError("unknown key", f"{section}.{key}")
    nested = raw.get("compare", {}).get("params", {})
    if not isinstance(nested, dict):
        raise ConfigError("expected a table", "compare.params")
    for key in nested:
        if key not in _SECTIONS["params"]:
            raise ConfigError("unknown key", f"compare.params.{key}")


def _params(raw: dict, prefix: str, base: Params | None = None) -> Params:
    fallback = base or Params()
    values = {
        "n": _get(raw, f"{prefix}.n", "vec3", fallback.n if base else _MISSING),
        "R": _get(raw, f"{prefix}.R", float, fallback.R),
        "kappa": _get(raw, f"{prefix}.kappa", float, fallback.kappa),
        "sigma": _get(raw, f"{prefix}.sigma", float, fallback.sigma),
    }
    try:
        return Params(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), prefix) from exc


def parse_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a parsed TOML document."""
    _check_keys(raw)
    m = _get(raw, "grid.m", int)
    try:
        Grid(m)
    except ValueError as exc:
        raise ConfigError(str(exc), "grid.m") from exc
    params = _params(raw, "params")
    r = _get(raw, "dio.r", float, 2.5)
    big_k = _get(raw, "dio.K", int, 16)
    if not r > 2:
        raise ConfigError(f"must exceed 2, got {r}", "dio.r")
    if big_k < 1:
        raise ConfigError(f"must be >= 1, got {big_k}", "dio.K")
    kind = _get(raw, "ic.kind", str)
    if kind not in KINDS:
        raise ConfigError(f"unknown generator {kind!r}; expected one of {', '.join(KINDS)}", "ic.kind")
    amplitude = _get(raw, "ic.amplitude", float, 1e-2)
    if not amplitude > 0:
        raise ConfigError("must be positive", "ic.amplitude")
    seed = _get(raw, "ic.seed", int, 0)
    stepper = StepperConfig(
        t_end=_get(raw, "time.t_end", float),
        dt_max=_get(raw, "time.dt_max", float, 0.05),
        cfl=_get(raw, "time.cfl", float, 0.4),
        sample_stride=_get(raw, "time.sample_stride", int, 1),
    )
    functional = FunctionalConfig(
        r=r,
        gamma=_get(raw, "functional.gamma", float, default_gamma(params.n_vec)),
        big_n=_get(raw, "functional.big_n", float, None),
        beta=_get(raw, "functional.beta", float, None),
    )
    out_dir = Path(_get(raw, "output.dir", str, "out"))
    if base_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    checkpoint_stride = _get(raw, "output.checkpoint_stride", int, 0)
    if checkpoint_stride < 0:
        raise ConfigError("must be >= 0", "output.checkpoint_stride")
    compare_params = compare_t_end = None
    if "compare" in raw:
        compare_params = _params(raw, "compare.params", params)
        compare_t_end = _get(raw, "compare.t_end", float, stepper.t_end)
        if not compare_t_end >= 0:
            raise ConfigError("must be nonnegative", "compare.t_end")
    return RunConfig(
        m=m,
        params=params,
        r=r,
        K=big_k,
        ic_kind=kind,
        amplitude=amplitude,
        seed=seed,
        stepper=stepper,
        functional=functional,
        out_dir=out_dir,
        checkpoint_stride=checkpoint_stride,
        compare_params=compare_params,
        compare_t_end=compare_t_end,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from exc
    return parse_config(raw, path.parent)
