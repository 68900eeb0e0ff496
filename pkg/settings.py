"""
settings.py — Runtime configuration.

Values come from, in order:
  1. environment variables DCNET_<SECTION>_<KEY> (a local .env is loaded first)
  2. the TOML file named by DCNET_CONFIG (default ./dcnet.toml), table [section]
  3. the built-in default

Example dcnet.toml:

    [dca]
    max_iters = 200
    time_budget_secs = 1800

    [solver]
    max_pivots = 200000

    [table]
    dca_seeds = 5

    [system]
    log_level = "INFO"
"""

from __future__ import annotations

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable

from dotenv import load_dotenv

from baseline import BaselineConfig, OptimizerKind
from dataset import GridSpec
from dca import DcaConfig
from lp_solver import SolverConfig

logger = logging.getLogger(__name__)

CONFIG_ENV = "DCNET_CONFIG"
DEFAULT_CONFIG_FILE = "dcnet.toml"
ENV_PREFIX = "DCNET"

load_dotenv()


@lru_cache(maxsize=1)
def _config_file() -> dict[str, Any]:
    path = Path(os.getenv(CONFIG_ENV, DEFAULT_CONFIG_FILE)).expanduser()
    if not path.exists():
        return {}
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        logger.warning("ignoring config file %s: %s", path, exc)
        return {}


def reload() -> None:
    """Forget the cached config file (tests switch DCNET_CONFIG)."""
    _config_file.cache_clear()


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in {"1", "true", "yes", "on"}:
        return True
    if text in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def get_setting(section: str, key: str, default: Any = None, cast: Callable[[Any], Any] | None = None) -> Any:
    """Return env > TOML > default, cast with `cast`; a failed cast falls back to the default."""
    cast = cast or (type(default) if default is not None else None)
    if cast is bool:
        cast = _as_bool

    raw: Any = os.getenv(f"{ENV_PREFIX}_{section.upper()}_{key.upper()}", "").strip()
    if raw == "":
        try:
            raw = dict(_config_file().get(section, {})).get(key)
        except (TypeError, ValueError):
            raw = None
    if raw is None or raw == "":
        return default
    if cast is None:
        return raw
    try:
        return cast(raw)
    except (TypeError, ValueError):
        logger.warning("setting %s.%s=%r is not a valid %s; using %r", section, key, raw, getattr(cast, "__name__", cast), default)
        return default


def _pick(overrides: dict[str, Any], section: str, key: str, default: Any) -> Any:
    value = overrides.get(key)
    return value if value is not None else get_setting(section, key, default)


def dca_config(**overrides: Any) -> DcaConfig:
    base = DcaConfig()
    return DcaConfig(
        max_iters=_pick(overrides, "dca", "max_iters", base.max_iters),
        eps_objective=_pick(overrides, "dca", "eps_objective", base.eps_objective),
        relative_eps=_pick(overrides, "dca", "relative_eps", base.relative_eps),
        time_budget_secs=_pick(overrides, "dca", "time_budget_secs", base.time_budget_secs),
        trust_radius=_pick(overrides, "dca", "trust_radius", base.trust_radius),
        seed=_pick(overrides, "dca", "seed", base.seed),
        init_scale=_pick(overrides, "dca", "init_scale", base.init_scale),
    )


def solver_config(**overrides: Any) -> SolverConfig:
    base = SolverConfig()
    return SolverConfig(
        feasibility_tol=_pick(overrides, "solver", "feasibility_tol", base.feasibility_tol),
        optimality_tol=_pick(overrides, "solver", "optimality_tol", base.optimality_tol),
        max_pivots=_pick(overrides, "solver", "max_pivots", base.max_pivots),
        anti_cycling=_pick(overrides, "solver", "anti_cycling", base.anti_cycling),
        bland_after=_pick(overrides, "solver", "bland_after", base.bland_after),
        refactor_every=_pick(overrides, "solver", "refactor_every", base.refactor_every),
        time_limit_secs=overrides.get("time_limit_secs"),
        pivot_log=overrides.get("pivot_log"),
    )


def baseline_config(optimizer: OptimizerKind | str, **overrides: Any) -> BaselineConfig:
    kind = OptimizerKind(optimizer)
    base = BaselineConfig(optimizer=kind)
    step = overrides.get("step_size")
    if step is None:
        step = get_setting("baseline", f"{kind.value}_step_size", base.step_size)
    return BaselineConfig(
        optimizer=kind,
        step_size=step,
        beta1=_pick(overrides, "baseline", "beta1", base.beta1),
        beta2=_pick(overrides, "baseline", "beta2", base.beta2),
        epsilon=_pick(overrides, "baseline", "epsilon", base.epsilon),
        max_epochs=_pick(overrides, "baseline", "max_epochs", base.max_epochs),
        seed=_pick(overrides, "baseline", "seed", base.seed),
        init_scale=_pick(overrides, "baseline", "init_scale", base.init_scale),
    )


def grid_spec(**overrides: Any) -> GridSpec:
    base = GridSpec()
    return GridSpec(
        points_per_axis=_pick(overrides, "grid", "points_per_axis", base.points_per_axis),
        lo=_pick(overrides, "grid", "lo", base.lo),
        hi=_pick(overrides, "grid", "hi", base.hi),
    )


def log_level() -> str:
    return str(get_setting("system", "log_level", "INFO")).upper()


def default_jobs() -> int:
    jobs = get_setting("system", "jobs", os.cpu_count() or 1)
    return max(1, min(int(jobs), 64))


def table_dca_seeds() -> int:
    """Seeds each DCA table cell may try, sharing the cell's time budget."""
    seeds = get_setting("table", "dca_seeds", 5)
    return max(1, min(int(seeds), 32))
