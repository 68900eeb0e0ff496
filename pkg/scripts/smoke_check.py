#!/usr/bin/env python3
"""
Basic smoke checks for dcnet module wiring.
"""

from __future__ import annotations

import importlib
import inspect
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

REQUIRED_OPS = {
    "dataset": {"load_delimited", "phi1", "phi2", "make_grid", "load_source"},
    "model": {"activate", "forward", "loss", "save_weights", "load_weights"},
    "dc_core": {"eval_hi", "eval_gi", "eval_dc", "subgrad_h"},
    "lp_build": {"build_step2_lp", "extract_weights", "substitution_point", "dump_lp"},
    "lp_solver": {"solve"},
    "dca": {"init_weights", "run_dca"},
    "baseline": {"loss_subgradient", "train_baseline"},
    "verify": {"oracle_loss", "oracle_min_surrogate", "oracle_vertex_lp", "vertex_oracle_applies"},
    "settings": {"get_setting", "dca_config", "solver_config", "baseline_config", "grid_spec"},
    "cli": {"cmd_train", "cmd_eval", "cmd_table1", "main"},
}


def main() -> int:
    errors: list[str] = []

    for module_name, ops in REQUIRED_OPS.items():
        try:
            module = importlib.import_module(module_name)
        except Exception as exc:
            errors.append(f"Import failed for {module_name}: {exc}")
            continue
        public_funcs = {
            name
            for name, obj in inspect.getmembers(module, inspect.isfunction)
            if not name.startswith("_")
        }
        missing = sorted(ops - public_funcs)
        if missing:
            errors.append(f"{module_name} is missing: {', '.join(missing)}")

    if errors:
        print("Smoke check failed:")
        for err in errors:
            print(f"- {err}")
        return 1

    print("Smoke check passed.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
