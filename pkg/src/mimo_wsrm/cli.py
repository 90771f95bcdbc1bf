"""Command-line entry point.

Configuration is resolved in three layers: package defaults, an optional
JSON file (``--config``), then individual flags. Exit codes: 0 on success,
1 for configuration errors, 2 for runtime or solver failures.
"""

import argparse
import json
import logging
import sys

from .channel_model import DEFAULT_USER_WEIGHTS, SystemConfig
from .exceptions import ConfigError, WsrmError
from .experiments import DEFAULT_SWEEP_DBW, PRESETS, ExperimentSpec, run_experiment
from .subproblem import SolverOptions

log = logging.getLogger("mimo_wsrm")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# keys accepted in the JSON config file besides SystemConfig fields
SPEC_KEYS = ("preset", "powers_dbw", "seeds", "modes", "out_dir", "workers", "solver")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _seeds(text):
    """``"3"``, ``"0,4,7"`` or a half-open range ``"0:20"``."""
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return list(range(lo, hi))
    return [int(x) for x in text.split(",") if x.strip()]


def _powers(text):
    """Comma list or ``start:stop:step`` (inclusive stop)."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(n)]
    return _floats(text)


def build_parser():
    p = _Parser(prog="mimo-wsrm", description=__doc__.splitlines()[0])
    p.add_argument("--preset", choices=PRESETS, help="experiment to run (default single_run)")
    p.add_argument("--config", help="JSON file with configuration keys")
    p.add_argument("--cells", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--nt", type=int)
    p.add_argument("--nr", type=int)
    p.add_argument("--subcarriers", type=int)
    p.add_argument("--power-dbw", type=float)
    p.add_argument("--weights", help="comma list, cell-major; 'unit' for all ones")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=_seeds, help="e.g. 0,1,2 or 0:20")
    p.add_argument("--init", choices=("ia", "random", "both"))
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--ia-iters", type=int)
    p.add_argument("--ia-restarts", type=int)
    p.add_argument("--powers", type=_powers, help="sweep powers in dBW, e.g. 5:30:5")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_spec(args):
    """Merge defaults, the optional config file and the flags into an ExperimentSpec."""
    cfg = SystemConfig().to_dict()
    spec = {"preset": "single_run", "powers_dbw": list(DEFAULT_SWEEP_DBW), "seeds": None,
            "modes": None, "out_dir": "results", "workers": 1, "solver": {}}
    weights_given = False
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        if isinstance(loaded.get("config"), dict):
            # a config.json echo written by a previous run
            nested = loaded.pop("config")
            loaded = {**loaded, **nested}
        for key, value in loaded.items():
            if key in SPEC_KEYS:
                spec[key] = value
            elif key in cfg:
                cfg[key] = value
                weights_given |= key == "user_weights"
            else:
                raise ConfigError(f"unknown configuration key {key!r}")

    flag_map = {"cells": "num_cells", "users": "users_per_cell", "nt": "tx_antennas",
                "nr": "rx_antennas", "subcarriers": "num_subcarriers",
                "power_dbw": "power_budget_dbw", "tol": "convergence_tol",
                "max_iters": "wsrm_max_iters", "ia_iters": "ia_iters",
                "ia_restarts": "ia_restarts", "seed": "rng_seed"}
    for flag, key in flag_map.items():
        value = getattr(args, flag)
        if value is not None:
            cfg[key] = value
    if args.weights is not None:
        weights_given = True
        cfg["user_weights"] = None if args.weights.strip() == "unit" else _floats(args.weights)
    if (not weights_given and cfg["user_weights"] is not None
            and len(cfg["user_weights"]) != cfg["num_cells"] * cfg["users_per_cell"]):
        log.info("default weights %s do not fit %d users; using unit weights",
                 DEFAULT_USER_WEIGHTS, cfg["num_cells"] * cfg["users_per_cell"])
        cfg["user_weights"] = None

    if args.preset is not None:
        spec["preset"] = args.preset
    if args.seeds is not None:
        spec["seeds"] = args.seeds
    if spec["seeds"] is None:
        spec["seeds"] = [cfg["rng_seed"]]
    if args.init is not None:
        spec["modes"] = ["ia", "random"] if args.init == "both" else [args.init]
    if spec["modes"] is None:
        spec["modes"] = ["ia"] if spec["preset"] == "single_run" else ["ia", "random"]
    if args.powers is not None:
        spec["powers_dbw"] = args.powers
    if args.workers is not None:
        spec["workers"] = args.workers
    if args.out is not None:
        spec["out_dir"] = args.out

    try:
        solver = SolverOptions(**spec.pop("solver"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver options: {exc}") from exc
    return ExperimentSpec(config=SystemConfig.from_dict(cfg), solver=solver, **spec)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        spec = resolve_spec(args)
    except (ConfigError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        output = run_experiment(spec)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WsrmError, ArithmeticError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in output.files:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
