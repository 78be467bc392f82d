"""Command-line experiment runner.

    pseig <experiment-id> [--config FILE] [--L ...] [--cells N]
          [--shift-mode {none,good,optimal,manual}] [--sigma X] [--tol X]
          [--kmax N] [--solver {ip,lopcg}] [--m N] [--out DIR]

Config files are flat key = value text (INI) with one section per
experiment id; CLI flags override config values.  Exit codes: 0 success,
2 configuration error, 3 solver non-convergence, 4 I/O error.
"""

import argparse
import configparser
import sys

from .errors import (
    ConfigurationError,
    DataError,
    PseigError,
    ShiftTooLargeError,
    SolverNonConvergence,
)
from .pipeline import EXPERIMENTS, ExperimentConfig, run_experiment


def _parse_args(argv):
    ap = argparse.ArgumentParser(
        prog="pseig",
        description="Quasi-optimally shifted eigensolvers on expanding box domains",
    )
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="INI config file with per-experiment sections")
    ap.add_argument("--L", type=float, nargs="+", help="domain lengths / cell counts")
    ap.add_argument("--cells", type=int, help="cells per unit length")
    ap.add_argument("--order", type=int, choices=(1, 2))
    ap.add_argument("--shift-mode", choices=("none", "good", "optimal", "manual"))
    ap.add_argument("--sigma", type=float, help="manual shift value")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--kmax", type=int)
    ap.add_argument("--solver", choices=("ip", "lopcg"))
    ap.add_argument("--m", type=int, help="number of eigenpairs")
    ap.add_argument("--out", help="output directory")
    return ap.parse_args(argv)


_CONFIG_KEYS = {
    "L": ("L_values", lambda s: tuple(float(x) for x in s.replace(",", " ").split())),
    "cells": ("cells_per_unit", int),
    "order": ("order", int),
    "ell": ("ell", float),
    "shift_mode": ("shift_mode", str),
    "shift_fraction": ("shift_fraction", float),
    "sigma": ("sigma", float),
    "tol": ("tol", float),
    "kmax": ("k_max", int),
    "solver": ("solver", str),
    "m": ("m", int),
    "out": ("out", str),
    "backend": ("backend", str),
    "backoff": ("backoff", float),
    "cell_cells": ("cell_cells", int),
    "scaled_cells_x_per_L": ("scaled_cells_x_per_L", int),
    "scaled_cells_y": ("scaled_cells_y", int),
}

_DEFAULTS = {
    "laplace-gap": {"L_values": (2, 4, 8, 16), "cells_per_unit": 64},
    "precond-compare": {"L_values": (1, 2, 4, 8, 16), "cells_per_unit": 50},
    "homog-study": {"L_values": (1, 2, 4, 8)},
    "chain": {"L_values": (1, 2, 4), "cells_per_unit": 40},
    "kronig-penney": {"L_values": (1, 2, 4), "cells_per_unit": 10},
    "factorization-check": {"L_values": (4,), "cells_per_unit": 20},
}


def build_config(args):
    kwargs = {"experiment": args.experiment}
    kwargs.update(_DEFAULTS.get(args.experiment, {}))

    if args.config:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep key case ("L" vs "l")
        read = parser.read(args.config)
        if not read:
            raise ConfigurationError(f"cannot read config file {args.config}")
        if parser.has_section(args.experiment):
            for key, raw in parser.items(args.experiment):
                if key not in _CONFIG_KEYS:
                    raise ConfigurationError(f"unknown config key {key!r}")
                field_name, conv = _CONFIG_KEYS[key]
                kwargs[field_name] = conv(raw)

    flag_map = {
        "L": "L_values",
        "cells": "cells_per_unit",
        "order": "order",
        "shift_mode": "shift_mode",
        "sigma": "sigma",
        "tol": "tol",
        "kmax": "k_max",
        "solver": "solver",
        "m": "m",
        "out": "out",
    }
    for flag, field_name in flag_map.items():
        val = getattr(args, flag)
        if val is not None:
            kwargs[field_name] = tuple(val) if flag == "L" else val
    return ExperimentConfig(**kwargs)


def main(argv=None):
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    try:
        config = build_config(args)
        out = run_experiment(config)
    except (ConfigurationError, DataError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (SolverNonConvergence, ShiftTooLargeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    except PseigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    for row in out.get("summary", ()):
        print(",".join(str(x) for x in row))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
