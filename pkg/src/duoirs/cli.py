"""Command-line interface.

Subcommands:
  run       run an experiment from a JSON config and emit CSV
  overhead  print the minimum training overhead of a scheme
  design    verify a training design (design verify --phase {1,2,3})
  version   print the package version

Exit codes: 0 on success, 1 on usage or configuration problems (including
a failed design verification), 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, DuoIrsError
from .harness import ExperimentSpec, emit_csv, run_experiment
from .training_design import (
    overhead,
    phase1_design,
    phase2_design_case1,
    phase2_design_case2,
    phase3_design,
    phase_overheads,
    verify_phase2_conditions,
    verify_xi_rank,
)


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print("%s: error: %s" % (self.prog, message), file=sys.stderr)
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="duoirs",
                     description="Double-IRS cascaded channel estimation toolkit")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="path to JSON config")
    p_run.add_argument("--trials", type=int, default=None,
                       help="override the trial count")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the base seed")
    p_run.add_argument("--out", default=None,
                       help="CSV output path (default: stdout)")

    p_ov = sub.add_parser("overhead", help="print minimum training overhead")
    p_ov.add_argument("--scheme", required=True,
                      choices=["proposed", "decoupled", "perAntenna"])
    p_ov.add_argument("--n", type=int, required=True)
    p_ov.add_argument("--m1", type=int, required=True)
    p_ov.add_argument("--m2", type=int, required=True)
    p_ov.add_argument("--k", type=int, required=True)

    p_design = sub.add_parser("design", help="training design utilities")
    design_sub = p_design.add_subparsers(dest="design_command")
    p_verify = design_sub.add_parser("verify", help="verify a phase design")
    p_verify.add_argument("--phase", type=int, required=True, choices=[1, 2, 3])
    p_verify.add_argument("--config", required=True, help="path to JSON config")
    p_verify.add_argument("--tol", type=float, default=1e-10)

    sub.add_parser("version", help="print the package version")
    return parser


def _load_design_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid JSON in %s: %s" % (path, exc)) from exc
    if not isinstance(payload, dict):
        raise ConfigError("config root must be a JSON object")
    out = {}
    for name, default in (("n", 8), ("m1", 8), ("m2", 8), ("k", 1),
                          ("i1", None), ("i2", None), ("i3", None),
                          ("seed", 0)):
        val = payload.get(name, default)
        if val is not None:
            val = int(val)
        out[name] = val
    out["phase2_mode"] = payload.get("phase2_mode", "random")
    return out


def _cmd_verify(args):
    cfg = _load_design_config(args.config)
    n, m1, m2, k = cfg["n"], cfg["m1"], cfg["m2"], cfg["k"]
    i1_def, i2_def, i3_def = phase_overheads(n, m1, m2, k)
    tol = args.tol
    ok = True
    if args.phase == 1:
        i1 = cfg["i1"] if cfg["i1"] is not None else i1_def
        sched = phase1_design(m2, i1, m1=m1)
        gram = sched.theta_bar2 @ sched.theta_bar2.conj().T
        dev = float(np.max(np.abs(gram - i1 * np.eye(m2 + 1))))
        ok = dev <= tol
        print("phase 1: i1=%d, gram deviation %.3e (tol %.1e)" % (i1, dev, tol))
    elif args.phase == 2:
        i2 = cfg["i2"] if cfg["i2"] is not None else i2_def
        if n >= m2:
            sched = phase2_design_case1(m1, i2)
            rep = verify_phase2_conditions(sched.theta1, sched.psi, tol)
            ok = rep.passed
            print("phase 2 (case 1): i2=%d" % i2)
            for name, dev in rep.as_dict().items():
                if name.startswith("dev_"):
                    print("  %s: %.3e" % (name, dev))
        else:
            rng = np.random.default_rng(cfg["seed"])
            surrogate = (rng.standard_normal((n, m2))
                         + 1j * rng.standard_normal((n, m2))) / np.sqrt(2.0)
            sched = phase2_design_case2(m1, m2, n, i2,
                                        mode=cfg["phase2_mode"],
                                        seed=cfg["seed"], qbar=surrogate)
            rep = verify_xi_rank(surrogate, sched.theta1_seq, sched.theta2_seq)
            ok = rep.passed
            print("phase 2 (case 2): i2=%d, rank %d of %d required"
                  % (i2, rep.rank, rep.required))
    else:
        i3 = cfg["i3"] if cfg["i3"] is not None else i3_def
        sched = phase3_design(n, m1, m2, k, i3, seed=cfg["seed"])
        if sched.i3 == 0:
            print("phase 3: single user, no pilots needed")
        else:
            gram = sched.x @ sched.x.conj().T
            dev = float(np.max(np.abs(gram - sched.i3 * np.eye(k - 1))))
            ok = dev <= tol
            print("phase 3 (%s): i3=%d, pilot gram deviation %.3e (tol %.1e)"
                  % (sched.case, sched.i3, dev, tol))
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "version":
            print(__version__)
            return 0
        if args.command == "overhead":
            print(overhead(args.scheme, args.n, args.m1, args.m2, args.k))
            return 0
        if args.command == "design":
            if args.design_command != "verify":
                parser.print_usage(sys.stderr)
                return 1
            return _cmd_verify(args)
        if args.command == "run":
            spec = ExperimentSpec.from_json(args.config)
            if args.trials is not None:
                spec.trials = args.trials
            if args.seed is not None:
                spec.seed = args.seed
            spec.__post_init__()
            table = run_experiment(spec)
            if args.out is None:
                emit_csv(table, sys.stdout)
            else:
                emit_csv(table, args.out)
            return 0
        parser.print_usage(sys.stderr)
        return 1
    except ConfigError as exc:
        print("duoirs: config error: %s" % exc, file=sys.stderr)
        return 1
    except DuoIrsError as exc:
        print("duoirs: error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
