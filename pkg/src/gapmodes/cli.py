"""Command-line entry point: ``gapmodes {bands,predict,validate,verify}``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bloch, direct, effective, floquet, harness
from .potentials import ConfigError

NUMERICAL_ERRORS = (bloch.BandEdgeError, bloch.EigenSolverError, effective.UpperEdgeError,
                    effective.NoBifurcationError, direct.NoDefectModeError, direct.AmbiguityError,
                    direct.StagnationError, floquet.NoDefectModeError, floquet.MatchingError,
                    ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gapmodes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("bands", "band structure and gap table"),
                        ("predict", "effective model and predicted eigenvalues"),
                        ("validate", "direct solves over the epsilon grid with scaling fits"),
                        ("verify", "invariant suites")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON run configuration (defaults built in)")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--workers", type=int, default=1, help="parallel epsilon jobs")
        s.add_argument("--epsilon", type=float, nargs="+", help="override the epsilon grid")
    return p


def _write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _load(args) -> harness.RunConfig:
    cfg = harness.load_config(args.config if args.config else harness.default_config_doc())
    if args.epsilon is not None:
        cfg = cfg.with_grid(args.epsilon)
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return cfg


def _summary_csv(summary: dict, h: str) -> str:
    rows = [{"key": k, "value": v} for k, v in summary.items()]
    return harness.write_csv(["key", "value"], rows, h)


def run(args) -> int:
    cfg = _load(args)
    h = cfg.hash
    cmd = args.command
    if cmd == "bands":
        _, rows, gaps = harness.run_bands(cfg)
        p = _write(args.out, f"bands_{h}.csv", harness.write_csv(harness.BAND_COLUMNS, rows, h))
        _write(args.out, f"bands_{h}_gaps.csv", harness.write_csv(harness.GAP_COLUMNS, gaps, h))
        print(p)
        for g in gaps:
            print(f"gap {g['gap_id']}: ({g['lo']:.10g}, {g['hi']:.10g})")
        return 0
    if cmd == "predict":
        model, rows = harness.run_predict(cfg)
        p = _write(args.out, f"predict_{h}.csv", harness.write_csv(harness.PREDICT_COLUMNS, rows, h))
        print(p)
        if model is None:
            print("B_eff = 0: no bifurcation predicted")
        return 0
    if cmd == "validate":
        rows, summary = harness.run_validate(cfg, args.workers)
        p = _write(args.out, f"validate_{h}.csv", harness.write_csv(harness.VALIDATE_COLUMNS, rows, h))
        _write(args.out, f"validate_{h}_summary.csv", _summary_csv(summary, h))
        _write(args.out, f"validate_{h}_timings.csv",
               harness.write_csv(["epsilon", "runtime_s"], rows, h))
        print(p)
        print(json.dumps({k: v for k, v in summary.items()}, indent=1))
        return 0 if summary.get("n_fit", 0) >= 2 else 1
    rows = harness.run_verify(cfg)
    p = _write(args.out, f"verify_{h}.csv", harness.write_csv(harness.VERIFY_COLUMNS, rows, h))
    print(p)
    failed = [r for r in rows if not r["passed"]]
    for r in failed:
        print(f"FAILED {r['group']}/{r['check']}: {r['value']:.6g} vs {r['threshold']:.6g}")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        diag = getattr(exc, "diagnostics", None)
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        if diag:
            print(f"diagnostics: {diag}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
