"""Run every config in scripts/configs (or the ones given) and print a one-line verdict per check."""

import argparse
import json
import sys
from pathlib import Path

from wrglab.cli import ExperimentConfig, build_report, write_plots, write_rows_csv
from wrglab.experiments import run_preset

HERE = Path(__file__).resolve().parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("configs", nargs="*", type=Path, help="config files (default: scripts/configs/*.json)")
    parser.add_argument("--parallel", type=int, default=None, help="worker processes")
    args = parser.parse_args()
    paths = args.configs or sorted((HERE / "configs").glob("*.json"))
    all_passed = True
    for path in paths:
        cfg = ExperimentConfig.from_dict(json.loads(path.read_text()))
        result = run_preset(cfg, args.parallel)
        report = build_report(cfg, result)
        if cfg.output_dir:
            out = Path(cfg.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
            if cfg.csv:
                write_rows_csv(out / "functionals.csv", result.columns, result.rows)
            if cfg.plots:
                write_plots(out, result.samples)
        print(f"== {path.name}")
        for c in result.checks:
            print(f"  {'PASS' if c.passed else 'FAIL'} {c.name} n={c.n} estimate={c.estimate:.4g} "
                  f"band=[{c.band[0]:.4g}, {c.band[1]:.4g}] {c.note}")
        all_passed &= result.passed
    return 0 if all_passed else 3


if __name__ == "__main__":
    sys.exit(main())
