"""Command-line front end.

Verbs: validate, extract-distances, evaluate, correlate, report. Evaluate
and report exit 0 only when the report has zero error rows.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, load_config, validate_inputs
from .correlation import metric_correlation
from .errors import GeomevalError
from .pipeline import EvalReport, run_pipeline, write_correlations_csv


def _add_override_flags(p: argparse.ArgumentParser):
    p.add_argument("--pca-dims", help="override: projection width or 'none'")
    p.add_argument("--metric", choices=["cosine", "euclidean", "spearman"], help="override: distance kind")
    p.add_argument("--permutations", type=int, help="override: baseline permutation count")
    p.add_argument("--seed", type=int, help="override: run seed")
    p.add_argument("--noise", help="override: comma-separated flip fractions, e.g. 0.01,0.05")
    p.add_argument("--rerank", choices=["dtw"], help="enable DTW re-ranking")
    p.add_argument("--dtw-band", type=float, help="Sakoe-Chiba band radius fraction")
    p.add_argument("--dtw-stride", type=int, help="temporal subsampling stride")
    p.add_argument("--dtw-shortlist", type=int, help="re-ranked candidates per query")
    p.add_argument("--dtw-pca", type=int, help="frame projection width for DTW")
    p.add_argument("--workers", type=int, help="worker threads for distance blocks")
    p.add_argument("--out", help="override: output directory")


def _apply_overrides(config, args):
    if args.pca_dims is not None:
        config.pca_dims = [None if args.pca_dims == "none" else int(args.pca_dims)]
    if args.metric is not None:
        config.distance_metrics = [args.metric]
    if args.seed is not None:
        config.seed = args.seed
    if args.permutations is not None:
        config.baseline = dict(config.baseline or {"metrics": ["p_at_1"]})
        config.baseline["permutations"] = args.permutations
    if args.noise is not None:
        fractions = [float(x) for x in args.noise.split(",") if x]
        config.noise = dict(config.noise or {"metrics": ["p_at_1", "gsr"]})
        config.noise["fractions"] = fractions
    if args.rerank == "dtw" and config.dtw is None:
        config.dtw = {}
    if config.dtw is not None:
        if args.dtw_band is not None:
            config.dtw["band_radius"] = args.dtw_band
        if args.dtw_stride is not None:
            config.dtw["stride"] = args.dtw_stride
        if args.dtw_shortlist is not None:
            config.dtw["shortlist_size"] = args.dtw_shortlist
        if args.dtw_pca is not None:
            config.dtw["pca_dims"] = args.dtw_pca
    if args.workers is not None:
        config.workers = args.workers
    if args.out is not None:
        config.output_dir = os.path.abspath(args.out)
    return config


def _print_summary(report: EvalReport):
    errors = report.error_rows()
    print(f"{len(report.ok_rows())} score rows, {len(errors)} error rows")
    for r in errors:
        print(f"  ERROR {r['subset']}/{r['feature']}/{r['metric_kind']}/{r['score']}: {r['message']}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="geomeval", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_validate = sub.add_parser("validate", help="check a config and its referenced files")
    p_validate.add_argument("--config", required=True)

    p_extract = sub.add_parser("extract-distances", help="compute and cache distance matrices")
    p_extract.add_argument("--config", required=True)
    _add_override_flags(p_extract)

    p_eval = sub.add_parser("evaluate", help="run the full pipeline and write reports")
    p_eval.add_argument("--config", required=True)
    _add_override_flags(p_eval)

    p_corr = sub.add_parser("correlate", help="cross-metric rank correlations from a report")
    p_corr.add_argument("--report", required=True, help="path to report.json")
    p_corr.add_argument("--out", help="output CSV (default: correlations.csv next to the report)")

    p_report = sub.add_parser("report", help="re-render report.csv from report.json")
    p_report.add_argument("--report", required=True)
    p_report.add_argument("--out", help="output CSV path")

    args = parser.parse_args(argv)

    try:
        if args.verb == "validate":
            config = load_config(args.config)
            problems = validate_inputs(config)
            if problems:
                for p in problems:
                    print(f"INVALID: {p}")
                return 1
            print("OK")
            return 0

        if args.verb in ("extract-distances", "evaluate"):
            config = _apply_overrides(load_config(args.config), args)
            report = run_pipeline(config, compute_only=args.verb == "extract-distances")
            if args.verb == "extract-distances":
                print(f"distance matrices cached under {config.resolved_cache_dir()}")
                return 0
            csv_path = os.path.join(config.output_dir, "report.csv")
            json_path = os.path.join(config.output_dir, "report.json")
            report.write_csv(csv_path)
            report.write_json(json_path)
            _print_summary(report)
            print(f"wrote {csv_path} and {json_path}")
            return 0 if not report.error_rows() else 1

        if args.verb == "correlate":
            report = EvalReport.read_json(args.report)
            names, matrix = metric_correlation(report.rows)
            out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.report)), "correlations.csv")
            write_correlations_csv(out, names, matrix)
            print(f"wrote {out}")
            return 0

        if args.verb == "report":
            report = EvalReport.read_json(args.report)
            out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.report)), "report.csv")
            report.write_csv(out)
            _print_summary(report)
            print(f"wrote {out}")
            return 0 if not report.error_rows() else 1
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except GeomevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
