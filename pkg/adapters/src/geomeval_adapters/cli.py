"""geomeval-extract: run a front end over an audio manifest.

Input CSV columns: clip_id,label,audio_path. Output: one interchange tensor
per clip plus manifest.csv in --out, ready for `geomeval evaluate`.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import MODEL_IDS, AdapterSpec, extract_and_dump


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="geomeval-extract", description=__doc__)
    parser.add_argument("--model", required=True, choices=MODEL_IDS)
    parser.add_argument("--manifest", required=True, help="audio manifest CSV")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--layer", default="final", help="hidden layer index or 'final'")
    parser.add_argument("--sample-rate", type=int, default=16_000)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    spec = AdapterSpec(
        model_id=args.model,
        output_dir=args.out,
        layer=args.layer,
        sample_rate=args.sample_rate,
    )
    try:
        manifest = extract_and_dump(spec, args.manifest)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
