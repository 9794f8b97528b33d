#!/usr/bin/env python3
"""Run the full pipeline on the synthetic fixture and print every report.

Steps: build the fixture, batch-preprocess its images both ways, score
poses, score detections, and solve the bundled PnP problem. Mirrors the
end-to-end smoke path and doubles as a usage example.
"""

import argparse
import tempfile
from pathlib import Path

from edgepose.cli import main as edgepose_main
from edgepose.synthetic import build_synthetic_dataset


def run(argv: list[str]) -> None:
    print(f"\n$ edgepose {' '.join(argv)}")
    code = edgepose_main(argv)
    if code != 0:
        raise SystemExit(f"edgepose {argv[0]} exited with {code}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", default=None,
                        help="reuse this directory instead of a temporary one")
    parser.add_argument("--seed", type=int, default=0, help="fixture seed (default: 0)")
    args = parser.parse_args()

    if args.workdir is None:
        context = tempfile.TemporaryDirectory(prefix="edgepose-bench-")
        workdir = Path(context.name)
    else:
        workdir = Path(args.workdir)
        workdir.mkdir(parents=True, exist_ok=True)

    dataset = build_synthetic_dataset(workdir / "dataset", seed=args.seed)
    root = str(dataset.root)

    run(["preprocess", root, str(workdir / "edges"), "--method", "canny",
         "--low", "100", "--high", "200"])
    run(["preprocess", root, str(workdir / "composites"), "--method", "composite"])
    run(["eval-pose", root, str(dataset.estimates_path)])
    run(["eval-detect", str(dataset.gt_detections_path), str(dataset.detections_path)])
    run(["pnp", str(dataset.correspondences_path), str(dataset.intrinsics_path)])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
