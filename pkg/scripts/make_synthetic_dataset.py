#!/usr/bin/env python3
"""Write the bundled synthetic benchmark fixture to a directory.

Produces a 2-scene, 3-object BOP-style tree plus estimate, detection,
and PnP fixture files. Deterministic for a given seed.
"""

import argparse
from pathlib import Path

from edgepose.synthetic import build_synthetic_dataset


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", help="destination directory (created if missing)")
    parser.add_argument("--seed", type=int, default=0, help="generator seed (default: 0)")
    args = parser.parse_args()

    dataset = build_synthetic_dataset(Path(args.root), seed=args.seed)
    print(f"dataset root:      {dataset.root}")
    print(f"estimates:         {dataset.estimates_path}")
    print(f"gt detections:     {dataset.gt_detections_path}")
    print(f"detections:        {dataset.detections_path}")
    print(f"pnp fixture:       {dataset.correspondences_path}, {dataset.intrinsics_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
