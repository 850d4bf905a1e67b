#!/usr/bin/env python3
"""Generate a vortex-street velocity field file for the karman presets.

The field is a kinematic wake model: a uniform stream with two staggered
rows of counter-rotating vortices, written in the sampled-field format
(JSON header + raw float64) that `echoflow karman --field` imports.
"""

import argparse
from pathlib import Path

from echoflow.flow import save_velocity_field, vortex_street


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("vortex_street"),
                        help="output base path (writes .f64 and .json)")
    parser.add_argument("--lx", type=float, default=4.71)
    parser.add_argument("--ly", type=float, default=2.15)
    parser.add_argument("--nx", type=int, default=236)
    parser.add_argument("--ny", type=int, default=108)
    parser.add_argument("--mean-speed", type=float, default=1.0,
                        help="free-stream speed in m/s")
    parser.add_argument("--strength", type=float, default=0.3,
                        help="vortex peak speed relative to the mean")
    parser.add_argument("--pairs", type=int, default=3,
                        help="number of vortex pairs along the street")
    args = parser.parse_args()

    field = vortex_street(
        args.lx, args.ly, args.nx, args.ny,
        mean_speed=args.mean_speed,
        vortex_strength=args.strength,
        n_pairs=args.pairs,
    )
    raw = save_velocity_field(field, args.out)
    print(f"wrote {raw} and {raw.with_suffix('.json')}")


if __name__ == "__main__":
    main()
