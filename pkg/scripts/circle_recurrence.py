#!/usr/bin/env python3
"""Build the recurrence certificate for a rotation at fixed cone height.

The orbit is bounded, so the detector assembles the displacement bound
L + 1 from the return times; the translation control run shows the
not-recurrent verdict with its escape profile.
"""

import json

from coarselab.actions import (
    detect_coarse_fixed_point_isometry,
    iterated_map_action,
    lattice_translation,
)
from coarselab.cone import ConeGrid, ConeSpace, LambdaFunction, cycle_graph, geometric_heights
from coarselab.spaces import BallSpec, LatticeSpace


def main() -> int:
    nodes, edges = cycle_graph(360)
    grid = ConeGrid.build(nodes, edges, geometric_heights(23, extra=[10.0]))
    space = ConeSpace(grid, LambdaFunction.linear())

    def rotate(p):
        v, t = p
        return p if t == 0.0 else (str((int(v) + 1) % 360), t)

    x0 = ("0", 10.0)
    cert = detect_coarse_fixed_point_isometry(
        iterated_map_action(rotate, "rotate", isometry=True),
        space, x0, BallSpec(x0, 12.0), 10_000,
    )
    print(json.dumps(cert.to_json_dict(space), indent=2, sort_keys=True))

    z1 = LatticeSpace(1)
    verdict = detect_coarse_fixed_point_isometry(
        iterated_map_action(lattice_translation((1,)), "+1", isometry=True),
        z1, (0,), BallSpec((0,), 5.0), 1000,
    )
    print(f"\ntranslation control: {verdict.status} "
          f"({verdict.returns_observed} returns)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
