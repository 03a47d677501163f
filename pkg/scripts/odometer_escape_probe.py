#!/usr/bin/env python3
"""Probe how the odometer orbit escapes balls around its start vertex.

A bornologous orbit of an N-action satisfies d(n . x, x) <= L n; the
adding machine instead shows displacement spikes of size ~ 2 log2(n) at
the carry cascades while returning near the root in between. This is a
diagnostic only: finite data cannot decide an asymptotic impossibility.
"""

from pathlib import Path

from coarselab.actions import iterated_map_action, orbit
from coarselab.odometer import odometer_step
from coarselab.spaces import BinaryTreeSpace


def main() -> int:
    t2 = BinaryTreeSpace()
    record = orbit(iterated_map_action(odometer_step), t2, (), 4096)
    print(f"horizon 4096: orbit size {len(record.points)}, "
          f"max displacement {record.max_displacement:g}")
    print("r, last time the orbit sits inside ball(*, r):")
    for r, last in record.escape_profile:
        print(f"  {r:3d}  {last}")
    out = Path("results/odometer_escape")
    out.mkdir(parents=True, exist_ok=True)
    (out / "escape_profile.csv").write_text(record.escape_profile_csv())
    print(f"wrote {out / 'escape_profile.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
