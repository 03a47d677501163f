#!/usr/bin/env python3
"""Survey translations as coarse maps.

Left translation on the rank-2 free group and self-translation on Z^2
are verified generator by generator (isometric, proper at scale); right
translations get displacement profiles against the R + 2|h| bound; and
the closeness table contrasts the abelian case (translations stay a
bounded distance from the identity) with the free case (the gap grows
with the word length).
"""

from coarselab.actions import (
    free_group_left_translation_action,
    lattice_translation,
    lattice_translation_action,
    left_translation,
    right_translation,
    verify_coarse_action,
)
from coarselab.coarse import bornologous_profile, closeness_bound
from coarselab.spaces import FreeGroupSpace, LatticeSpace


def main() -> int:
    z2 = LatticeSpace(2)
    f2 = FreeGroupSpace()

    print("== generator verification ==")
    for name, space, action, domain in (
        ("Z^2 self-translation", z2, lattice_translation_action(z2), None),
        ("F2 left translation", f2, free_group_left_translation_action(), 8),
    ):
        ver = verify_coarse_action(action, space, [1, 2, 4], 4, domain_radius=domain)
        print(f"{name}: {ver.verdict}")

    print("\n== right-translation displacement profiles on F2 ==")
    for h in ("a", "ab", "aba"):
        rep = bornologous_profile(right_translation(h), f2, f2, [1, 2, 3, 4], 4)
        profile = ", ".join(f"S({row.scale:g})={row.value:g}" for row in rep.rows)
        print(f"|h|={len(h)} ({h}): {profile}  [bound R+{2 * len(h)}]")

    print("\n== closeness to the identity ==")
    ident_z = lambda p: p
    rep = closeness_bound(lattice_translation((2, 1)), ident_z, z2, 40)
    print(f"Z^2 translate by (2,1): sup gap {rep.rows[-1].value:g} ({rep.verdict})")
    rep = closeness_bound(left_translation("a"), lambda w: w, f2, 6)
    sups = ", ".join(f"{row.value:g}@r={row.scale:g}" for row in rep.rows)
    print(f"F2 left-multiply by a: sup gap grows: {sups} ({rep.verdict})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
