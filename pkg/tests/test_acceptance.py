"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.
"""

import itertools
import math
import random
import time
from fractions import Fraction

import numpy as np

from coarselab.actions import (
    boundary_moves_witness,
    detect_coarse_fixed_point_isometry,
    isometry_orbit_lipschitz,
    iterated_map_action,
    lattice_translation,
    orbit,
    right_translation,
    verify_boundary_witness,
)
from coarselab.coarse import CERTIFIED, bornologous_profile, closeness_bound, higson_defect
from coarselab.cone import (
    ConeGrid,
    ConeSpace,
    LambdaFunction,
    compactification_diagnostic,
    cone_distance_lower,
    cycle_graph,
    geometric_heights,
)
from coarselab.odometer import (
    BoundaryWord,
    gromov_product_table,
    minimality_witness,
    odometer_power,
    odometer_step,
)
from coarselab.spaces import BallSpec, BinaryTreeSpace, FreeGroupSpace, LatticeSpace

T2 = BinaryTreeSpace()
F2 = FreeGroupSpace()


def _tree_vertices(max_index: int):
    """All vertices whose bit indices run up to max_index (depth <= max_index + 1),
    plus the basepoint."""
    out = [()]
    for n in range(1, max_index + 2):
        out.extend(itertools.product((0, 1), repeat=n))
    return out


def test_criterion_01_odometer_large_scale_lipschitz():
    started = time.monotonic()
    vertices = _tree_vertices(9)  # 2046 proper vertices + the basepoint
    assert len(vertices) == 2047
    stepped = [odometer_step(v) for v in vertices]
    d_before = T2.pairwise(vertices, vertices)
    d_after = T2.pairwise(stepped, stepped)
    violations = int(np.sum(d_after > d_before + 2))
    assert violations == 0
    elapsed = time.monotonic() - started
    assert elapsed < 30
    n_pairs = len(vertices) * (len(vertices) - 1) // 2
    print(
        f"criterion 1 PASS: odometer Lipschitz d(1x,1y) <= d(x,y)+2 on "
        f"{n_pairs} vertex pairs, 0 violations ({elapsed:.1f} s)"
    )


def test_criterion_02_gromov_product_consistency():
    started = time.monotonic()
    vertices = _tree_vertices(9)
    prefix = gromov_product_table(vertices)  # positionwise comparison
    depths = np.array([len(v) for v in vertices], dtype=np.int64)
    dmat = T2.pairwise(vertices, vertices)  # bitwise-XOR distance path
    formula_twice = depths[:, None] + depths[None, :] - dmat
    assert (formula_twice == 2 * prefix).all()
    elapsed = time.monotonic() - started
    print(
        f"criterion 2 PASS: common-prefix Gromov product equals the distance "
        f"formula on all {len(vertices)}^2 vertex pairs ({elapsed:.1f} s)"
    )


def test_criterion_03_minimality_witness_formula():
    started = time.monotonic()
    rng = random.Random(20240)
    checked = 0
    for _ in range(100):
        x = BoundaryWord(tuple(rng.randrange(2) for _ in range(24)))
        y = BoundaryWord(tuple(rng.randrange(2) for _ in range(24)))
        for n_agree in range(1, 13):
            witness = minimality_witness(x, y, n_agree)
            moved = odometer_power(x, witness)
            assert moved.bits[: n_agree + 1] == y.bits[: n_agree + 1]
            checked += 1
    elapsed = time.monotonic() - started
    assert elapsed < 5
    print(
        f"criterion 3 PASS: witness n = a + b matches the first N+1 bits in "
        f"{checked} seeded cases, N = 1..12 at precision 24 ({elapsed:.1f} s)"
    )


def test_criterion_04_translation_displacement_bound():
    started = time.monotonic()
    radii = [1, 2, 3, 4, 5, 6]
    translations = [h for h in F2.closed_ball("", 3)]
    assert len(translations) == 53
    for h in translations:
        report = bornologous_profile(right_translation(h), F2, F2, radii, 6)
        for row in report.rows:
            assert row.value <= row.scale + 2 * len(h), (h, row)
    elapsed = time.monotonic() - started
    assert elapsed < 60
    print(
        f"criterion 4 PASS: S(R) <= R + 2|h| for all {len(translations)} "
        f"right translations with |h| <= 3, R = 1..6 over the radius-6 ball "
        f"({elapsed:.1f} s)"
    )


def test_criterion_05_translation_closeness_is_word_length():
    started = time.monotonic()
    z2 = LatticeSpace(2)
    identity = lambda p: p
    shifts = z2.closed_ball((0, 0), 4)
    assert len(shifts) == 41
    for g in shifts:
        report = closeness_bound(lattice_translation(g), identity, z2, 50)
        expected = abs(g[0]) + abs(g[1])
        assert report.rows[-1].value == expected
        assert report.verdict == CERTIFIED
    elapsed = time.monotonic() - started
    print(
        f"criterion 5 PASS: closeness_bound(translation-by-g, id) = |g| for "
        f"all {len(shifts)} shifts with |g| <= 4 over the radius-50 ball "
        f"({elapsed:.1f} s)"
    )


def test_criterion_06_recurrence_certificate_and_escape():
    started = time.monotonic()
    nodes, edges = cycle_graph(360)
    grid = ConeGrid.build(nodes, edges, geometric_heights(23, extra=[10.0]))
    space = ConeSpace(grid, LambdaFunction.linear())

    def rotate(p):
        v, t = p
        return p if t == 0.0 else (str((int(v) + 1) % 360), t)

    action = iterated_map_action(rotate, "rotate", isometry=True)
    x0 = ("0", 10.0)
    cert = detect_coarse_fixed_point_isometry(
        action, space, x0, BallSpec(x0, 12.0), 10_000
    )
    assert cert.status == "coarse-fixed-point-certificate"
    assert cert.max_displacement < cert.concluded_radius  # all orbit in B(x0, L+1)
    assert len(cert.return_times) >= 50

    z1 = LatticeSpace(1)
    shift = iterated_map_action(lattice_translation((1,)), "+1", isometry=True)
    verdict = detect_coarse_fixed_point_isometry(
        shift, z1, (0,), BallSpec((0,), 12.0), 2000
    )
    assert verdict.status == "not-recurrent-at-horizon"
    last_times = [t for _, t in verdict.orbit_record.escape_profile]
    assert all(b > a for a, b in zip(last_times, last_times[1:]))
    elapsed = time.monotonic() - started
    assert elapsed < 10
    print(
        f"criterion 6 PASS: rotation at height 10 certified with L = "
        f"{cert.bound_constant} (max displacement {cert.max_displacement}); "
        f"translation not recurrent with strictly increasing escape profile "
        f"({elapsed:.1f} s)"
    )


def test_criterion_07_isometry_orbit_is_exactly_linear():
    started = time.monotonic()
    z1 = LatticeSpace(1)
    action = iterated_map_action(lattice_translation((3,)), "+3", isometry=True)
    record = orbit(action, z1, (0,), 1000)
    seq = sorted(record.points, key=dict(zip(record.points, record.first_times)).get)
    dmat = z1.pairwise(seq, seq)
    gaps = np.abs(np.arange(1001)[:, None] - np.arange(1001)[None, :])
    assert (dmat == 3 * gaps).all()
    report = isometry_orbit_lipschitz(action, z1, (0,), 1000)
    assert report.verdict == CERTIFIED
    assert report.affine_slope == 3.0
    assert all(row.value == 3 * row.scale for row in report.rows)
    elapsed = time.monotonic() - started
    print(
        f"criterion 7 PASS: d(m.0, n.0) = 3|m-n| exactly on all "
        f"{1001 * 1000 // 2} pairs up to horizon 1000 ({elapsed:.1f} s)"
    )


def test_criterion_08_boundary_witness_exhaustive():
    started = time.monotonic()
    count = 0
    stack = [c for c in "aAbB"]
    inverse = {"a": "A", "A": "a", "b": "B", "B": "b"}
    while stack:
        w = stack.pop()
        if len(w) == 10:
            g, idx = boundary_moves_witness(w)
            assert verify_boundary_witness(w, g, idx), (w, g, idx)
            count += 1
            continue
        for c in "aAbB":
            if c != inverse[w[-1]]:
                stack.append(w + c)
    assert count == 4 * 3**9
    elapsed = time.monotonic() - started
    assert elapsed < 60
    print(
        f"criterion 8 PASS: every one of the {count} reduced prefixes of "
        f"length 10 is moved by the returned generator at the reported index "
        f"({elapsed:.1f} s)"
    )


def test_criterion_09_higson_defect_separates_functions():
    started = time.monotonic()
    z1 = LatticeSpace(1)
    slow = lambda p: math.sin(math.log1p(abs(p[0])))
    table = higson_defect(slow, z1, 10, [10_000], window_radius=10_200)
    assert table.rows[0].value < 2e-3
    oscillating = lambda p: math.sin(p[0])
    table2 = higson_defect(
        oscillating, z1, 10, [1, 10, 100, 1000, 10_000], window_radius=10_200
    )
    assert all(row.value > 0.5 for row in table2.rows)
    elapsed = time.monotonic() - started
    print(
        f"criterion 9 PASS: sin(log(1+|x|)) has defect "
        f"{table.rows[0].value:.2e} < 2e-3 outside B = 10^4 while sin(x) "
        f"stays above 0.5 at every tested B ({elapsed:.1f} s)"
    )


def test_criterion_10_cone_diagnostic_and_bracket():
    started = time.monotonic()
    nodes, edges = cycle_graph(16)
    grid = ConeGrid.build(nodes, edges, geometric_heights(1100, extra=[10.0, 100.0, 1000.0]))
    lam = LambdaFunction.linear()
    table = compactification_diagnostic(grid, lam, 5.0, [10.0, 100.0, 1000.0])
    assert table.all_passed()
    meas = [row.measured_separation for row in table.rows]
    assert meas == sorted(meas, reverse=True)
    for row in table.rows:
        assert row.measured_separation <= (5.0 / row.height) * 1.1

    space = ConeSpace(grid, lam)
    pts = grid.grid_points()
    rng = random.Random(101)
    pairs = [
        (pts[rng.randrange(len(pts))], pts[rng.randrange(len(pts))])
        for _ in range(1000)
    ]
    upper = space.paired([p for p, _ in pairs], [q for _, q in pairs])
    lower = np.array([cone_distance_lower(p, q) for p, q in pairs])
    assert (lower <= upper + 1e-12).all()

    refined = ConeSpace(grid.refine_heights(), lam)
    upper2 = refined.paired([p for p, _ in pairs], [q for _, q in pairs])
    assert (upper2 <= upper + 1e-9).all()
    elapsed = time.monotonic() - started
    print(
        f"criterion 10 PASS: diagnostic bound holds at heights 10/100/1000, "
        f"bracket lower <= upper on 1000 seeded pairs, and refinement only "
        f"tightens the upper bound ({elapsed:.1f} s)"
    )
