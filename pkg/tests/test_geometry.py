"""Disk geometry, equal-area strips, and mobility models."""

import math
import random

import numpy as np
import pytest

from relaysim.geometry import (
    DiskGeometry,
    RandomWalk,
    RandomWaypoint,
    WaypointState,
    build_disk,
    compute_region_boundaries,
    region_box,
    region_of,
    sample_uniform_disk,
    sample_uniform_in_region,
    segment_area,
    step_random_walk,
    step_waypoint,
    walk_next,
)

# boundaries of the radius-2.5, 5-strip reference disk, frozen from an
# independent bisection of the circular-segment area function
REFERENCE_BOUNDARIES = [
    0.0,
    1.270345418091,
    2.105659515500,
    2.894340484500,
    3.729654581909,
    5.0,
]


def test_segment_area_endpoints():
    r = 2.5
    assert segment_area(r, 0.0) == 0.0
    assert math.isclose(segment_area(r, 2 * r), math.pi * r * r, rel_tol=1e-14)
    assert math.isclose(segment_area(r, r), math.pi * r * r / 2, rel_tol=1e-12)


def test_reference_boundaries_frozen():
    got = compute_region_boundaries(2.5, 5)
    assert len(got) == 6
    for g, e in zip(got, REFERENCE_BOUNDARIES):
        assert abs(g - e) < 1e-9, f"{g} vs {e}"


def test_boundaries_symmetric_about_center():
    b = compute_region_boundaries(2.5, 5)
    for k in range(6):
        assert abs((b[k] + b[5 - k]) - 5.0) < 1e-9


def test_equal_area_invariant():
    for m in (1, 2, 3, 5, 8):
        geo = build_disk(2.5, m)
        target = geo.area / m
        for k in range(m):
            a = segment_area(2.5, geo.boundaries[k + 1]) - segment_area(2.5, geo.boundaries[k])
            assert abs(a - target) < 1e-9 * target


def test_geometry_anchor_points():
    geo = build_disk(2.5, 5)
    assert geo.source == (0.0, 0.0)
    assert geo.dest == (5.0, 0.0)
    assert geo.center == (2.5, 0.0)


def test_bad_parameters():
    with pytest.raises(ValueError):
        compute_region_boundaries(2.5, 0)
    with pytest.raises(ValueError):
        compute_region_boundaries(-1.0, 5)


def test_region_of_interior_and_boundaries():
    geo = build_disk(2.5, 5)
    b = geo.boundaries
    # strip interiors
    for k in range(5):
        x = 0.5 * (b[k] + b[k + 1])
        assert region_of(geo, (x, 0.0)) == k + 1
    # a point on an interior boundary belongs to the strip on its right
    assert region_of(geo, (b[1], 0.0)) == 2
    assert region_of(geo, (b[4], 0.0)) == 5
    # endpoint ownership
    assert region_of(geo, (0.0, 0.0)) == 1
    assert region_of(geo, (5.0, 0.0)) == 5
    with pytest.raises(ValueError):
        region_of(geo, (5.1, 0.0))
    with pytest.raises(ValueError):
        region_of(geo, (2.5, 2.6))


def test_sample_uniform_disk_inside_and_uniform():
    geo = build_disk(2.5, 5)
    rng = random.Random(1)
    pts = [sample_uniform_disk(geo, rng) for _ in range(20000)]
    for x, y in pts[:200]:
        assert (x - 2.5) ** 2 + y * y <= 2.5**2 * (1 + 1e-12)
    # equal-area strips must each catch ~1/5 of uniform points
    counts = np.zeros(5)
    for p in pts:
        counts[region_of(geo, p) - 1] += 1
    frac = counts / len(pts)
    assert np.all(np.abs(frac - 0.2) < 0.02), frac


def test_sample_uniform_in_region():
    geo = build_disk(2.5, 5)
    rng = random.Random(5)
    for region in (1, 3, 5):
        for _ in range(300):
            p = sample_uniform_in_region(geo, region, rng)
            assert region_of(geo, p) == region
    with pytest.raises(ValueError):
        sample_uniform_in_region(geo, 0, rng)
    with pytest.raises(ValueError):
        sample_uniform_in_region(geo, 6, rng)


def test_region_box_covers_strip():
    geo = build_disk(2.5, 5)
    rng = random.Random(9)
    for region in range(1, 6):
        x0, x1, h = region_box(geo, region)
        assert x0 == geo.boundaries[region - 1]
        assert x1 == geo.boundaries[region]
        for _ in range(200):
            x, y = sample_uniform_in_region(geo, region, rng)
            assert x0 <= x <= x1
            assert abs(y) <= h + 1e-12


def test_walk_next_semantics():
    M = 5
    q = 0.2
    # interior strip: down when u < q, up when u >= 1-q, stay otherwise
    assert walk_next(3, 0.1, q, M) == 2
    assert walk_next(3, 0.5, q, M) == 3
    assert walk_next(3, 0.85, q, M) == 4
    # threshold boundaries: u == q stays, u == 1-q moves up
    assert walk_next(3, q, q, M) == 3
    assert walk_next(3, 1.0 - q, q, M) == 4
    # edges: strip 1 moves up when u < q, strip M moves down when u < q
    assert walk_next(1, 0.1, q, M) == 2
    assert walk_next(1, 0.9, q, M) == 1
    assert walk_next(M, 0.1, q, M) == M - 1
    assert walk_next(M, 0.9, q, M) == M
    # single strip never moves
    assert walk_next(1, 0.01, q, 1) == 1


def test_walk_next_array_matches_scalar():
    rng = np.random.default_rng(3)
    M, q = 5, 0.3
    regions = rng.integers(1, M + 1, size=500)
    u = rng.random(500)
    vec = walk_next(regions, u, q, M)
    for i in range(500):
        assert vec[i] == walk_next(int(regions[i]), float(u[i]), q, M)


def test_walk_stationary_distribution_uniform():
    # the edge rules make the chain doubly stochastic, so the stationary
    # distribution over strips is uniform
    M, q = 5, 0.2
    rng = random.Random(17)
    n_relays, n_steps = 300, 2000
    states = [rng.randrange(1, M + 1) for _ in range(n_relays)]
    counts = np.zeros(M)
    for _ in range(n_steps):
        states = [step_random_walk(s, q, M, rng) for s in states]
        for s in states:
            counts[s - 1] += 1
    frac = counts / counts.sum()
    assert np.all(np.abs(frac - 1.0 / M) < 0.02), frac


def test_step_random_walk_validates_region():
    rng = random.Random(0)
    with pytest.raises(ValueError):
        step_random_walk(0, 0.2, 5, rng)
    with pytest.raises(ValueError):
        step_random_walk(6, 0.2, 5, rng)


def test_mobility_model_validation():
    with pytest.raises(ValueError):
        RandomWalk(q=0.6)
    with pytest.raises(ValueError):
        RandomWalk(q=-0.1)
    RandomWalk(q=0.0)
    RandomWalk(q=0.5)
    with pytest.raises(ValueError):
        RandomWaypoint(speed_min=0.0, speed_max=0.5)
    with pytest.raises(ValueError):
        RandomWaypoint(speed_min=0.6, speed_max=0.5)
    with pytest.raises(ValueError):
        RandomWaypoint(pause_set=())
    with pytest.raises(ValueError):
        RandomWaypoint(pause_set=(-1, 0))


def test_waypoint_pause_and_advance():
    geo = build_disk(2.5, 5)
    model = RandomWaypoint(speed_min=0.1, speed_max=0.2, pause_set=(3,))
    rng = random.Random(4)
    st = WaypointState(point=(1.0, 0.0), target=(2.0, 0.0), speed=0.25, pause_left=2)
    # pause frames tick down without moving
    st2 = step_waypoint(st, geo, model, rng)
    assert st2.point == st.point and st2.pause_left == 1
    st3 = step_waypoint(st2, geo, model, rng)
    assert st3.pause_left == 0
    # then the node advances straight toward the target by its speed
    st4 = step_waypoint(st3, geo, model, rng)
    assert math.isclose(st4.point[0], 1.25) and st4.point[1] == 0.0
    # arrival snaps to the target, draws pause from the model's set
    st5 = WaypointState(point=(1.9, 0.0), target=(2.0, 0.0), speed=0.25, pause_left=0)
    st6 = step_waypoint(st5, geo, model, rng)
    assert st6.point == (2.0, 0.0)
    assert st6.pause_left == 3
    assert model.speed_min <= st6.speed <= model.speed_max
    assert (st6.target[0] - 2.5) ** 2 + st6.target[1] ** 2 <= 2.5**2 + 1e-12


def test_waypoint_stays_in_disk():
    geo = build_disk(2.5, 5)
    model = RandomWaypoint(speed_min=0.1, speed_max=0.6, pause_set=tuple(range(11)))
    rng = random.Random(8)
    st = WaypointState(point=sample_uniform_disk(geo, rng),
                       target=sample_uniform_disk(geo, rng),
                       speed=0.3, pause_left=0)
    for _ in range(3000):
        st = step_waypoint(st, geo, model, rng)
        x, y = st.point
        assert (x - 2.5) ** 2 + y * y <= 2.5**2 * (1 + 1e-9)
