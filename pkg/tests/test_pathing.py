"""find_path against a brute-force breadth-first oracle on random grids."""

import random

from vignette.build.pathing import find_path, reachable_from


def _oracle_distance(walkable, start, goals):
    """Plain BFS distance, written independently of the implementation."""
    if start not in walkable:
        return None
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt_frontier = []
        for x, y in frontier:
            for step in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if step in walkable and step not in dist:
                    dist[step] = dist[(x, y)] + 1
                    nxt_frontier.append(step)
        frontier = nxt_frontier
    found = [dist[g] for g in goals if g in dist]
    return min(found) if found else None


def _random_grid(rng, w=14, h=10, fill=0.7):
    return {
        (x, y)
        for x in range(w)
        for y in range(h)
        if rng.random() < fill
    }


def test_path_length_matches_oracle_on_100_grids():
    rng = random.Random(99)
    checked = blocked = 0
    for _ in range(100):
        walkable = _random_grid(rng)
        if len(walkable) < 10:
            continue
        tiles = sorted(walkable)
        start = rng.choice(tiles)
        goals = set(rng.sample(tiles, k=min(3, len(tiles))))
        expected = _oracle_distance(walkable, start, goals)
        path = find_path(walkable, start, goals)
        if expected is None:
            assert path is None
            blocked += 1
            continue
        assert path is not None
        assert len(path) - 1 == expected
        checked += 1
        # structural soundness: contiguous, on-grid, ends on a goal
        assert path[0] == start and path[-1] in goals
        assert all(t in walkable for t in path)
        for a, b in zip(path, path[1:]):
            assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
    assert checked > 40 and blocked > 0


def test_start_on_goal_is_trivial():
    walkable = {(0, 0), (1, 0)}
    assert find_path(walkable, (0, 0), {(0, 0)}) == [(0, 0)]


def test_unwalkable_start_or_empty_goals():
    walkable = {(0, 0), (1, 0)}
    assert find_path(walkable, (5, 5), {(0, 0)}) is None
    assert find_path(walkable, (0, 0), set()) is None


def test_reachable_from_matches_flood():
    rng = random.Random(7)
    walkable = _random_grid(rng)
    start = sorted(walkable)[0]
    got = reachable_from(walkable, start)
    # independent flood
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for step in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if step in walkable and step not in seen:
                seen.add(step)
                stack.append(step)
    assert got == seen
