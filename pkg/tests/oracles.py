"""Independent oracles used to certify expected values in tests.

Everything here is computed from first principles with plain numpy (explicit
rotation matrices, hand-rolled grasp feasibility, BFS over a discretized
abstract graph) so it cannot share bugs with the library implementation.
"""

import math
from collections import deque

import numpy as np

# Card-flip domain constants, restated independently of the library.
CARD_TABLE = (-0.25, 0.25)
CARD_Z = 0.002
CARD_GRASPS = (
    (0.045, 0.0, -0.004),
    (-0.045, 0.0, -0.004),
    (0.0, 0.03, -0.004),
    (0.0, -0.03, -0.004),
)
CARD_REACH_CENTER = np.array([0.0, 0.0, 0.3])
CARD_REACH_RADIUS = 1.0


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rotation_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic angle between two rotation matrices via the trace formula."""
    tr = float(np.trace(r1.T @ r2))
    return math.acos(min(1.0, max(-1.0, (tr - 1.0) / 2.0)))


def card_feasible_grasps(x: float, y: float, yaw: float, flipped: bool) -> set:
    """Analytic grasp feasibility for a card at (x, y, yaw): the grasp's
    world point must lie inside the reach ball and not below the tabletop
    while over it."""
    roll = math.pi if flipped else 0.0
    R = rpy_matrix(roll, 0.0, yaw)
    out = set()
    for i, offset in enumerate(CARD_GRASPS):
        p = np.array([x, y, CARD_Z]) + R @ np.array(offset)
        if float(np.linalg.norm(p - CARD_REACH_CENTER)) > CARD_REACH_RADIUS:
            continue
        over_table = (
            CARD_TABLE[0] <= p[0] <= CARD_TABLE[1]
            and CARD_TABLE[0] <= p[1] <= CARD_TABLE[1]
        )
        if over_table and p[2] < 0.0:
            continue
        out.add(i)
    return out


def card_flip_solvable(start_flipped: bool, goal_flipped: bool, n_cells: int = 11, n_yaw: int = 8) -> bool:
    """BFS over the discretized (cell x yaw x flip-state) abstract graph.

    Nodes are grid poses; the slide skill connects any two nodes with the
    same flip state (it is free in x, y, yaw within the table), and the
    flip skill connects nodes of opposite flip states that share an
    analytically feasible grasp.
    """
    xs = np.linspace(CARD_TABLE[0], CARD_TABLE[1], n_cells)
    yaws = np.linspace(-math.pi, math.pi, n_yaw, endpoint=False)
    nodes = [
        (ix, iy, iw, f)
        for ix in range(n_cells)
        for iy in range(n_cells)
        for iw in range(n_yaw)
        for f in (False, True)
    ]
    grasps = {
        n: card_feasible_grasps(xs[n[0]], xs[n[1]], yaws[n[2]], n[3]) for n in nodes
    }
    # flip state f reaches the other iff some pair of nodes (a with f, b
    # with not f) shares a grasp; slide makes each flip-state component
    # fully connected, so BFS runs over the two-node flip-state graph.
    def flip_edge(f: bool) -> bool:
        union_f = set().union(*(grasps[n] for n in nodes if n[3] == f))
        union_g = set().union(*(grasps[n] for n in nodes if n[3] == (not f)))
        return bool(union_f & union_g)

    seen = {start_flipped}
    queue = deque([start_flipped])
    while queue:
        f = queue.popleft()
        if f == goal_flipped:
            return True
        if flip_edge(f) and (not f) not in seen:
            seen.add(not f)
            queue.append(not f)
    return goal_flipped in seen
