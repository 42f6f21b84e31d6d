"""Exact 2D geometry for the arena.

Obstacles are unions of convex parts (oriented rectangles and circles).
Everything that runs inside the per-tick loop has a vectorized variant
operating on (N, 2) point arrays; scalar wrappers exist for clarity at call
sites that only handle one segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Segments are treated as open at both ends for occlusion queries so that an
# agent standing flush against a wall does not occlude itself.
SEG_EPS = 1e-9


class ShapeKind(str, Enum):
    CROSS = "cross"
    RECTANGLE = "rectangle"
    LSHAPE = "lshape"
    CYLINDER = "cylinder"


# ---------------------------------------------------------------------------
# Convex parts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CirclePart:
    cx: float
    cy: float
    r: float

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.array([self.cx, self.cy])
        return np.einsum("ij,ij->i", d, d) <= self.r * self.r

    def distance(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.array([self.cx, self.cy])
        return np.maximum(np.sqrt(np.einsum("ij,ij->i", d, d)) - self.r, 0.0)

    def segment_hits(self, px: float, py: float, qx: float, qy: float, inflate: float = 0.0) -> bool:
        r = self.r + inflate
        return _seg_point_d2(px, py, qx, qy, self.cx, self.cy) <= r * r

    def segments_hit(self, origin: np.ndarray, targets: np.ndarray) -> np.ndarray:
        c = np.array([self.cx, self.cy])
        d = targets - origin
        oc = c - origin
        dd = np.einsum("ij,ij->i", d, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.einsum("ij,j->i", d, oc) / dd
        t = np.clip(np.nan_to_num(t, nan=0.0), SEG_EPS, 1.0 - SEG_EPS)
        closest = origin + t[:, None] * d
        dc = closest - c
        return np.einsum("ij,ij->i", dc, dc) <= self.r * self.r

    def ray_param(self, ox: float, oy: float, dx: float, dy: float, length: float, inflate: float = 0.0) -> float:
        """Distance along ray o + t*d (|d|=1) to first contact, or inf."""
        return _ray_circle(ox, oy, dx, dy, self.cx, self.cy, self.r + inflate, length)


@dataclass(frozen=True)
class RectPart:
    cx: float
    cy: float
    hw: float
    hh: float
    angle: float
    ux: float = field(init=False)
    uy: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ux", math.cos(self.angle))
        object.__setattr__(self, "uy", math.sin(self.angle))

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.array([self.cx, self.cy])
        return np.stack(
            [d[:, 0] * self.ux + d[:, 1] * self.uy, -d[:, 0] * self.uy + d[:, 1] * self.ux],
            axis=1,
        )

    def local_pt(self, x: float, y: float) -> tuple[float, float]:
        dx = x - self.cx
        dy = y - self.cy
        return dx * self.ux + dy * self.uy, -dx * self.uy + dy * self.ux

    def corners(self) -> np.ndarray:
        u = np.array([self.ux, self.uy])
        v = np.array([-self.uy, self.ux])
        c = np.array([self.cx, self.cy])
        return np.array(
            [
                c + self.hw * u + self.hh * v,
                c + self.hw * u - self.hh * v,
                c - self.hw * u - self.hh * v,
                c - self.hw * u + self.hh * v,
            ]
        )

    def contains(self, pts: np.ndarray) -> np.ndarray:
        loc = self.to_local(pts)
        return (np.abs(loc[:, 0]) <= self.hw) & (np.abs(loc[:, 1]) <= self.hh)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        loc = self.to_local(pts)
        dx = np.maximum(np.abs(loc[:, 0]) - self.hw, 0.0)
        dy = np.maximum(np.abs(loc[:, 1]) - self.hh, 0.0)
        return np.hypot(dx, dy)

    def segment_hits(self, px: float, py: float, qx: float, qy: float, inflate: float = 0.0) -> bool:
        lpx, lpy = self.local_pt(px, py)
        lqx, lqy = self.local_pt(qx, qy)
        dx = lqx - lpx
        dy = lqy - lpy
        if inflate == 0.0:
            return _slab_hit(lpx, lpy, dx, dy, self.hw, self.hh, SEG_EPS, 1.0 - SEG_EPS)
        # Minkowski sum with a disk: two expanded rectangles plus corner circles.
        if _slab_hit(lpx, lpy, dx, dy, self.hw + inflate, self.hh, 0.0, 1.0):
            return True
        if _slab_hit(lpx, lpy, dx, dy, self.hw, self.hh + inflate, 0.0, 1.0):
            return True
        r2 = inflate * inflate
        for sx in (-self.hw, self.hw):
            for sy in (-self.hh, self.hh):
                if _seg_point_d2(lpx, lpy, lqx, lqy, sx, sy) <= r2:
                    return True
        return False

    def segment_distance(self, p: np.ndarray, q: np.ndarray) -> float:
        """Min distance from closed segment pq to this rectangle (0 on overlap)."""
        lpx, lpy = self.local_pt(float(p[0]), float(p[1]))
        lqx, lqy = self.local_pt(float(q[0]), float(q[1]))
        if _slab_hit(lpx, lpy, lqx - lpx, lqy - lpy, self.hw, self.hh, 0.0, 1.0):
            return 0.0
        best = min(float(self.distance(np.stack([p]))[0]), float(self.distance(np.stack([q]))[0]))
        cs = self.corners()
        for i in range(4):
            best = min(best, _segment_segment_distance(p, q, cs[i], cs[(i + 1) % 4]))
        return best

    def segments_hit(self, origin: np.ndarray, targets: np.ndarray) -> np.ndarray:
        loc = self.to_local(np.vstack([origin[None, :], targets]))
        o = loc[0]
        d = loc[1:] - o
        return _slab_hit_vec(o, d, self.hw, self.hh, t_lo=SEG_EPS, t_hi=1.0 - SEG_EPS)

    def ray_param(self, ox: float, oy: float, dx: float, dy: float, length: float, inflate: float = 0.0) -> float:
        lox, loy = self.local_pt(ox, oy)
        ldx = dx * self.ux + dy * self.uy
        ldy = -dx * self.uy + dy * self.ux
        if inflate == 0.0:
            return _slab_enter(lox, loy, ldx, ldy, self.hw, self.hh, length)
        best = min(
            _slab_enter(lox, loy, ldx, ldy, self.hw + inflate, self.hh, length),
            _slab_enter(lox, loy, ldx, ldy, self.hw, self.hh + inflate, length),
        )
        for sx in (-self.hw, self.hw):
            for sy in (-self.hh, self.hh):
                best = min(best, _ray_circle(lox, loy, ldx, ldy, sx, sy, inflate, length))
        return best


Part = CirclePart | RectPart


def _slab_hit(ox: float, oy: float, dx: float, dy: float, hw: float, hh: float, t_lo: float, t_hi: float) -> bool:
    """Segment o + t*d for t in [t_lo, t_hi] meets the axis box |x|<=hw, |y|<=hh."""
    tmin, tmax = t_lo, t_hi
    if dx == 0.0:
        if ox < -hw or ox > hw:
            return False
    else:
        t0 = (-hw - ox) / dx
        t1 = (hw - ox) / dx
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
        if tmin > tmax:
            return False
    if dy == 0.0:
        if oy < -hh or oy > hh:
            return False
    else:
        t0 = (-hh - oy) / dy
        t1 = (hh - oy) / dy
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
        if tmin > tmax:
            return False
    return True


def _slab_enter(ox: float, oy: float, dx: float, dy: float, hw: float, hh: float, length: float) -> float:
    """Entry distance of ray o + t*d (|d| = 1) into the box, or inf."""
    tmin, tmax = 0.0, length
    if dx == 0.0:
        if ox < -hw or ox > hw:
            return math.inf
    else:
        t0 = (-hw - ox) / dx
        t1 = (hw - ox) / dx
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
        if tmin > tmax:
            return math.inf
    if dy == 0.0:
        if oy < -hh or oy > hh:
            return math.inf
    else:
        t0 = (-hh - oy) / dy
        t1 = (hh - oy) / dy
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tmin:
            tmin = t0
        if t1 < tmax:
            tmax = t1
        if tmin > tmax:
            return math.inf
    return tmin


def _ray_circle(ox: float, oy: float, dx: float, dy: float, cx: float, cy: float, r: float, length: float) -> float:
    """Distance along ray o + t*d (|d| = 1) to a circle, or inf; 0 inside."""
    ocx = ox - cx
    ocy = oy - cy
    c = ocx * ocx + ocy * ocy - r * r
    if c <= 0.0:
        return 0.0
    b = 2.0 * (dx * ocx + dy * ocy)
    disc = b * b - 4.0 * c
    if disc < 0.0:
        return math.inf
    t = (-b - math.sqrt(disc)) / 2.0
    return t if 0.0 <= t <= length else math.inf


def _seg_point_d2(px: float, py: float, qx: float, qy: float, cx: float, cy: float) -> float:
    """Squared distance from point c to closed segment pq."""
    dx = qx - px
    dy = qy - py
    dd = dx * dx + dy * dy
    if dd == 0.0:
        ex = cx - px
        ey = cy - py
        return ex * ex + ey * ey
    t = ((cx - px) * dx + (cy - py) * dy) / dd
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = cx - (px + t * dx)
    ey = cy - (py + t * dy)
    return ex * ex + ey * ey


def _slab_hit_vec(o: np.ndarray, d: np.ndarray, hw: float, hh: float, t_lo: float, t_hi: float) -> np.ndarray:
    tmin = np.full(d.shape[0], t_lo)
    tmax = np.full(d.shape[0], t_hi)
    for axis, h in ((0, hw), (1, hh)):
        da = d[:, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (-h - o[axis]) / da
            t1 = (h - o[axis]) / da
        lo = np.minimum(t0, t1)
        hi = np.maximum(t0, t1)
        parallel = da == 0.0
        inside = abs(o[axis]) <= h
        lo = np.where(parallel, -np.inf if inside else np.inf, lo)
        hi = np.where(parallel, np.inf if inside else -np.inf, hi)
        tmin = np.maximum(tmin, lo)
        tmax = np.minimum(tmax, hi)
    return tmin <= tmax


def _segment_point_distance(p: np.ndarray, q: np.ndarray, c: np.ndarray) -> float:
    d = q - p
    dd = float(np.dot(d, d))
    if dd == 0.0:
        return float(np.hypot(*(c - p)))
    t = float(np.dot(c - p, d)) / dd
    t = min(max(t, 0.0), 1.0)
    return float(np.hypot(*(c - (p + t * d))))


def _segment_segment_distance(p1, q1, p2, q2) -> float:
    if _segments_cross(p1, q1, p2, q2):
        return 0.0
    return min(
        _segment_point_distance(p1, q1, p2),
        _segment_point_distance(p1, q1, q2),
        _segment_point_distance(p2, q2, p1),
        _segment_point_distance(p2, q2, q1),
    )


def _segments_cross(p1, q1, p2, q2) -> bool:
    d1 = _cross(q2 - p2, p1 - p2)
    d2 = _cross(q2 - p2, q1 - p2)
    d3 = _cross(q1 - p1, p2 - p1)
    d4 = _cross(q1 - p1, q2 - p1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


# ---------------------------------------------------------------------------
# Obstacles
# ---------------------------------------------------------------------------


@dataclass
class Obstacle:
    """A placed obstacle; `parts` is the world-frame convex decomposition."""

    shape: ShapeKind
    center: tuple[float, float]
    yaw: float
    size_params: tuple[float, ...]
    parts: tuple[Part, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not self.parts:
            self.parts = _build_parts(self.shape, self.center, self.yaw, self.size_params)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape.value,
            "center": list(self.center),
            "yaw": self.yaw,
            "size_params": list(self.size_params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Obstacle":
        return cls(
            shape=ShapeKind(d["shape"]),
            center=tuple(d["center"]),
            yaw=float(d["yaw"]),
            size_params=tuple(d["size_params"]),
        )


def _rotate(x: float, y: float, yaw: float) -> tuple[float, float]:
    c, s = math.cos(yaw), math.sin(yaw)
    return x * c - y * s, x * s + y * c


def _build_parts(shape: ShapeKind, center, yaw, size) -> tuple[Part, ...]:
    cx, cy = center
    if shape is ShapeKind.CYLINDER:
        (r,) = size
        return (CirclePart(cx, cy, r),)
    if shape is ShapeKind.RECTANGLE:
        w, h = size
        return (RectPart(cx, cy, w / 2, h / 2, yaw),)
    if shape is ShapeKind.CROSS:
        length, thick = size
        return (
            RectPart(cx, cy, length / 2, thick / 2, yaw),
            RectPart(cx, cy, thick / 2, length / 2, yaw),
        )
    if shape is ShapeKind.LSHAPE:
        length, thick = size
        # Local frame: vertical leg hugs x = -L/2, horizontal leg hugs y = -L/2.
        ax, ay = _rotate(-(length - thick) / 2, 0.0, yaw)
        bx, by = _rotate(0.0, -(length - thick) / 2, yaw)
        return (
            RectPart(cx + ax, cy + ay, thick / 2, length / 2, yaw),
            RectPart(cx + bx, cy + by, length / 2, thick / 2, yaw),
        )
    raise ValueError(f"unknown shape {shape}")


def obstacle_distance(obstacle: Obstacle, pts: np.ndarray) -> np.ndarray:
    """Distance from each point to the obstacle region (0 inside)."""
    dists = [part.distance(pts) for part in obstacle.parts]
    return np.minimum.reduce(dists)


def point_in_obstacle(obstacle: Obstacle, pt, inflate: float = 0.0) -> bool:
    pts = np.asarray(pt, dtype=float)[None, :]
    if inflate > 0.0:
        return bool(obstacle_distance(obstacle, pts)[0] <= inflate)
    return bool(np.any([p.contains(pts)[0] for p in obstacle.parts]))


def point_clearance(obstacles, pt) -> float:
    """Distance from a point to the nearest obstacle (inf when none)."""
    pts = np.asarray(pt, dtype=float)[None, :]
    best = math.inf
    for ob in obstacles:
        best = min(best, float(obstacle_distance(ob, pts)[0]))
    return best


def segment_intersects_obstacle(p, q, obstacle: Obstacle, inflate: float = 0.0) -> bool:
    """True iff the closed segment pq meets the obstacle grown by `inflate`."""
    px, py = float(p[0]), float(p[1])
    qx, qy = float(q[0]), float(q[1])
    return any(part.segment_hits(px, py, qx, qy, inflate) for part in obstacle.parts)


def segment_clear(p, q, obstacles, inflate: float = 0.0) -> bool:
    px, py = float(p[0]), float(p[1])
    qx, qy = float(q[0]), float(q[1])
    for ob in obstacles:
        for part in ob.parts:
            if part.segment_hits(px, py, qx, qy, inflate):
                return False
    return True


def ray_obstacle_distance(o, d, length: float, obstacles, inflate: float = 0.0) -> float:
    """Free distance along unit ray d from o until an obstacle, capped at length."""
    ox, oy = float(o[0]), float(o[1])
    dx, dy = float(d[0]), float(d[1])
    best = length
    for ob in obstacles:
        for part in ob.parts:
            t = part.ray_param(ox, oy, dx, dy, length, inflate)
            if t < best:
                best = t
    return best


def ray_wall_distance(o, d, side: float, length: float) -> float:
    """Free distance along unit ray until leaving [0, side]^2, capped at length."""
    best = length
    for axis in (0, 1):
        if d[axis] > 0:
            best = min(best, (side - o[axis]) / d[axis])
        elif d[axis] < 0:
            best = min(best, -o[axis] / d[axis])
    return max(best, 0.0)


# ---------------------------------------------------------------------------
# Visibility
# ---------------------------------------------------------------------------


def visible(from_pose, target_xy, obstacles, max_range: float) -> bool:
    """360-degree sensing: within range and line of sight unobstructed.

    from_pose may be (x, y) or (x, y, orientation); orientation is ignored.
    The sight segment is open at both endpoints, so touching an obstacle
    boundary does not count as occlusion.
    """
    p = np.asarray(from_pose, dtype=float)[:2]
    q = np.asarray(target_xy, dtype=float)[:2]
    if float(np.hypot(*(q - p))) > max_range:
        return False
    shrink = q - p
    a = p + SEG_EPS * shrink
    b = q - SEG_EPS * shrink
    return segment_clear(a, b, obstacles)


def visible_mask(origin, targets: np.ndarray, obstacles, max_range: float) -> np.ndarray:
    """Vectorized `visible` for one origin against (N, 2) targets."""
    origin = np.asarray(origin, dtype=float)
    targets = np.asarray(targets, dtype=float)
    d = targets - origin
    ok = np.einsum("ij,ij->i", d, d) <= max_range * max_range
    if not ok.any():
        return ok
    idx = np.nonzero(ok)[0]
    sub = targets[idx]
    clear = np.ones(len(idx), dtype=bool)
    for ob in obstacles:
        for part in ob.parts:
            if not clear.any():
                break
            hit = part.segments_hit(origin, sub[clear])
            live = np.nonzero(clear)[0]
            clear[live[hit]] = False
    ok[idx] = clear
    return ok


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass
class OccupancyGrid:
    """Boolean occupancy over the arena; a cell is blocked when its center lies
    within `inflation` of an obstacle (inflation = agent radius)."""

    side: float
    resolution: float
    inflation: float
    blocked: np.ndarray
    obstacles: tuple[Obstacle, ...]

    @classmethod
    def build(
        cls,
        side: float,
        obstacles,
        resolution: float = 0.5,
        inflation: float = 0.5,
    ) -> "OccupancyGrid":
        n = int(round(side / resolution))
        centers = cell_centers(side, resolution)
        blocked = np.zeros(n * n, dtype=bool)
        flat = centers.reshape(-1, 2)
        for ob in obstacles:
            blocked |= obstacle_distance(ob, flat) <= inflation
        return cls(
            side=side,
            resolution=resolution,
            inflation=inflation,
            blocked=blocked.reshape(n, n),
            obstacles=tuple(obstacles),
        )

    @property
    def n(self) -> int:
        return self.blocked.shape[0]

    def cell_of(self, xy) -> tuple[int, int]:
        c = int(min(max(xy[0] // self.resolution, 0), self.n - 1))
        r = int(min(max(xy[1] // self.resolution, 0), self.n - 1))
        return r, c

    def center_of(self, r: int, c: int) -> np.ndarray:
        return np.array([(c + 0.5) * self.resolution, (r + 0.5) * self.resolution])

    def centers(self) -> np.ndarray:
        return cell_centers(self.side, self.resolution)

    def free_space_connected(self) -> bool:
        free = ~self.blocked
        total = int(free.sum())
        if total == 0:
            return False
        start = np.argwhere(free)[0]
        reached = _flood_fill(free, (int(start[0]), int(start[1])))
        return int(reached.sum()) == total


def cell_centers(side: float, resolution: float) -> np.ndarray:
    n = int(round(side / resolution))
    ax = (np.arange(n) + 0.5) * resolution
    xx, yy = np.meshgrid(ax, ax)  # rows index y, cols index x
    return np.stack([xx, yy], axis=-1)


def _flood_fill(free: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    n = free.shape[0]
    reached = np.zeros_like(free)
    stack = [start]
    reached[start] = True
    while stack:
        r, c = stack.pop()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < n and 0 <= cc < n and free[rr, cc] and not reached[rr, cc]:
                reached[rr, cc] = True
                stack.append((rr, cc))
    return reached


@dataclass
class SeenGrid:
    """Per-seeker accumulated visibility; monotone within an episode."""

    side: float
    resolution: float
    grid: np.ndarray

    @classmethod
    def empty(cls, side: float, resolution: float = 0.5) -> "SeenGrid":
        n = int(round(side / resolution))
        return cls(side=side, resolution=resolution, grid=np.zeros((n, n), dtype=bool))

    def copy(self) -> "SeenGrid":
        return SeenGrid(self.side, self.resolution, self.grid.copy())


def update_seen(seen_grid: SeenGrid, seeker_pose, obstacles, max_range: float) -> SeenGrid:
    """Mark every cell whose center is visible from the pose. In-place; the
    grid is also returned for call-site convenience."""
    origin = np.asarray(seeker_pose, dtype=float)[:2]
    res = seen_grid.resolution
    n = seen_grid.grid.shape[0]
    r0 = max(int((origin[1] - max_range) / res), 0)
    r1 = min(int((origin[1] + max_range) / res) + 1, n)
    c0 = max(int((origin[0] - max_range) / res), 0)
    c1 = min(int((origin[0] + max_range) / res) + 1, n)
    window = seen_grid.grid[r0:r1, c0:c1]
    cand = ~window
    if not cand.any():
        return seen_grid
    rows, cols = np.nonzero(cand)
    centers = np.stack([(cols + c0 + 0.5) * res, (rows + r0 + 0.5) * res], axis=1)
    vis = visible_mask(origin, centers, obstacles, max_range)
    window[rows[vis], cols[vis]] = True
    return seen_grid
