"""Top-down visual observations for seekers: a full-arena frame showing the
accumulated seen area, teammates (always), visible hiders, plus a self-mask
channel. Frames stack into the tensor consumed by learned policies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .geometry import SeenGrid, visible
from .world import Role, WorldState

OBS_SIZE = 156
DISK_RADIUS_PX = 2
TICK_OFFSETS_PX = (3, 4)  # orientation tick: two pixels just outside the disk

COLOR_UNKNOWN = (0, 0, 0)
COLOR_SEEN_FREE = (128, 128, 128)
COLOR_SEEN_OBSTACLE = (255, 255, 255)
COLOR_SEEKER = (255, 0, 0)
COLOR_HIDER = (0, 255, 0)
COLOR_TICK = (255, 255, 255)

_DISK = [
    (di, dj)
    for di in range(-DISK_RADIUS_PX, DISK_RADIUS_PX + 1)
    for dj in range(-DISK_RADIUS_PX, DISK_RADIUS_PX + 1)
    if di * di + dj * dj <= DISK_RADIUS_PX * DISK_RADIUS_PX
]


def world_to_pixel(x: float, y: float, arena_side: float, size: int = OBS_SIZE) -> tuple[int, int]:
    """(row, col) of the pixel containing world point (x, y); row 0 is the
    top of the image (largest y)."""
    mpp = arena_side / size
    col = min(max(int(x / mpp), 0), size - 1)
    row = min(max(int((arena_side - y) / mpp), 0), size - 1)
    return row, col


def pixel_to_world(row: int, col: int, arena_side: float, size: int = OBS_SIZE) -> tuple[float, float]:
    """World coordinates of a pixel center."""
    mpp = arena_side / size
    return (col + 0.5) * mpp, arena_side - (row + 0.5) * mpp


class Renderer:
    """Rasterizes observations for one fixed map. Precomputes, per pixel,
    whether its center lies inside an obstacle and which seen-grid cell it
    belongs to."""

    def __init__(self, world: WorldState, size: int = OBS_SIZE, mask_teammates: bool = False):
        self.size = size
        self.mask_teammates = mask_teammates
        self.arena_side = world.config.arena_side
        self.seeker_range = world.config.seeker_range
        self.obstacles = world.obstacles
        mpp = self.arena_side / size
        cols = (np.arange(size) + 0.5) * mpp
        rows = self.arena_side - (np.arange(size) + 0.5) * mpp
        px = np.tile(cols, size)
        py = np.repeat(rows, size)
        pts = np.stack([px, py], axis=1)
        inside = np.zeros(len(pts), dtype=bool)
        for ob in world.obstacles:
            for part in ob.parts:
                inside |= part.contains(pts)
        self._obstacle_px = inside.reshape(size, size)
        res = world.occupancy.resolution
        n = world.occupancy.blocked.shape[0]
        self._cell_rows = np.clip((py / res).astype(np.intp), 0, n - 1).reshape(size, size)
        self._cell_cols = np.clip((px / res).astype(np.intp), 0, n - 1).reshape(size, size)

    def render(self, world: WorldState, seeker_id: int, seen: SeenGrid) -> np.ndarray:
        """One H x W x 4 uint8 frame (R, G, B, self-mask) from seeker_id's
        point of view."""
        viewer = world.agent(seeker_id)
        if viewer.role is not Role.SEEKER:
            raise ValueError(f"agent {seeker_id} is not a seeker")
        if not viewer.alive:
            raise ValueError(f"seeker {seeker_id} is not alive")
        size = self.size
        obs = np.zeros((size, size, 4), dtype=np.uint8)
        seen_px = seen.grid[self._cell_rows, self._cell_cols]
        obs[seen_px & ~self._obstacle_px, :3] = COLOR_SEEN_FREE
        obs[seen_px & self._obstacle_px, :3] = COLOR_SEEN_OBSTACLE

        for hider in world.agents:
            if hider.role is not Role.HIDER or not hider.alive:
                continue
            if visible(
                viewer.pose, (hider.pos[0], hider.pos[1]), self.obstacles, self.seeker_range
            ):
                self._draw_agent(obs, hider, COLOR_HIDER)
        if not self.mask_teammates:
            for seeker in world.agents:
                if seeker.role is Role.SEEKER and seeker.alive and seeker.id != seeker_id:
                    self._draw_agent(obs, seeker, COLOR_SEEKER)
        self._draw_agent(obs, viewer, COLOR_SEEKER)

        r0, c0 = world_to_pixel(viewer.pos[0], viewer.pos[1], self.arena_side, size)
        r0 = min(max(r0, 1), size - 2)
        c0 = min(max(c0, 1), size - 2)
        obs[r0 - 1 : r0 + 2, c0 - 1 : c0 + 2, 3] = 1
        return obs

    def _draw_agent(self, obs: np.ndarray, agent, color: tuple[int, int, int]) -> None:
        size = self.size
        r0, c0 = world_to_pixel(agent.pos[0], agent.pos[1], self.arena_side, size)
        for di, dj in _DISK:
            r, c = r0 + di, c0 + dj
            if 0 <= r < size and 0 <= c < size:
                obs[r, c, :3] = color
        dr = -np.sin(agent.orientation)
        dc = np.cos(agent.orientation)
        for k in TICK_OFFSETS_PX:
            r = r0 + int(round(k * dr))
            c = c0 + int(round(k * dc))
            if 0 <= r < size and 0 <= c < size:
                obs[r, c, :3] = COLOR_TICK


def render_seeker_obs(
    world: WorldState, seeker_id: int, seen: SeenGrid, size: int = OBS_SIZE
) -> np.ndarray:
    """Stateless convenience wrapper; episode code should reuse a Renderer."""
    return Renderer(world, size).render(world, seeker_id, seen)


@dataclass
class FrameStack:
    """Ring of the last n frames for one seeker, oldest first. Before n
    frames exist, the earliest frame is repeated to fill the stack."""

    n: int = 5
    frames: list[np.ndarray] = field(default_factory=list)

    def push(self, obs: np.ndarray) -> np.ndarray:
        if self.frames and obs.shape != self.frames[-1].shape:
            raise ValueError(f"frame shape {obs.shape} != {self.frames[-1].shape}")
        self.frames.append(obs)
        if len(self.frames) > self.n:
            self.frames.pop(0)
        return self.stacked()

    def stacked(self) -> np.ndarray:
        if not self.frames:
            raise ValueError("empty frame stack")
        pad = [self.frames[0]] * (self.n - len(self.frames))
        return np.stack(pad + self.frames)


def push_frame(stack: FrameStack, obs: np.ndarray) -> np.ndarray:
    return stack.push(obs)


def save_observation(obs: np.ndarray, rgb_path, mask_path) -> None:
    """Persist one frame as a lossless pair: RGB image + single-channel mask."""
    Image.fromarray(obs[:, :, :3], mode="RGB").save(rgb_path)
    Image.fromarray(obs[:, :, 3], mode="L").save(mask_path)


def load_observation(rgb_path, mask_path) -> np.ndarray:
    rgb = np.asarray(Image.open(rgb_path).convert("RGB"), dtype=np.uint8)
    mask = np.asarray(Image.open(mask_path).convert("L"), dtype=np.uint8)
    if rgb.shape[:2] != mask.shape:
        raise ValueError(f"rgb {rgb.shape} and mask {mask.shape} disagree")
    return np.concatenate([rgb, mask[:, :, None]], axis=2)
