"""Observation rendering: palette, disk placement, masking, persistence."""

import numpy as np
import pytest

from hideseek.geometry import SeenGrid, update_seen
from hideseek.observation import (
    COLOR_HIDER,
    COLOR_SEEKER,
    COLOR_SEEN_FREE,
    COLOR_SEEN_OBSTACLE,
    COLOR_TICK,
    COLOR_UNKNOWN,
    OBS_SIZE,
    FrameStack,
    Renderer,
    load_observation,
    pixel_to_world,
    save_observation,
    world_to_pixel,
)
from hideseek.world import AgentState, Role, WorldConfig, make_world


def agent(aid, role, x, y, speed=5.0, alive=True, orientation=0.0):
    return AgentState(aid, role, np.array([x, y], dtype=float), orientation, speed, alive=alive)


def open_world(agents, n_obstacles=0):
    ns = sum(1 for a in agents if a.role is Role.SEEKER)
    nh = len(agents) - ns
    config = WorldConfig(n_obstacles=n_obstacles, n_seekers=ns, n_hiders=nh)
    return make_world(config, seed=3, spawns=agents)


def count_color(obs, color):
    return int(np.all(obs[:, :, :3] == color, axis=2).sum())


DISK_PX = 13  # radius-2 pixel disk


class TestPixelMapping:
    def test_round_trip_through_pixel_centers(self):
        for row in range(0, OBS_SIZE, 7):
            for col in range(0, OBS_SIZE, 7):
                x, y = pixel_to_world(row, col, 50.0)
                assert world_to_pixel(x, y, 50.0) == (row, col)

    def test_world_round_trip_stays_within_half_pixel(self, rng):
        mpp = 50.0 / OBS_SIZE
        for _ in range(200):
            x, y = rng.uniform(0, 50, 2)
            row, col = world_to_pixel(x, y, 50.0)
            wx, wy = pixel_to_world(row, col, 50.0)
            assert abs(wx - x) <= mpp / 2 + 1e-9
            assert abs(wy - y) <= mpp / 2 + 1e-9

    def test_row_zero_is_top(self):
        row_low, _ = world_to_pixel(25.0, 49.9, 50.0)
        row_high, _ = world_to_pixel(25.0, 0.1, 50.0)
        assert row_low == 0
        assert row_high == OBS_SIZE - 1


class TestRenderer:
    def test_palette_is_closed(self):
        world = open_world(
            [agent(0, Role.SEEKER, 25.0, 25.0), agent(1, Role.HIDER, 30.0, 25.0, speed=8.0)]
        )
        seen = SeenGrid.empty(50.0)
        update_seen(seen, (25.0, 25.0, 0.0), world.obstacles, 16.0)
        obs = Renderer(world).render(world, 0, seen)
        colors = {tuple(c) for c in obs[:, :, :3].reshape(-1, 3)}
        allowed = {COLOR_UNKNOWN, COLOR_SEEN_FREE, COLOR_SEEN_OBSTACLE, COLOR_SEEKER, COLOR_HIDER, COLOR_TICK}
        assert colors <= allowed

    def test_visible_hider_drawn_as_green_disk(self):
        world = open_world(
            [agent(0, Role.SEEKER, 25.0, 25.0), agent(1, Role.HIDER, 30.0, 25.0, speed=8.0)]
        )
        obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        assert count_color(obs, COLOR_HIDER) == DISK_PX

    def test_out_of_range_hider_not_drawn(self):
        world = open_world(
            [agent(0, Role.SEEKER, 10.0, 10.0), agent(1, Role.HIDER, 40.0, 40.0, speed=8.0)]
        )
        obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        assert count_color(obs, COLOR_HIDER) == 0

    def test_occluded_hider_not_drawn(self):
        seeker = agent(0, Role.SEEKER, 20.0, 25.0)
        hider = agent(1, Role.HIDER, 35.0, 25.0, speed=8.0)
        config = WorldConfig(n_seekers=1, n_hiders=1)
        for seed in range(20):
            world = make_world(config, seed=seed, spawns=[seeker, hider])
            from hideseek.geometry import visible

            if not visible(seeker.pose, (35.0, 25.0), world.obstacles, 16.0):
                obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
                assert count_color(obs, COLOR_HIDER) == 0
                return
        pytest.skip("no occluding map found in 20 seeds")

    def test_dead_hider_not_drawn(self):
        world = open_world(
            [agent(0, Role.SEEKER, 25.0, 25.0), agent(1, Role.HIDER, 30.0, 25.0, speed=8.0, alive=False)]
        )
        obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        assert count_color(obs, COLOR_HIDER) == 0

    def test_teammates_drawn_by_default(self):
        world = open_world(
            [
                agent(0, Role.SEEKER, 25.0, 25.0),
                agent(1, Role.SEEKER, 10.0, 40.0),
                agent(2, Role.HIDER, 45.0, 5.0, speed=8.0),
            ]
        )
        obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        assert count_color(obs, COLOR_SEEKER) == 2 * DISK_PX

    def test_mask_teammates_leaves_single_red_disk(self):
        world = open_world(
            [
                agent(0, Role.SEEKER, 25.0, 25.0),
                agent(1, Role.SEEKER, 10.0, 40.0),
                agent(2, Role.HIDER, 45.0, 5.0, speed=8.0),
            ]
        )
        obs = Renderer(world, mask_teammates=True).render(world, 0, SeenGrid.empty(50.0))
        assert count_color(obs, COLOR_SEEKER) == DISK_PX

    def test_self_mask_is_three_by_three_at_viewer(self):
        world = open_world(
            [agent(0, Role.SEEKER, 25.0, 25.0), agent(1, Role.HIDER, 45.0, 5.0, speed=8.0)]
        )
        obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        mask = obs[:, :, 3]
        assert int(mask.sum()) == 9
        r, c = world_to_pixel(25.0, 25.0, 50.0)
        assert mask[r - 1 : r + 2, c - 1 : c + 2].all()

    def test_seen_cells_colored_free_or_obstacle(self):
        config = WorldConfig(n_seekers=1, n_hiders=1)
        world = make_world(
            config,
            seed=11,
            spawns=[agent(0, Role.SEEKER, 2.0, 2.0), agent(1, Role.HIDER, 48.0, 48.0, speed=8.0)],
        )
        seen = SeenGrid.empty(50.0)
        seen.grid[:] = True  # everything surveyed
        obs = Renderer(world).render(world, 0, seen)
        assert count_color(obs, COLOR_UNKNOWN) == 0
        assert count_color(obs, COLOR_SEEN_OBSTACLE) > 0
        assert count_color(obs, COLOR_SEEN_FREE) > 0

    def test_unseen_world_is_black_except_agents(self):
        world = open_world(
            [agent(0, Role.SEEKER, 25.0, 25.0), agent(1, Role.HIDER, 45.0, 5.0, speed=8.0)]
        )
        obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        non_black = int((obs[:, :, :3] != 0).any(axis=2).sum())
        assert non_black == DISK_PX + 2  # self disk + orientation tick pixels

    def test_boundary_agent_renders_without_error(self):
        world = open_world(
            [agent(0, Role.SEEKER, 0.2, 0.2), agent(1, Role.HIDER, 45.0, 45.0, speed=8.0)]
        )
        obs = Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        assert 0 < count_color(obs, COLOR_SEEKER) <= DISK_PX

    def test_rejects_non_seeker_or_dead_viewer(self):
        dead = agent(0, Role.SEEKER, 25.0, 25.0, alive=False)
        world = open_world([dead, agent(1, Role.HIDER, 30.0, 25.0, speed=8.0)])
        with pytest.raises(ValueError):
            Renderer(world).render(world, 0, SeenGrid.empty(50.0))
        with pytest.raises(ValueError):
            Renderer(world).render(world, 1, SeenGrid.empty(50.0))


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        world = open_world(
            [agent(0, Role.SEEKER, 25.0, 25.0), agent(1, Role.HIDER, 30.0, 25.0, speed=8.0)]
        )
        seen = SeenGrid.empty(50.0)
        update_seen(seen, (25.0, 25.0, 0.0), world.obstacles, 16.0)
        obs = Renderer(world).render(world, 0, seen)
        rgb, mask = tmp_path / "f.png", tmp_path / "f.mask.png"
        save_observation(obs, rgb, mask)
        assert np.array_equal(load_observation(rgb, mask), obs)

    def test_mismatched_pair_rejected(self, tmp_path):
        from PIL import Image

        Image.new("RGB", (8, 8)).save(tmp_path / "a.png")
        Image.new("L", (4, 4)).save(tmp_path / "a.mask.png")
        with pytest.raises(ValueError):
            load_observation(tmp_path / "a.png", tmp_path / "a.mask.png")


class TestFrameStack:
    def frame(self, fill):
        return np.full((8, 8, 4), fill, dtype=np.uint8)

    def test_first_frame_repeats_to_fill(self):
        stack = FrameStack(n=4)
        out = stack.push(self.frame(7))
        assert out.shape == (4, 8, 8, 4)
        assert (out == 7).all()

    def test_oldest_first_and_rolls(self):
        stack = FrameStack(n=3)
        for fill in (1, 2, 3, 4):
            out = stack.push(self.frame(fill))
        assert [int(f[0, 0, 0]) for f in out] == [2, 3, 4]

    def test_partial_fill_pads_with_earliest(self):
        stack = FrameStack(n=4)
        stack.push(self.frame(1))
        out = stack.push(self.frame(2))
        assert [int(f[0, 0, 0]) for f in out] == [1, 1, 1, 2]

    def test_shape_mismatch_rejected(self):
        stack = FrameStack(n=3)
        stack.push(self.frame(1))
        with pytest.raises(ValueError):
            stack.push(np.zeros((9, 9, 4), dtype=np.uint8))

    def test_empty_stack_rejected(self):
        with pytest.raises(ValueError):
            FrameStack(n=3).stacked()
