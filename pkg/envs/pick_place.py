"""Two-bin grid pick and place with sparse event rewards and a rendered camera."""
import numpy as np

from core.spaces import IMAGE, VECTOR, ActionSpace, ModalitySpec, SpaceSpec
from envs import render
from envs.base import Environment, Observation

BIN_WIDTH = 8
GRID_WIDTH = 2 * BIN_WIDTH
GRID_HEIGHT = 8

MOVE_POS_X, MOVE_NEG_X, MOVE_POS_Y, MOVE_NEG_Y, MOVE_UP, MOVE_DOWN, TOGGLE = range(7)
ACTION_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z", "toggle")

GRASP_REWARD = 1.0
SAME_BIN_RELEASE_REWARD = -1.0
PLACE_REWARD = 10.0

BIN_COLORS = ((70, 70, 90), (90, 70, 70))
BACKGROUND = (20, 20, 20)
OBJECT_COLORS = ((230, 60, 60), (60, 200, 80), (70, 110, 240), (230, 200, 50), (200, 80, 220))
GRIPPER_LOW = (255, 255, 255)
GRIPPER_HIGH = (255, 170, 0)
DEFAULT_TINT = (1.0, 0.55, 0.55)


def bin_of(x: int) -> int:
    return 0 if x < BIN_WIDTH else 1


class GridPickPlace(Environment):
    """Gripper above two adjacent bins, moving one cell per step.

    The gripper has two heights. It may only rise while holding an object and
    may only cross the wall between the bins while raised, so objects travel
    between bins only in the gripper. Grasping (+1) happens at the low height
    on a cell with an object. Toggling while holding drops the object in the
    same bin (-1). Carrying an object over the other bin opens the gripper
    automatically and places it there (+10). At most one event fires per step.

    Args:
        seed: Seed for object and gripper placement.
        image_size: Side of the square camera image, a multiple of 16.
        num_objects: Objects placed in bin 0 at reset.
        episode_length: Steps per episode.
        depth: Adds a single-channel ``depth`` image modality.
        tint_shift_at: Environment step after which the camera applies a global colour tint.
        tint: Per-channel tint factors.
    """

    name = "grid_pick_place"
    control_rate_hz = 2.0

    def __init__(
        self,
        seed: int = 0,
        image_size: int = 64,
        num_objects: int = 3,
        episode_length: int = 200,
        depth: bool = False,
        tint_shift_at: int | None = None,
        tint: tuple[float, float, float] = DEFAULT_TINT,
    ):
        super().__init__()
        if image_size % GRID_WIDTH:
            raise ValueError(f"image_size must be a multiple of {GRID_WIDTH}, got {image_size}")
        if not 0 < num_objects <= BIN_WIDTH * GRID_HEIGHT:
            raise ValueError(f"num_objects must fit in one bin, got {num_objects}")
        self.rng = np.random.default_rng(seed)
        self.image_size = image_size
        self.cell = image_size // GRID_WIDTH
        self.num_objects = num_objects
        self.episode_length = episode_length
        self.tint_shift_at = tint_shift_at
        self.tint_factors = tuple(float(f) for f in tint)
        self.tint_active = False
        self.total_steps = 0

        modalities = [
            ModalitySpec("image", IMAGE, (image_size, image_size, 3)),
            ModalitySpec("proprio", VECTOR, (4,)),
        ]
        if depth:
            modalities.append(ModalitySpec("depth", IMAGE, (image_size, image_size, 1)))
        self._spec = SpaceSpec(modalities=tuple(modalities), action=ActionSpace.discrete(len(ACTION_NAMES)))

        self.gripper = [0, 0]
        self.height = 0
        self.objects: list[list[int]] = []
        self.held: int | None = None
        self.grasp_bin = 0
        self.steps = 0

    @property
    def spec(self) -> SpaceSpec:
        return self._spec

    @property
    def holding(self) -> bool:
        return self.held is not None

    def set_tint(self, active: bool) -> None:
        self.tint_active = active

    def reset(self) -> Observation:
        cells = self.rng.choice(BIN_WIDTH * GRID_HEIGHT, size=self.num_objects, replace=False)
        self.objects = [[int(c % BIN_WIDTH), int(c // BIN_WIDTH)] for c in cells]
        self.gripper = [int(self.rng.integers(BIN_WIDTH)), int(self.rng.integers(GRID_HEIGHT))]
        self.height = 0
        self.held = None
        self.grasp_bin = 0
        self.steps = 0
        self.info = {}
        return self._observation()

    def _object_at(self, x: int, y: int) -> int | None:
        for index, (ox, oy) in enumerate(self.objects):
            if index != self.held and ox == x and oy == y:
                return index
        return None

    def _release(self) -> None:
        self.objects[self.held] = list(self.gripper)
        self.held = None
        self.height = 0

    def step(self, action) -> tuple[Observation, float, bool]:
        action = int(action)
        if not 0 <= action < len(ACTION_NAMES):
            raise ValueError(f"action index {action} outside [0, {len(ACTION_NAMES)})")
        events = {"grasp": False, "release_same": False, "place": False}
        reward = 0.0
        x, y = self.gripper

        if action in (MOVE_POS_X, MOVE_NEG_X):
            nx = int(np.clip(x + (1 if action == MOVE_POS_X else -1), 0, GRID_WIDTH - 1))
            if bin_of(nx) == bin_of(x) or self.height == 1:
                self.gripper[0] = nx
                if self.holding and bin_of(nx) != self.grasp_bin:
                    self._release()
                    events["place"] = True
                    reward = PLACE_REWARD
        elif action in (MOVE_POS_Y, MOVE_NEG_Y):
            self.gripper[1] = int(np.clip(y + (1 if action == MOVE_POS_Y else -1), 0, GRID_HEIGHT - 1))
        elif action in (MOVE_UP, MOVE_DOWN):
            if self.holding:
                self.height = 1 if action == MOVE_UP else 0
        elif self.holding:
            self._release()
            events["release_same"] = True
            reward = SAME_BIN_RELEASE_REWARD
        elif self.height == 0:
            index = self._object_at(x, y)
            if index is not None:
                self.held = index
                self.grasp_bin = bin_of(x)
                events["grasp"] = True
                reward = GRASP_REWARD

        if self.holding:
            self.objects[self.held] = list(self.gripper)
        self.steps += 1
        self.total_steps += 1
        if self.tint_shift_at is not None and self.total_steps >= self.tint_shift_at:
            self.tint_active = True
        self.info = events
        return self._observation(), reward, self.steps >= self.episode_length

    def _cell_box(self, x: int, y: int) -> tuple[int, int, int, int]:
        top = (self.image_size - GRID_HEIGHT * self.cell) // 2
        row0 = top + y * self.cell
        col0 = x * self.cell
        return row0, col0, row0 + self.cell, col0 + self.cell

    def render(self) -> np.ndarray:
        image = render.blank(self.image_size, BACKGROUND)
        for b in range(2):
            r0, c0, _, _ = self._cell_box(b * BIN_WIDTH, 0)
            _, _, r1, c1 = self._cell_box(b * BIN_WIDTH + BIN_WIDTH - 1, GRID_HEIGHT - 1)
            render.fill_rect(image, r0, c0, r1, c1, BIN_COLORS[b])
        for index, (ox, oy) in enumerate(self.objects):
            render.fill_rect(image, *self._cell_box(ox, oy), OBJECT_COLORS[index % len(OBJECT_COLORS)])
        r0, c0, r1, c1 = self._cell_box(*self.gripper)
        inset = self.cell // 4
        render.fill_rect(image, r0 + inset, c0 + inset, r1 - inset, c1 - inset,
                         GRIPPER_HIGH if self.height else GRIPPER_LOW)
        if self.tint_active:
            image = render.tint(image, self.tint_factors)
        return image

    def render_depth(self) -> np.ndarray:
        depth = np.zeros((self.image_size, self.image_size, 1), dtype=np.uint8)
        for index, (ox, oy) in enumerate(self.objects):
            if index != self.held:
                render.fill_rect(depth, *self._cell_box(ox, oy), (96,))
        render.fill_rect(depth, *self._cell_box(*self.gripper), (255 if self.height else 160,))
        return depth

    def _observation(self) -> Observation:
        x, y = self.gripper
        obs = {
            "image": self.render(),
            "proprio": np.array(
                [x / (GRID_WIDTH - 1), y / (GRID_HEIGHT - 1), float(self.height), float(self.holding)],
                dtype=np.float32,
            ),
        }
        if "depth" in self._spec:
            obs["depth"] = self.render_depth()
        return obs
