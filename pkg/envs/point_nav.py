"""Image-only navigation of an under-actuated two-wheeled robot to the arena center."""
import numpy as np

from core.spaces import IMAGE, ActionSpace, ModalitySpec, SpaceSpec
from envs import render
from envs.base import Environment, Observation

GOAL = np.array([0.5, 0.5])
EPISODE_LENGTH = 100
SPEED_DECAY = 0.9
TURN_DECAY = 0.8
THRUST_GAIN = 0.005
TURN_GAIN = 0.3
RESET_BURST = 20
RESET_POWER = 4.0

BACKGROUND = (30, 30, 30)
GOAL_COLOR = (40, 200, 60)
ROBOT_COLOR = (220, 60, 50)


class PointNav(Environment):
    """Robot in the unit square with momentum, steered by two wheel torques.

    Forward speed integrates the mean torque and the heading integrates their
    difference, both with decay. The camera looks straight down and draws the
    robot as a disk, so heading is only recoverable from motion across
    frames. Episodes last exactly :data:`EPISODE_LENGTH` steps; every reset
    scrambles the robot with a burst of high-power random torques.
    """

    name = "point_nav"
    control_rate_hz = 10.0

    def __init__(self, seed: int = 0, image_size: int = 64, robot_radius: float = 0.06):
        super().__init__()
        self.rng = np.random.default_rng(seed)
        self.image_size = image_size
        self.robot_radius = robot_radius
        self._spec = SpaceSpec(
            modalities=(ModalitySpec("image", IMAGE, (image_size, image_size, 3)),),
            action=ActionSpace.continuous(2, -1.0, 1.0),
        )
        self.position = self.rng.uniform(0.0, 1.0, size=2)
        self.heading = float(self.rng.uniform(-np.pi, np.pi))
        self.speed = 0.0
        self.turn_rate = 0.0
        self.steps = 0

    @property
    def spec(self) -> SpaceSpec:
        return self._spec

    @property
    def distance(self) -> float:
        """Distance to the goal in units of the arena side."""
        return float(np.linalg.norm(self.position - GOAL))

    def _advance(self, torques: np.ndarray, power: float = 1.0) -> None:
        left, right = np.clip(torques, -1.0, 1.0) * power
        self.speed = SPEED_DECAY * self.speed + THRUST_GAIN * 0.5 * (left + right)
        self.turn_rate = TURN_DECAY * self.turn_rate + TURN_GAIN * 0.5 * (left - right)
        self.heading = float(np.angle(np.exp(1j * (self.heading + self.turn_rate))))
        moved = self.position + self.speed * np.array([np.cos(self.heading), np.sin(self.heading)])
        clamped = np.clip(moved, 0.0, 1.0)
        if np.any(clamped != moved):
            self.speed = 0.0
        self.position = clamped

    def reset(self) -> Observation:
        for _ in range(RESET_BURST):
            self._advance(self.rng.choice([-1.0, 1.0], size=2), RESET_POWER)
        self.speed = 0.0
        self.turn_rate = 0.0
        self.steps = 0
        self.info = {"distance": self.distance}
        return self._observation()

    def step(self, action) -> tuple[Observation, float, bool]:
        self._advance(np.asarray(action, dtype=np.float64).reshape(2))
        self.steps += 1
        self.info = {"distance": self.distance}
        return self._observation(), -self.distance, self.steps >= EPISODE_LENGTH

    def render(self) -> np.ndarray:
        size = self.image_size
        image = render.blank(size, BACKGROUND)
        render.fill_disk(image, GOAL[1] * size, GOAL[0] * size, 0.04 * size, GOAL_COLOR)
        render.fill_disk(image, self.position[1] * size, self.position[0] * size,
                         self.robot_radius * size, ROBOT_COLOR)
        return image

    def _observation(self) -> Observation:
        return {"image": self.render()}
