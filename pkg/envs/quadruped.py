"""Kinematic quadruped that must roll off its back, stand up and walk forward."""
import numpy as np

from core.spaces import VECTOR, ActionSpace, ModalitySpec, SpaceSpec
from envs.a1_reward import QuadrupedState, a1_reward
from envs.base import Environment, Observation

JOINT_LIMIT = 2.0
LAG = 0.5
ROLL_SPEED = 0.3
RIGHTING_RATE = 0.25
COLLAPSE_RATE = 0.1
WALK_SPEED = 0.3
STRIDE = 0.1
STOOD_UP_Z = 0.9
FALLEN_Z = 0.3


class ToyQuadruped(Environment):
    """Twelve position-controlled joints on a body that rolls about its forward axis.

    The body's roll angle ``theta`` is ``pi`` when supine and ``0`` when
    upright. On its back the robot rolls over only by spreading its hips
    asymmetrically (legs 0 and 2 against legs 1 and 3). Once on its side it
    rights itself in proportion to how close every leg group is to the
    standing pose and slumps back onto its side otherwise. Forward velocity
    comes from knee oscillation while upright.

    The environment is reset-free: ``is_last`` is only raised when
    ``episode_length`` is set, which evaluation does.
    """

    name = "quadruped"
    control_rate_hz = 20.0

    def __init__(self, seed: int = 0, episode_length: int | None = None, upright_unit_range: bool = False):
        super().__init__()
        self.rng = np.random.default_rng(seed)
        self.episode_length = episode_length
        self.upright_unit_range = upright_unit_range
        self._spec = SpaceSpec(
            modalities=(ModalitySpec("proprio", VECTOR, (19,)),),
            action=ActionSpace.continuous(12, -JOINT_LIMIT, JOINT_LIMIT),
        )
        self.theta = np.pi
        self.q = np.zeros(12)
        self.v = np.zeros(3)
        self.roll_rate = 0.0
        self.steps = 0
        self._lying = True

    @property
    def spec(self) -> SpaceSpec:
        return self._spec

    @property
    def up(self) -> np.ndarray:
        return np.array([0.0, -np.sin(self.theta), np.cos(self.theta)])

    @property
    def q_hip(self) -> np.ndarray:
        return self.q[0:4]

    @property
    def q_shoulder(self) -> np.ndarray:
        return self.q[4:8]

    @property
    def q_knee(self) -> np.ndarray:
        return self.q[8:12]

    def state(self) -> QuadrupedState:
        return QuadrupedState(
            up=self.up, q_hip=self.q_hip.copy(), q_shoulder=self.q_shoulder.copy(),
            q_knee=self.q_knee.copy(), v=self.v.copy(),
        )

    def _observation(self) -> Observation:
        proprio = np.concatenate([self.up, self.q, self.v, [self.roll_rate]])
        return {"proprio": proprio.astype(np.float32)}

    def reset(self) -> Observation:
        self.theta = np.pi
        self.q = np.zeros(12)
        self.v = np.zeros(3)
        self.roll_rate = 0.0
        self.steps = 0
        self._lying = True
        self.info = {}
        return self._observation()

    def _pose_quality(self) -> float:
        s = self.state()
        terms = (
            1.0 - 0.25 * np.abs(s.q_hip + 0.2).sum(),
            1.0 - 0.25 * np.abs(s.q_shoulder + 0.2).sum(),
            1.0 - 0.25 * np.abs(s.q_knee - 1.0).sum(),
        )
        return float(min(np.clip(t, 0.0, 1.0) for t in terms))

    def step(self, action) -> tuple[Observation, float, bool]:
        target = np.clip(np.asarray(action, dtype=np.float64).reshape(12), -JOINT_LIMIT, JOINT_LIMIT)
        previous_knee = self.q_knee.copy()
        previous_theta = self.theta
        self.q = self.q + LAG * (target - self.q)

        spread = float(np.clip(self.q_hip[[0, 2]].mean() - self.q_hip[[1, 3]].mean(), -1.0, 1.0))
        if self.theta > np.pi / 2:
            self.theta -= ROLL_SPEED * max(spread, 0.0)
        else:
            pose = self._pose_quality()
            self.theta -= RIGHTING_RATE * self.theta * pose
            self.theta += COLLAPSE_RATE * (1.0 - pose) * max(np.pi / 2 - self.theta, 0.0)
        self.theta = float(np.clip(self.theta, 0.0, np.pi))
        self.roll_rate = (previous_theta - self.theta) * self.control_rate_hz

        upright = max(0.0, float(np.cos(self.theta)))
        stride = float(np.abs(self.q_knee - previous_knee).mean())
        v_x = WALK_SPEED * upright * min(1.0, stride / STRIDE)
        v_y = 0.2 * upright * spread
        self.v = np.array([v_x, v_y, 0.0])

        up_z = float(np.cos(self.theta))
        stood_up = self._lying and up_z >= STOOD_UP_Z
        fell = not self._lying and up_z < FALLEN_Z
        if stood_up:
            self._lying = False
        elif fell:
            self._lying = True

        breakdown = a1_reward(self.state(), self.upright_unit_range)
        self.steps += 1
        self.info = {"stood_up": stood_up, "fell": fell, "up_z": up_z}
        is_last = self.episode_length is not None and self.steps >= self.episode_length
        return self._observation(), breakdown.total, is_last
