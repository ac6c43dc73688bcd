"""Stochastic benchmark systems and supervised-pair construction.

Gaussian variates come from numpy's PCG64 generator seeded with
``SeedSequence([seed, stream])``; stream 0 drives the process noise and
stream 1 the measurement noise.  PCG64 output is platform independent.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_continuous_are

from .dataset import Dataset
from .errors import InvalidInputError, InvalidParameterError

PROCESS_STREAM = 0
MEASUREMENT_STREAM = 1

# Linearised double inverted pendulum on a cart, state
# [theta0, theta1, theta2, dtheta0, dtheta1, dtheta2].
DIPC_A = np.array([
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, -7.49, 0.798, 0.0, 0.0, 0.0],
    [0.0, 74.93, -33.71, 0.0, 0.0, 0.0],
    [0.0, -59.94, 52.12, 0.0, 0.0, 0.0],
])
DIPC_B = np.array([0.0, 0.0, 0.0, -0.61, 1.5, -0.3])
DIPC_D = np.array([0.0, 0.0, 0.0, 0.1, 0.1, 0.1])
DIPC_K = np.array([-3.162, 589.127, -842.986, -29.493, 4.469, -133.079])
DIPC_Q = np.diag([10.0, 100.0, 100.0, 700.0, 700.0, 700.0])
DIPC_R = 1.0
DIPC_STATE_NAMES = ["theta0", "theta1", "theta2", "dtheta0", "dtheta1", "dtheta2"]
DIPC_MEASUREMENT_STD = np.array([0.5, 0.3, 0.25, 0.8, 0.3, 0.2])

MSD_STATE_NAMES = ["x", "xdot"]
MSD_MEASUREMENT_STD = np.array([0.1, 0.4])


def rng_for(seed, stream):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream])))


@dataclass
class SdeConfig:
    """Integration settings for ``dx = f(x) dt + G dW``.

    ``noise_scaling`` selects the increment law: ``"wiener"`` draws
    ``dW ~ N(0, dt)`` (Euler-Maruyama), ``"per_step"`` applies a unit-variance
    disturbance ``G w_k`` at every step regardless of ``dt``.

    ``drift_scheme`` is ``"exponential"`` (propagate the linear drift exactly
    with ``expm(A dt)``) or ``"euler"`` (``I + A dt``).
    """
    initial_state: np.ndarray
    dt: float
    duration: float
    process_noise_map: np.ndarray
    measurement_noise_std: np.ndarray
    rng_seed: int = 0
    noise_scaling: str = "wiener"
    drift_scheme: str = "exponential"

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=float)
        G = np.asarray(self.process_noise_map, dtype=float)
        self.process_noise_map = G[:, None] if G.ndim == 1 else G
        self.measurement_noise_std = np.broadcast_to(
            np.asarray(self.measurement_noise_std, dtype=float),
            self.initial_state.shape).copy()
        if not self.dt > 0:
            raise InvalidParameterError("dt must be positive")
        if not self.duration >= self.dt:
            raise InvalidParameterError("duration must be at least dt")
        if self.process_noise_map.shape[0] != self.initial_state.shape[0]:
            raise InvalidParameterError("process noise map rows must match the state size")
        if self.noise_scaling not in ("wiener", "per_step"):
            raise InvalidParameterError(f"unknown noise scaling {self.noise_scaling!r}")
        if self.drift_scheme not in ("exponential", "euler"):
            raise InvalidParameterError(f"unknown drift scheme {self.drift_scheme!r}")
        if np.any(self.measurement_noise_std < 0):
            raise InvalidParameterError("measurement noise std must be non-negative")

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def without_noise(self):
        k = self.initial_state.shape[0]
        return SdeConfig(self.initial_state, self.dt, self.duration,
                         np.zeros((k, self.process_noise_map.shape[1])), np.zeros(k),
                         self.rng_seed, self.noise_scaling, self.drift_scheme)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray = None
    state_names: list = None


def euler_maruyama(drift_matrix, config):
    """Integrate the linear SDE ``dx = drift_matrix x dt + G dW``.

    Each step maps ``x`` through the drift propagator and adds the
    Euler-Maruyama increment ``G dW``.  Returns states without measurement
    noise, shape (n_steps, k); the first row is the initial state.
    """
    n = config.n_steps
    k = config.initial_state.shape[0]
    G = config.process_noise_map
    rng = rng_for(config.rng_seed, PROCESS_STREAM)
    w = rng.standard_normal((n - 1, G.shape[1]))
    if config.noise_scaling == "wiener":
        w *= math.sqrt(config.dt)
    kicks = w @ G.T
    A = np.asarray(drift_matrix, dtype=float)
    if config.drift_scheme == "exponential":
        step = expm(A * config.dt)
    else:
        step = np.eye(k) + config.dt * A
    x = np.empty((n, k))
    x[0] = config.initial_state
    for i in range(n - 1):
        x[i + 1] = step @ x[i] + kicks[i]
    return x


def add_measurement_noise(states, std, seed):
    rng = rng_for(seed, MEASUREMENT_STREAM)
    return states + rng.standard_normal(states.shape) * std


def msd_drift(nu, gamma):
    return np.array([[0.0, 1.0], [-nu ** 2, -gamma]])


def msd_config(seed=0, dt=0.005, duration=10.0, noise=True):
    cfg = SdeConfig(initial_state=[3.0, 0.0], dt=dt, duration=duration,
                    process_noise_map=[[0.0], [1.0]],
                    measurement_noise_std=MSD_MEASUREMENT_STD, rng_seed=seed)
    return cfg if noise else cfg.without_noise()


def simulate_msd(config=None, nu=3.0, gamma=1.0):
    """Stochastic mass-spring-damper driven by white noise on the velocity."""
    config = msd_config() if config is None else config
    clean = euler_maruyama(msd_drift(nu, gamma), config)
    states = add_measurement_noise(clean, config.measurement_noise_std, config.rng_seed)
    times = np.arange(config.n_steps) * config.dt
    return Trajectory(times, states, None, list(MSD_STATE_NAMES))


def dipc_config(seed=0, dt=0.01, duration=200.0, noise=True):
    cfg = SdeConfig(initial_state=[0.0, 0.175, -0.175, 0.0, 0.0, 0.0], dt=dt,
                    duration=duration, process_noise_map=DIPC_D[:, None],
                    measurement_noise_std=DIPC_MEASUREMENT_STD, rng_seed=seed,
                    noise_scaling="per_step")
    return cfg if noise else cfg.without_noise()


def lqr_gain(A=DIPC_A, B=DIPC_B, Q=DIPC_Q, R=DIPC_R):
    """State-feedback gain from the continuous algebraic Riccati equation."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[0] == 1:
        B = B.T
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = solve_continuous_are(A, B, Q, R)
    return np.linalg.solve(R, B.T @ P).ravel()


def dipc_closed_loop(K=DIPC_K):
    return DIPC_A - np.outer(DIPC_B, K)


def simulate_dipc(config=None, K=DIPC_K):
    """LQR-regulated stochastic double inverted pendulum on a cart.

    The regulator drives the state to the origin; the recorded control is
    ``-K x`` evaluated on the true (unmeasured) state.
    """
    config = dipc_config() if config is None else config
    clean = euler_maruyama(dipc_closed_loop(K), config)
    controls = -clean @ np.asarray(K)
    states = add_measurement_noise(clean, config.measurement_noise_std, config.rng_seed)
    times = np.arange(config.n_steps) * config.dt
    return Trajectory(times, states, controls, list(DIPC_STATE_NAMES))


def make_supervised(traj, include_control=False):
    """Pair each state (plus control and time) with the next state."""
    n = traj.states.shape[0]
    if n < 2:
        raise InvalidInputError("a trajectory needs at least 2 samples")
    names = list(traj.state_names or [f"s{j}" for j in range(traj.states.shape[1])])
    cols = [traj.states[:-1]]
    in_names = list(names)
    roles = ["input"] * len(names)
    if include_control:
        if traj.controls is None:
            raise InvalidInputError("trajectory has no control signal")
        cols.append(traj.controls[:-1, None])
        in_names.append("F")
        roles.append("control")
    cols.append(traj.times[:-1, None])
    in_names.append("time")
    roles.append("time")
    return Dataset(np.hstack(cols), traj.states[1:], in_names,
                   [f"{s}_next" for s in names], roles)


def train_test_split(data, test_fraction=0.33, rng_seed=0):
    """Uniform random row partition; the test size is ``ceil(fraction * N)``."""
    if not 0 < test_fraction < 1:
        raise InvalidParameterError("test_fraction must lie in (0, 1)")
    n = len(data)
    n_test = math.ceil(test_fraction * n)
    perm = rng_for(rng_seed, 2).permutation(n)
    return data.take(perm[n_test:]), data.take(perm[:n_test])
