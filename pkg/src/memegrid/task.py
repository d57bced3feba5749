"""Task-fitness layer: environment contract, built-in surrogate walker,
best-intermediate-reward rollouts, and a line-protocol adapter for external
environments.
"""

from __future__ import annotations

import json
import logging
import selectors
import subprocess
from typing import Protocol

import numpy as np

from . import neural
from . import rng as _rng

log = logging.getLogger(__name__)

OBS_DIM = 24


class EnvironmentFault(RuntimeError):
    """An external environment broke protocol, timed out, or died."""


class Environment(Protocol):
    def reset(self, seed: int) -> np.ndarray: ...

    def step(self, actions) -> tuple[np.ndarray, float, bool]: ...

    def close(self) -> None: ...


class SurrogateWalker:
    """Deterministic four-oscillator locomotion toy.

    Phase oscillators advance at fixed natural rates plus a torque term;
    forward velocity integrates torque projected on the oscillator swing,
    and the reward metric is distance travelled minus cumulative actuation
    energy. Same seed and action sequence always give the same trajectory.
    """

    OMEGA = np.array([0.10, 0.15, 0.20, 0.25])

    def __init__(self):
        self.phases = np.zeros(4)
        self.v = 0.0
        self.p = 0.0
        self.energy = 0.0
        self.torque = np.zeros(4)

    def reset(self, seed: int) -> np.ndarray:
        w = _rng.philox4(seed, _rng.P_ENV, 0, 0, 0, 0)
        self.phases = (2.0 * np.pi) * np.array(
            [float(_rng.word_to_u01(x)) for x in w]
        )
        self.v = 0.0
        self.p = 0.0
        self.energy = 0.0
        self.torque = np.zeros(4)
        return self._obs()

    def step(self, actions):
        actions = np.asarray(actions)
        if actions.shape != (4,) or actions.min() < 0 or actions.max() > 19:
            raise ValueError(f"actions must be four ints in [0, 19], got {actions}")
        self.torque = actions / 19.0 * 2.0 - 1.0
        self.phases = self.phases + (self.OMEGA + 0.2 * self.torque)
        self.v = 0.9 * self.v + 0.1 * float((self.torque * np.sin(self.phases)).sum()) / 4.0
        self.p += self.v
        self.energy += 0.005 * float((self.torque**2).sum())
        return self._obs(), self.p - self.energy, False

    def close(self):
        pass

    def _obs(self):
        obs = np.zeros(OBS_DIM)
        obs[0:4] = np.sin(self.phases)
        obs[4:8] = np.cos(self.phases)
        obs[8] = self.v
        obs[9] = self.p / 400.0
        obs[10:14] = self.torque
        return obs


def rollout_fitness(genome, h_g, env, max_steps, action_stream, env_seed,
                    record=None):
    """Run one episode and return the best intermediate metric.

    ``h_g`` is held constant for the whole rollout; the task state restarts
    at zero. On an environment fault the rollout is aborted, nothing is
    recorded, and None is returned.
    """
    h_t = np.zeros(neural.H_TASK)
    try:
        obs = np.asarray(env.reset(int(env_seed)), dtype=np.float64)
        best = None
        u = action_stream.uniforms(4 * max_steps)
        for s in range(max_steps):
            if obs.shape != (OBS_DIM,) or not np.all(np.isfinite(obs)):
                raise EnvironmentFault(f"bad observation at step {s}: {obs!r}")
            actions, h_t = neural.task_policy_step(
                genome, h_g, h_t, obs, u[4 * s:4 * s + 4]
            )
            obs, metric, done = env.step(actions)
            obs = np.asarray(obs, dtype=np.float64)
            metric = float(metric)
            best = metric if best is None else max(best, metric)
            if done:
                break
    except EnvironmentFault as exc:
        log.warning("rollout aborted: %s", exc)
        return None
    if record is not None and best is not None:
        record.add(best)
    return best


class FitnessRecord:
    """Running mean of rollout fitness since the agent was (re)born."""

    __slots__ = ("mean", "count")

    def __init__(self, mean=0.0, count=0):
        self.mean = mean
        self.count = count

    def add(self, value):
        self.count += 1
        self.mean += (value - self.mean) / self.count


# --- external environment adapter ------------------------------------------

_DEFAULT_TIMEOUT = 10.0


class ExternalEnvSession:
    """Environment implemented by a child process speaking JSON lines.

    Protocol (stdin/stdout, UTF-8, one JSON object per line):

        -> {"cmd": "reset", "seed": <u64>}          <- {"obs": [24 numbers]}
        -> {"cmd": "step", "actions": [4 ints]}     <- {"obs": [...], "metric": x, "done": b}
        -> {"cmd": "close"}                          (child exits)

    Any malformed line, timeout, or child death surfaces as
    EnvironmentFault; the simulation is expected to continue without the
    rollout's fitness.
    """

    def __init__(self, argv, timeout=_DEFAULT_TIMEOUT):
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise EnvironmentFault(f"cannot launch {argv!r}: {exc}") from exc
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.proc.stdout, selectors.EVENT_READ)

    def _send(self, obj):
        if self.proc.poll() is not None:
            raise EnvironmentFault("environment process has exited")
        try:
            self.proc.stdin.write(json.dumps(obj) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EnvironmentFault(f"write to environment failed: {exc}") from exc

    def _recv(self):
        if not self._sel.select(self.timeout):
            raise EnvironmentFault(f"environment timed out after {self.timeout}s")
        line = self.proc.stdout.readline()
        if not line:
            raise EnvironmentFault("environment closed its output")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise EnvironmentFault(f"malformed line from environment: {line!r}") from exc

    def reset(self, seed):
        self._send({"cmd": "reset", "seed": int(seed)})
        reply = self._recv()
        obs = reply.get("obs")
        if not isinstance(obs, list) or len(obs) != OBS_DIM:
            raise EnvironmentFault(f"reset reply missing 24-element obs: {reply!r}")
        return np.asarray(obs, dtype=np.float64)

    def step(self, actions):
        self._send({"cmd": "step", "actions": [int(x) for x in np.asarray(actions)]})
        reply = self._recv()
        try:
            obs = np.asarray(reply["obs"], dtype=np.float64)
            metric = float(reply["metric"])
            done = bool(reply["done"])
        except (KeyError, TypeError, ValueError) as exc:
            raise EnvironmentFault(f"bad step reply: {reply!r}") from exc
        if obs.shape != (OBS_DIM,):
            raise EnvironmentFault(f"step reply obs has shape {obs.shape}")
        return obs, metric, done

    def close(self):
        try:
            if self.proc.poll() is None:
                self._send({"cmd": "close"})
                self.proc.wait(timeout=2.0)
        except (EnvironmentFault, subprocess.TimeoutExpired):
            self.proc.kill()
        finally:
            self._sel.close()


def external_env_session(argv, timeout=_DEFAULT_TIMEOUT) -> ExternalEnvSession:
    return ExternalEnvSession(argv, timeout=timeout)
