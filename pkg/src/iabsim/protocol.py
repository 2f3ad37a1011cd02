"""Wire protocol for driving environments from external processes.

One JSON message per line; every request gets exactly one response; ``id``
echoes back; unknown fields are ignored. Responses are serialized with sorted
keys and shortest round-trip float repr, so a replayed transcript produces
byte-identical output. See docs/protocol-v1.md for the message grammar.

A session owns one environment by default; messages may address additional
instances with an ``env`` field, and a ``batch`` envelope carries several
requests in one line for vectorized training.
"""

from __future__ import annotations

import json
import socketserver
import sys

import numpy as np

from .config import ScenarioConfig
from .env import InvalidActionError, ProtocolPhaseError, TwoTimescaleEnv

PROTOCOL_VERSION = 1


def _jsonify(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, dict):
        return {k: _jsonify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonify(v) for v in x]
    return x


def encode(msg: dict) -> bytes:
    return (json.dumps(_jsonify(msg), sort_keys=True) + "\n").encode()


class Session:
    """Request/response state machine for one client connection."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.envs: dict[int, TwoTimescaleEnv] = {}
        self.reset_done: set[int] = set()
        self.closed = False

    def handle_line(self, line: str) -> bytes:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            return encode({"type": "error", "id": None, "code": "BAD_MESSAGE",
                           "message": f"not valid JSON: {e}"})
        return encode(self.handle(msg))

    def handle(self, msg) -> dict:
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "id": None, "code": "BAD_MESSAGE",
                    "message": "message must be an object with a 'type' field"}
        mid = msg.get("id")
        mtype = msg["type"]
        try:
            if mtype == "batch":
                items = msg.get("items")
                if not isinstance(items, list):
                    raise _BadMessage("batch requires an 'items' list")
                return {"type": "batch", "id": mid,
                        "items": [self.handle(m) for m in items]}
            if mtype == "hello":
                return self._hello(mid)
            if mtype == "reset":
                return self._reset(msg, mid)
            if mtype == "step":
                return self._step(msg, mid)
            if mtype == "close":
                self.closed = True
                return {"type": "close", "id": mid}
            return {"type": "error", "id": mid, "code": "UNKNOWN_TYPE",
                    "message": f"unknown message type {mtype!r}"}
        except _BadMessage as e:
            return {"type": "error", "id": mid, "code": "BAD_MESSAGE", "message": str(e)}
        except InvalidActionError as e:
            return {"type": "error", "id": mid, "code": "INVALID_ACTION",
                    "constraint": e.constraint, "message": str(e)}
        except ProtocolPhaseError as e:
            code = "LONG_ACTION_PHASE" if "block" in str(e) else "EPISODE_DONE"
            return {"type": "error", "id": mid, "code": code, "message": str(e)}

    def _env(self, msg, create: bool = False) -> tuple[int, TwoTimescaleEnv]:
        env_id = int(msg.get("env", 0))
        if env_id not in self.envs:
            if not create:
                raise _BadMessage(f"env {env_id} does not exist; reset it first")
            self.envs[env_id] = TwoTimescaleEnv(self.cfg)
        return env_id, self.envs[env_id]

    def _hello(self, mid) -> dict:
        env = TwoTimescaleEnv(self.cfg)
        return {
            "type": "hello",
            "id": mid,
            "protocol": PROTOCOL_VERSION,
            "agents": {"short": env.short_agents, "long": env.long_agents},
            "layouts": env.layouts(),
            "long_block": self.cfg.long_block,
            "episode_len": self.cfg.episode_len,
            "config_hash": self.cfg.config_hash(),
        }

    def _reset(self, msg, mid) -> dict:
        env_id, env = self._env(msg, create=True)
        seed = msg.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise _BadMessage("seed must be an integer")
        short_obs, long_obs = env.reset(seed)
        self.reset_done.add(env_id)
        return {
            "type": "obs",
            "id": mid,
            "env": env_id,
            "slot": env.slot,
            "short_obs": {a: o.tolist() for a, o in short_obs.items()},
            "long_obs": {a: o.tolist() for a, o in long_obs.items()},
        }

    def _step(self, msg, mid) -> dict:
        env_id, env = self._env(msg, create=True)
        if env_id not in self.reset_done:
            return {"type": "error", "id": mid, "code": "NOT_RESET",
                    "message": f"env {env_id} has not been reset"}
        short_actions = msg.get("short_actions")
        if not isinstance(short_actions, dict):
            raise _BadMessage("step requires a 'short_actions' object")
        rec = env.step(short_actions, msg.get("long_actions"))
        out = {
            "type": "transition",
            "id": mid,
            "env": env_id,
            "slot": rec.slot,
            "short_rewards": rec.short_rewards,
            "global_short_reward": rec.global_short_reward,
            "short_obs": {a: o.tolist() for a, o in rec.short_obs.items()},
            "done": rec.done,
            "info": rec.info,
            "long_rewards": rec.long_rewards,
            "global_long_reward": rec.global_long_reward,
            "long_obs": ({a: o.tolist() for a, o in rec.long_obs.items()}
                         if rec.long_obs is not None else None),
        }
        return out


class _BadMessage(ValueError):
    pass


def serve_stdio(cfg: ScenarioConfig, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout.buffer
    session = Session(cfg)
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(session.handle_line(line))
        stdout.flush()
        if session.closed:
            break


def serve_tcp(cfg: ScenarioConfig, port: int, host: str = "127.0.0.1") -> None:
    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            session = Session(cfg)
            for raw in self.rfile:
                line = raw.decode()
                if not line.strip():
                    continue
                self.wfile.write(session.handle_line(line))
                if session.closed:
                    break

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as server:
        server.serve_forever()
