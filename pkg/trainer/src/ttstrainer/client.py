"""Client for the simulator's line-oriented JSON protocol.

Talks to `iabsim serve` over a spawned stdio subprocess or a TCP socket. Any
error response raises ProtocolError after dumping the recent transcript, so a
training run never continues on a desynchronized session.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
from collections import deque

import numpy as np


class ProtocolError(RuntimeError):
    pass


class EnvClient:
    """One protocol session driving one environment instance."""

    def __init__(self, config_path: str | None = None, endpoint: str = "subprocess",
                 server_cmd: str = "iabsim", transcript_len: int = 40):
        self._transcript: deque[str] = deque(maxlen=transcript_len)
        self._proc = None
        self._sock = None
        if endpoint == "subprocess":
            cmd = [server_cmd, "serve", "--endpoint", "stdio"]
            if config_path:
                cmd += ["--config", str(config_path)]
            self._proc = subprocess.Popen(
                cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1)
            self._send_line = self._send_stdio
            self._recv_line = self._proc.stdout.readline
        elif endpoint.startswith("tcp:"):
            host, port = "127.0.0.1", int(endpoint.split(":", 1)[1])
            self._sock = socket.create_connection((host, port))
            self._fh = self._sock.makefile("rw", buffering=1)
            self._send_line = lambda l: self._fh.write(l + "\n")
            self._recv_line = self._fh.readline
        else:
            raise ValueError(f"endpoint must be 'subprocess' or 'tcp:<port>', got {endpoint!r}")
        self._next_id = 0
        self.hello = self._rpc({"type": "hello"})
        self.layouts = self.hello["layouts"]
        self.short_agents: list[str] = self.hello["agents"]["short"]
        self.long_agents: list[str] = self.hello["agents"]["long"]
        self.long_block: int = self.hello["long_block"]
        self.episode_len: int = self.hello["episode_len"]

    def _send_stdio(self, line: str) -> None:
        self._proc.stdin.write(line + "\n")
        self._proc.stdin.flush()

    def _rpc(self, msg: dict) -> dict:
        msg = {**msg, "id": self._next_id}
        self._next_id += 1
        line = json.dumps(msg)
        self._transcript.append(f">> {line}")
        self._send_line(line)
        reply = self._recv_line()
        if not reply:
            raise ProtocolError("server closed the stream\n" + self.transcript())
        self._transcript.append(f"<< {reply.strip()}")
        out = json.loads(reply)
        if out.get("type") == "error":
            sys.stderr.write(self.transcript() + "\n")
            raise ProtocolError(f"{out.get('code')}: {out.get('message')}")
        if out.get("id") != msg["id"]:
            raise ProtocolError(f"response id mismatch\n{self.transcript()}")
        return out

    def transcript(self) -> str:
        return "\n".join(self._transcript)

    def reset(self, seed: int):
        obs = self._rpc({"type": "reset", "seed": int(seed)})
        return (_np_map(obs["short_obs"]), _np_map(obs["long_obs"]))

    def step(self, short_actions: dict, long_actions: dict | None = None) -> dict:
        msg = {"type": "step",
               "short_actions": {a: _listify(v) for a, v in short_actions.items()}}
        if long_actions is not None:
            msg["long_actions"] = {a: _listify(v) for a, v in long_actions.items()}
        t = self._rpc(msg)
        t["short_obs"] = _np_map(t["short_obs"])
        if t.get("long_obs") is not None:
            t["long_obs"] = _np_map(t["long_obs"])
        return t

    def close(self) -> None:
        try:
            if self._proc is not None or self._sock is not None:
                self._rpc({"type": "close"})
        except Exception:
            pass
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _listify(v):
    if isinstance(v, dict):
        return {k: _listify(x) for k, x in v.items()}
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _np_map(d: dict) -> dict:
    return {a: np.asarray(v, dtype=np.float64) for a, v in d.items()}
