"""Wire protocol: handshake, state machine, determinism, serialization."""

import io
import json
import socket
import threading
import time

import numpy as np
import pytest

from iabsim.config import ScenarioConfig
from iabsim.protocol import PROTOCOL_VERSION, Session, encode, serve_stdio, serve_tcp

DESK = ScenarioConfig().replace(
    n_uuav=2, assoc_t=4, assoc_u=4, n_gue=12, sched_t=3, sched_u=2,
    candidate_pool=300, episode_len=20, long_block=5)


def rpc(session: Session, **msg) -> dict:
    return json.loads(session.handle_line(json.dumps(msg)))


def zero_step_msg(hello: dict, with_long: bool) -> dict:
    shorts = {a: [0.0] * hello["layouts"]["short"][a]["action_dim"]
              for a in hello["agents"]["short"]}
    msg = {"type": "step", "short_actions": shorts}
    if with_long:
        msg["long_actions"] = {a: [0.0, 0.0] for a in hello["agents"]["long"]}
    return msg


class TestHandshake:
    def test_hello_advertises_agents_and_layouts(self):
        s = Session(DESK)
        h = rpc(s, type="hello", id=1)
        assert h["type"] == "hello" and h["id"] == 1
        assert h["protocol"] == PROTOCOL_VERSION
        assert h["agents"]["short"] == ["uav0", "uav1", "uav2"]
        assert h["agents"]["long"] == ["uav1", "uav2"]
        assert h["long_block"] == 5 and h["episode_len"] == 20
        assert h["layouts"]["short"]["uav0"]["action_dim"] == 6  # 2 backhaul + 4 users

    def test_unknown_fields_ignored(self):
        s = Session(DESK)
        h = rpc(s, type="hello", id=2, flavor="grape", extra={"a": 1})
        assert h["type"] == "hello"


class TestStateMachine:
    def test_step_without_reset(self):
        s = Session(DESK)
        r = rpc(s, type="step", id=5, short_actions={})
        assert r["type"] == "error" and r["code"] == "NOT_RESET"

    def test_reset_then_steps(self):
        s = Session(DESK)
        h = rpc(s, type="hello", id=0)
        obs = rpc(s, type="reset", id=1, seed=7)
        assert obs["type"] == "obs" and obs["slot"] == 0
        assert set(obs["short_obs"]) == {"uav0", "uav1", "uav2"}
        t = rpc(s, id=2, **zero_step_msg(h, with_long=True))
        assert t["type"] == "transition" and t["slot"] == 0 and not t["done"]
        t = rpc(s, id=3, **zero_step_msg(h, with_long=False))
        assert t["slot"] == 1

    def test_long_action_phase_error(self):
        s = Session(DESK)
        h = rpc(s, type="hello", id=0)
        rpc(s, type="reset", id=1, seed=7)
        r = rpc(s, id=2, **zero_step_msg(h, with_long=False))
        assert r["type"] == "error" and r["code"] == "LONG_ACTION_PHASE"

    def test_invalid_action_error_names_constraint(self):
        s = Session(DESK)
        h = rpc(s, type="hello", id=0)
        rpc(s, type="reset", id=1, seed=7)
        msg = zero_step_msg(h, with_long=True)
        msg["short_actions"]["uav1"] = {"mask": [1, 1, 1, 1]}  # cap is 2
        r = rpc(s, id=2, **msg)
        assert r["type"] == "error" and r["code"] == "INVALID_ACTION"
        assert r["constraint"] == "CARDINALITY"

    def test_malformed_json_keeps_session_alive(self):
        s = Session(DESK)
        bad = json.loads(s.handle_line("{not json"))
        assert bad["type"] == "error" and bad["code"] == "BAD_MESSAGE"
        ok = rpc(s, type="hello", id=1)
        assert ok["type"] == "hello"

    def test_unknown_type(self):
        s = Session(DESK)
        r = rpc(s, type="frobnicate", id=9)
        assert r["code"] == "UNKNOWN_TYPE"

    def test_close(self):
        s = Session(DESK)
        r = rpc(s, type="close", id=4)
        assert r["type"] == "close" and s.closed

    def test_episode_done_error(self):
        s = Session(DESK)
        h = rpc(s, type="hello", id=0)
        rpc(s, type="reset", id=1, seed=3)
        for n in range(DESK.episode_len):
            t = rpc(s, id=n, **zero_step_msg(h, with_long=(n % 5 == 0)))
            assert t["type"] == "transition"
        assert t["done"]
        r = rpc(s, id=99, **zero_step_msg(h, with_long=True))
        assert r["type"] == "error" and r["code"] == "EPISODE_DONE"


class TestDeterminism:
    def transcript(self) -> list[str]:
        h = {"type": "hello", "id": 0}
        msgs = [h, {"type": "reset", "id": 1, "seed": 11}]
        session = Session(DESK)
        hello = rpc(session, **h)
        for n in range(12):
            msgs.append({"id": 2 + n, **zero_step_msg(hello, with_long=(n % 5 == 0))})
        return [json.dumps(m) for m in msgs]

    def test_replay_is_byte_identical(self):
        lines = self.transcript()
        out1 = b"".join(Session(DESK).handle_line(l) for l in lines)
        out2 = b"".join(Session(DESK).handle_line(l) for l in lines)
        assert out1 == out2

    def test_same_seed_reset_identical_payload(self):
        s = Session(DESK)
        a = s.handle_line(json.dumps({"type": "reset", "id": 1, "seed": 5}))
        b = s.handle_line(json.dumps({"type": "reset", "id": 1, "seed": 5}))
        assert a == b

    def test_float_round_trip_exact(self):
        s = Session(DESK)
        obs = rpc(s, type="reset", id=1, seed=13)
        env_obs, _ = __import__("iabsim").TwoTimescaleEnv(DESK).reset(13)
        for agent, values in obs["short_obs"].items():
            assert np.array_equal(np.array(values), env_obs[agent])


class TestBatchAndMultiEnv:
    def test_batch_envelope(self):
        s = Session(DESK)
        batch = {"type": "batch", "id": 7, "items": [
            {"type": "reset", "id": 1, "seed": 1, "env": 0},
            {"type": "reset", "id": 2, "seed": 2, "env": 1},
        ]}
        r = rpc(s, **batch)
        assert r["type"] == "batch" and r["id"] == 7
        assert [x["type"] for x in r["items"]] == ["obs", "obs"]
        assert r["items"][0]["short_obs"] != r["items"][1]["short_obs"]

    def test_envs_are_isolated(self):
        s = Session(DESK)
        h = rpc(s, type="hello", id=0)
        rpc(s, type="reset", id=1, seed=1, env=0)
        rpc(s, type="reset", id=2, seed=1, env=1)
        t0 = rpc(s, id=3, env=0, **zero_step_msg(h, with_long=True))
        # env 1 is still at slot 0 and still expects a long action
        t1 = rpc(s, id=4, env=1, **zero_step_msg(h, with_long=True))
        assert t0["slot"] == t1["slot"] == 0
        assert t0["short_obs"] == t1["short_obs"]


class TestTransports:
    def test_stdio_loop(self):
        lines = [json.dumps({"type": "hello", "id": 1}),
                 json.dumps({"type": "close", "id": 2}),
                 json.dumps({"type": "hello", "id": 3})]  # after close: unread
        stdin = io.StringIO("\n".join(lines) + "\n")
        out = io.BytesIO()
        serve_stdio(DESK, stdin=stdin, stdout=out)
        replies = out.getvalue().decode().strip().split("\n")
        assert len(replies) == 2
        assert json.loads(replies[0])["type"] == "hello"
        assert json.loads(replies[1])["type"] == "close"

    def test_tcp_round_trip(self):
        port = 40441
        t = threading.Thread(target=serve_tcp, args=(DESK, port), daemon=True)
        t.start()
        deadline = time.time() + 5
        sock = None
        while time.time() < deadline:
            try:
                sock = socket.create_connection(("127.0.0.1", port), timeout=1)
                break
            except OSError:
                time.sleep(0.05)
        assert sock is not None, "server did not come up"
        with sock:
            f = sock.makefile("rwb")
            f.write(json.dumps({"type": "hello", "id": 1}).encode() + b"\n")
            f.flush()
            reply = json.loads(f.readline())
            assert reply["type"] == "hello" and reply["id"] == 1
            f.write(json.dumps({"type": "close", "id": 2}).encode() + b"\n")
            f.flush()
            assert json.loads(f.readline())["type"] == "close"
