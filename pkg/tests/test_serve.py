import io
import json

from skyfleet.env import UavEnv
from skyfleet.presets import case_preset
from skyfleet.scenario import generate_scenario
from skyfleet.serve import ServeSession, serve_loop


def send(session, **msg):
    reply, keep_going = session.handle(json.dumps(msg))
    return reply, keep_going


class TestProtocol:
    def test_spec_case1(self):
        session = ServeSession(case_preset(1))
        reply, _ = send(session, cmd="spec")
        assert reply == {"n_states": 100, "n_actions": 5, "valid_actions": [[0, 1, 2, 3, 4]]}

    def test_spec_case9(self):
        session = ServeSession(case_preset(9))
        reply, _ = send(session, cmd="spec")
        assert reply["n_states"] == 10 * 10 * 4 * 5
        assert reply["n_actions"] == 9
        assert len(reply["valid_actions"]) == 3

    def test_reset_then_thirty_steps_hits_done(self):
        session = ServeSession(case_preset(1))
        reply, _ = send(session, cmd="reset", seed=7)
        assert reply["n_agents"] == 1
        assert len(reply["obs"]) == 1
        for k in range(30):
            reply, _ = send(session, cmd="step", actions=[4])
            assert reply["done"] is (k == 29)
            assert "qoe3" in reply["info"] and "crashes" in reply["info"]

    def test_same_seed_resets_identically(self):
        session = ServeSession(case_preset(2))
        a, _ = send(session, cmd="reset", seed=11)
        send(session, cmd="step", actions=[0, 0])
        b, _ = send(session, cmd="reset", seed=11)
        assert a == b

    def test_step_before_reset_is_an_error(self):
        session = ServeSession(case_preset(1))
        reply, keep_going = send(session, cmd="step", actions=[0])
        assert "error" in reply and keep_going

    def test_wrong_action_count(self):
        session = ServeSession(case_preset(1))
        send(session, cmd="reset", seed=0)
        reply, keep_going = send(session, cmd="step", actions=[0, 0])
        assert "error" in reply and keep_going

    def test_malformed_json_keeps_session_alive(self):
        session = ServeSession(case_preset(1))
        reply, keep_going = session.handle("{nope")
        assert "error" in reply and keep_going
        reply, _ = send(session, cmd="spec")
        assert "n_states" in reply

    def test_unknown_cmd(self):
        session = ServeSession(case_preset(1))
        reply, keep_going = send(session, cmd="dance")
        assert "error" in reply and keep_going

    def test_close_stops_the_loop(self):
        session = ServeSession(case_preset(1))
        _, keep_going = send(session, cmd="close")
        assert not keep_going


class TestFidelity:
    def test_rewards_match_direct_environment(self):
        # the protocol adds no semantics on top of the native step loop
        for case in (1, 6):
            config = case_preset(case, seed=13)
            session = ServeSession(config)
            send(session, cmd="reset", seed=13)
            script = [[(t + a) % 5 for a in range(config.num_uavs)] for t in range(30)]
            protocol_rewards = []
            for actions in script:
                reply, _ = send(session, cmd="step", actions=actions)
                protocol_rewards.append(reply["rewards"])

            world, users = generate_scenario(config)
            env = UavEnv(world, users, config)
            env.reset(0)
            native_rewards = [env.step(actions).rewards for actions in script]
            assert protocol_rewards == native_rewards


class TestLoop:
    def test_stdio_roundtrip(self):
        lines = "\n".join(
            [
                json.dumps({"cmd": "spec"}),
                json.dumps({"cmd": "reset", "seed": 3}),
                json.dumps({"cmd": "step", "actions": [4]}),
                "not json",
                json.dumps({"cmd": "close"}),
                json.dumps({"cmd": "spec"}),  # after close: never reached
            ]
        )
        out = io.StringIO()
        code = serve_loop(case_preset(1), io.StringIO(lines), out)
        assert code == 0
        replies = [json.loads(l) for l in out.getvalue().strip().splitlines()]
        assert len(replies) == 5
        assert "n_states" in replies[0]
        assert "error" in replies[3]
        assert replies[4] == {"ok": True}
