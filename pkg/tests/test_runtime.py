"""Fixed-step runtime: scheduling, commands, trace, and reproducibility."""

import csv

import pytest

from atl_twin.runtime import (
    Command,
    QueueCommands,
    ScriptedCommands,
    Simulation,
    run_job,
)
from atl_twin.sequencer import SeqState
from atl_twin.trace import TRACE_COLUMNS, TraceBuffer


@pytest.fixture()
def sim(demo_config):
    with Simulation(demo_config, modbus_port=0) as s:
        yield s


def run_ticks(sim, source, n):
    for _ in range(n):
        sim.tick(source)


class TestCommands:
    def test_unknown_command_refused(self, sim):
        result = sim._apply_command(Command("open_pod_bay_doors"))
        assert not result.ok
        assert "unknown command" in result.message

    def test_setpoint_applies(self, sim):
        result = sim._apply_command(Command("set_setpoint", {"value": 180.0}))
        assert result.ok
        assert sim.temp_setpoint == 180.0

    def test_force_must_be_positive(self, sim):
        assert not sim._apply_command(Command("set_force", {"value": -5.0})).ok

    def test_set_gains_validates_zone(self, sim):
        bad = sim._apply_command(
            Command("set_gains", {"zone": "nope", "kp": 1, "ki": 0, "kd": 0})
        )
        assert not bad.ok
        ok = sim._apply_command(
            Command("set_gains", {"zone": "main_zone_2", "kp": 5.0, "ki": 0.2, "kd": 0.0})
        )
        assert ok.ok
        assert sim.pids[1].gains.kp == 5.0

    def test_manual_cycles_refused_while_running(self, sim):
        source = ScriptedCommands([(0.0, Command("start"))])
        run_ticks(sim, source, 60)  # feeding by now
        assert sim.seq.state is not SeqState.IDLE
        result = sim._apply_command(Command("manual_feed"))
        assert not result.ok and "refused" in result.message

    def test_manual_feed_runs_while_idle(self, sim):
        source = QueueCommands()
        source.submit_nowait(Command("manual_feed"))
        reached_front = False
        for _ in range(120):  # 1.2 s, feed travel is 0.5 s each way
            sim.tick(source)
            reached_front = reached_front or sim.pneumatics.auto_switch_front
        assert reached_front
        assert not sim.manual_feed_active
        assert sim.pneumatics.auto_switch_rear  # returned after the cycle

    def test_queue_reports_result_to_caller(self, demo_config):
        import threading

        with Simulation(demo_config, modbus_port=0) as sim:
            source = QueueCommands()
            box = []
            worker = threading.Thread(
                target=lambda: box.append(
                    source.submit(Command("set_setpoint", {"value": 190.0}))
                )
            )
            worker.start()
            for _ in range(50):
                sim.tick(source)
                if box:
                    break
            worker.join(timeout=2.0)
            assert box and box[0].ok


class TestTrace:
    def test_every_tick_traced_without_gaps(self, demo_config):
        buf = TraceBuffer(keep_last=1000)
        with Simulation(demo_config, trace_sink=buf, modbus_port=0) as sim:
            source = ScriptedCommands([(0.0, Command("start"))])
            run_ticks(sim, source, 500)
        assert buf.count == 500
        ts = [r.t for r in buf.records]
        dts = [b - a for a, b in zip(ts, ts[1:])]
        assert all(abs(d - demo_config.control_period) < 1e-9 for d in dts)

    def test_record_has_all_columns(self, sim):
        source = ScriptedCommands([(0.0, Command("start"))])
        run_ticks(sim, source, 5)
        for col in TRACE_COLUMNS:
            assert hasattr(sim.last_record, col)


class TestRunLoop:
    def test_stop_mid_taping_halts_cleanly(self, demo_config):
        source = ScriptedCommands(
            [(0.0, Command("start")), (25.0, Command("stop"))]
        )
        with Simulation(demo_config, modbus_port=0) as sim:
            summary = sim.run(source, max_time=120.0)
        assert summary["exit_reason"] == "stopped"
        assert summary["fault_count"] == 0
        # ACF retracted before the halt was declared complete
        assert sim.bank.state.stroke == pytest.approx(0.0, abs=1e-9)
        assert not sim.bank.state.contact

    def test_fault_timeout_exit(self, demo_config):
        demo_config.real_time_factor = 0.0
        with Simulation(demo_config, modbus_port=0) as sim:
            source = ScriptedCommands([(0.0, Command("start"))])
            # kill the device mid-run: comm timeouts must fault and time out
            orig_tick = sim.tick

            def tick(src):
                orig_tick(src)
                if sim.tick_index == 2000:
                    sim.server.stop()

            sim.tick = tick
            summary = sim.run(source, max_time=120.0)
        assert summary["exit_reason"] == "fault_timeout"
        assert any("acf_comm_timeout" in a for a in summary["alarms"])

    def test_max_time_exit(self, demo_config):
        with Simulation(demo_config, modbus_port=0) as sim:
            summary = sim.run(ScriptedCommands([]), max_time=0.5)
        assert summary["exit_reason"] == "max_time"

    def test_run_job_completes_demo(self, demo_config, tmp_path):
        trace = tmp_path / "trace.csv"
        summary = run_job(demo_config, trace_path=trace, modbus_port=0)
        assert summary["exit_reason"] == "job_complete"
        assert summary["fault_count"] == 0
        assert summary["consolidation_violations"] == 0
        assert set(summary["laid_lengths"]) == {0, 1, 2}
        with open(trace) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == summary["ticks"]
        assert (tmp_path / "trace.events.jsonl").exists()

    def test_noise_is_seeded(self, demo_config_dict, tmp_path):
        import json

        from atl_twin.config import load_config

        raw = json.loads(json.dumps(demo_config_dict))
        raw["sim"]["noise_std"] = 0.05
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(raw))
        outs = []
        for name in ("a.csv", "b.csv"):
            cfg = load_config(p)
            run_job(cfg, trace_path=tmp_path / name, max_time=5.0, modbus_port=0)
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]
