"""Deterministic fixed-step scheduler wiring plants, controllers, sequencer
and the Modbus force-device loop together.

One owner thread steps everything; the API layer interacts only through an
atomic snapshot of the last completed tick and a serialized command queue
drained at tick boundaries.
"""

from __future__ import annotations

import dataclasses
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .config import RunConfig
from .control import (
    ForceSupervisorState,
    PidGains,
    PidState,
    force_supervisor_reconfigure,
    force_supervisor_reset,
    force_supervisor_step,
    pid_step,
    pid_tune_defaults,
)
from .geometry import Pose
from .kinematics import forward_kinematics
from .modbus import AcfRegisterBank, AcfServer, ModbusClient
from .planner import MoldTrajectory, plan_mold_trajectory
from .plants import (
    AcfState,
    BladePhase,
    InterlockViolation,
    PneumaticState,
    SpoolEmpty,
    TapeState,
    ThermalZoneState,
    pneumatic_step,
    tape_mark_laid,
    tape_new_track,
    tape_step,
    thermal_step,
)
from .sequencer import (
    ADVANCING_STATES,
    SeqState,
    SequencerCommands,
    SequencerInputs,
    SequencerState,
    sequencer_step,
)
from .trace import TraceBuffer, TraceRecord, TraceWriter

log = logging.getLogger(__name__)

ZONE_NAMES = ("main_zone_1", "main_zone_2", "preheat")


@dataclass(frozen=True)
class IoImage:
    """Snapshot of all digital/analog I/O for one control tick."""

    feed_valve: bool = False
    blade_valve: bool = False
    heater_enable: Tuple[bool, bool, bool] = (False, False, False)
    auto_switch_rear: bool = True
    auto_switch_front: bool = False
    zone_temp: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    heater_power_cmd: Tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Command:
    type: str
    args: Dict = field(default_factory=dict)


@dataclass(frozen=True)
class CommandResult:
    ok: bool
    message: str = ""


VALID_COMMANDS = (
    "start",
    "stop",
    "ack_fault",
    "set_setpoint",
    "set_force",
    "set_gains",
    "manual_feed",
    "manual_cut",
    "jog",
)


class ScriptedCommands:
    """Deterministic command schedule for headless runs: (time s, Command)."""

    def __init__(self, schedule: List[Tuple[float, Command]]):
        self._schedule = sorted(schedule, key=lambda x: x[0])
        self._next = 0

    def due(self, t: float) -> List[Tuple[Command, Optional[Callable]]]:
        out = []
        while self._next < len(self._schedule) and self._schedule[self._next][0] <= t + 1e-12:
            out.append((self._schedule[self._next][1], None))
            self._next += 1
        return out


class QueueCommands:
    """Thread-safe live command source; callers may wait for the result."""

    def __init__(self):
        self._lock = threading.Lock()
        self._pending: List[Tuple[Command, Optional[Callable]]] = []

    def submit(self, cmd: Command, timeout: float = 2.0) -> CommandResult:
        done = threading.Event()
        box: List[CommandResult] = []

        def cb(result: CommandResult) -> None:
            box.append(result)
            done.set()

        with self._lock:
            self._pending.append((cmd, cb))
        if not done.wait(timeout):
            return CommandResult(False, "command not picked up by the control loop")
        return box[0]

    def submit_nowait(self, cmd: Command) -> None:
        with self._lock:
            self._pending.append((cmd, None))

    def due(self, t: float) -> List[Tuple[Command, Optional[Callable]]]:
        with self._lock:
            out = self._pending
            self._pending = []
        return out


@dataclass
class Snapshot:
    record: Optional[TraceRecord]
    state: str
    alarms: Tuple[str, ...]
    t: float
    done: bool


class Simulation:
    """The whole cell: plants, controllers, sequencer, Modbus, trace."""

    def __init__(self, cfg: RunConfig, trace_sink=None, modbus_port: Optional[int] = None):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.trace = trace_sink if trace_sink is not None else TraceBuffer(keep_last=1)

        self.zones = [ThermalZoneState.at_ambient(p) for p in cfg.zone_params]
        self.pids = [self._build_pid(i) for i in range(3)]
        self.temp_setpoint = cfg.window.temp_setpoint

        self.bank = AcfRegisterBank(
            AcfState(
                params=cfg.acf_params,
                target_force=cfg.model.acf.target_force,
                payload=cfg.model.acf.payload,
                contact_ramp=cfg.model.acf.contact_ramp,
            )
        )
        port = cfg.model.modbus.port if modbus_port is None else modbus_port
        self.server = AcfServer(self.bank, cfg.model.modbus.host, port).start()
        self.client = ModbusClient(
            self.server.host, self.server.port, timeout=cfg.model.modbus.timeout
        )
        self.supervisor = ForceSupervisorState(
            desired_force=cfg.model.acf.target_force,
            payload=cfg.model.acf.payload,
            contact_ramp=cfg.model.acf.contact_ramp,
        )

        self.pneumatics = PneumaticState(params=cfg.pneumatic_params)
        self.tape = TapeState(spool_remaining=cfg.model.tape.spool_length)
        self.seq = SequencerState()
        self.commands = SequencerCommands()

        self.home_pose = forward_kinematics(cfg.home_joints, cfg.kinematic_params).compose(
            cfg.kinematic_params.flange_to_mold
        )
        self.mold_pose = self.home_pose
        self.joints = cfg.home_joints.copy()
        self.jog_offset = np.zeros(3)
        self.trajectories: Dict[int, MoldTrajectory] = {}
        self._traj_s: Dict[int, np.ndarray] = {}

        self.tick_index = 0
        self.io = IoImage(zone_temp=tuple(z.temperature for z in self.zones))
        self.pending_alarms: List[str] = []
        self.fault_count = 0
        self.fault_since: Optional[float] = None
        self.time_in_window = 0.0
        self.consolidation_violations = 0
        self.laid_lengths: Dict[int, float] = {}
        self._lay_progress = 0.0
        self.manual_feed_active = False
        self.manual_cut_active = False
        self._manual_cut_extended = False
        self.finished = False
        self.exit_reason: Optional[str] = None
        self.last_record: Optional[TraceRecord] = None

        self._snap_lock = threading.Lock()
        self._snapshot = Snapshot(None, self.seq.state.value, (), 0.0, False)

    # -- construction helpers ------------------------------------------------

    def _build_pid(self, i: int) -> PidState:
        cfg = self.cfg
        raw = getattr(cfg.model.pid, ZONE_NAMES[i])
        zp = cfg.zone_params[i]
        if raw is None:
            gains = pid_tune_defaults(zp.capacity, zp.loss, zp.efficiency)
            alpha = 0.9
        else:
            gains = PidGains(raw.kp, raw.ki, raw.kd)
            alpha = raw.derivative_alpha
        return PidState(
            gains=gains, u_min=0.0, u_max=zp.power_max, derivative_alpha=alpha
        )

    def close(self) -> None:
        self.client.close()
        self.server.stop()

    def __enter__(self) -> "Simulation":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- commands ------------------------------------------------------------

    def _apply_command(self, cmd: Command) -> CommandResult:
        t = self.tick_index * self.cfg.control_period
        if cmd.type not in VALID_COMMANDS:
            return CommandResult(False, f"unknown command type {cmd.type!r}")
        if cmd.type == "start":
            self._pending_start = True
            return CommandResult(True, "start requested")
        if cmd.type == "stop":
            self._pending_stop = True
            return CommandResult(True, "stop requested")
        if cmd.type == "ack_fault":
            self._pending_ack = True
            self.supervisor = force_supervisor_reset(self.supervisor)
            return CommandResult(True, "fault acknowledge requested")
        if cmd.type == "set_setpoint":
            value = float(cmd.args["value"])
            self.temp_setpoint = value
            self.trace.event(t, "command", f"set_setpoint {value}")
            return CommandResult(True, f"setpoint {value} applied")
        if cmd.type == "set_force":
            value = float(cmd.args["value"])
            if value <= 0:
                return CommandResult(False, "force must be positive")
            self.supervisor = force_supervisor_reconfigure(self.supervisor, value)
            self.trace.event(t, "command", f"set_force {value}")
            return CommandResult(True, f"force target {value} N applied")
        if cmd.type == "set_gains":
            zone = cmd.args.get("zone", "main_zone_1")
            if zone not in ZONE_NAMES:
                return CommandResult(False, f"unknown zone {zone!r}")
            i = ZONE_NAMES.index(zone)
            gains = PidGains(
                float(cmd.args["kp"]), float(cmd.args["ki"]), float(cmd.args["kd"])
            )
            self.pids[i] = dataclasses.replace(self.pids[i], gains=gains)
            self.trace.event(t, "command", f"set_gains {zone}")
            return CommandResult(True, f"gains for {zone} applied")
        # manual operations are interlocked against the running process
        if self.seq.state is not SeqState.IDLE:
            return CommandResult(
                False, f"{cmd.type} refused: sequencer is {self.seq.state.value}"
            )
        if cmd.type == "manual_feed":
            self.manual_feed_active = True
            return CommandResult(True, "manual feed cycle started")
        if cmd.type == "manual_cut":
            self.manual_cut_active = True
            self._manual_cut_extended = False
            return CommandResult(True, "manual cut cycle started")
        if cmd.type == "jog":
            delta = np.array(
                [float(cmd.args.get(k, 0.0)) for k in ("dx", "dy", "dz")]
            )
            self.jog_offset = self.jog_offset + delta
            return CommandResult(True, "jog applied")
        raise AssertionError("unreachable")

    # -- trajectory ----------------------------------------------------------

    def _ensure_trajectory(self, track_index: int, seed: np.ndarray) -> bool:
        if track_index in self.trajectories:
            return True
        job = self.cfg.job
        if track_index >= len(job.tracks):
            return False
        try:
            traj = plan_mold_trajectory(
                job.tracks[track_index],
                self.cfg.nip,
                self.cfg.window.feed_speed,
                self.cfg.control_period,
                self.cfg.kinematic_params,
                seed=seed,
            )
        except Exception as e:
            self.pending_alarms.append(f"planning_failed:track {track_index}: {e}")
            return False
        self.trajectories[track_index] = traj
        self._traj_s[track_index] = np.array([s.s for s in traj])
        return True

    def _trajectory_sample(self, track_index: int, s: float):
        traj = self.trajectories.get(track_index)
        if traj is None or len(traj) == 0:
            return None
        idx = int(np.searchsorted(self._traj_s[track_index], s, side="right") - 1)
        idx = min(max(idx, 0), len(traj.samples) - 1)
        return traj.samples[idx]

    # -- one control tick ----------------------------------------------------

    def tick(self, command_source) -> None:
        cfg = self.cfg
        t = self.tick_index * cfg.control_period
        self._pending_start = False
        self._pending_stop = False
        self._pending_ack = False

        for cmd, cb in command_source.due(t):
            result = self._apply_command(cmd)
            if not result.ok:
                self.trace.event(t, "refusal", f"{cmd.type}: {result.message}")
            if cb is not None:
                cb(result)

        if self._pending_start:
            self._ensure_trajectory(self.seq.current_track, self.joints)

        # sensors
        noise = (
            self.rng.normal(0.0, cfg.noise_std, size=3)
            if cfg.noise_std > 0
            else np.zeros(3)
        )
        temps = tuple(z.temperature + n for z, n in zip(self.zones, noise))

        # temperature loops; preheat tracks the process setpoint minus margin
        setpoints = (
            self.temp_setpoint,
            self.temp_setpoint,
            self.temp_setpoint - cfg.preheat_margin,
        )
        powers = []
        for i in range(3):
            if self.commands.heaters_enable:
                u, self.pids[i] = pid_step(
                    self.pids[i], setpoints[i], temps[i], cfg.control_period
                )
            else:
                u = 0.0
                self.pids[i] = dataclasses.replace(
                    self.pids[i], previous_measurement=temps[i], previous_derivative=0.0
                )
            powers.append(u)

        # force supervisor over Modbus
        self.supervisor, sup_alarms = force_supervisor_step(
            self.supervisor, self.client, enable=self.commands.acf_enable
        )
        self.pending_alarms.extend(sup_alarms)

        acf = self.bank.state
        prev_seq = self.seq
        inputs = SequencerInputs(
            start=self._pending_start,
            stop=self._pending_stop,
            ack_fault=self._pending_ack,
            auto_switch_rear=self.pneumatics.auto_switch_rear,
            auto_switch_front=self.pneumatics.auto_switch_front,
            blade_phase=self.pneumatics.blade_phase,
            temp_main_1=temps[0],
            temp_main_2=temps[1],
            acf_contact=acf.contact,
            acf_force=acf.actual_force,
            acf_stroke=acf.stroke,
            tail_remaining=self.tape.tail_remaining,
            spool_remaining=self.tape.spool_remaining,
            alarms=tuple(self.pending_alarms),
        )
        self.pending_alarms = []
        self.seq, self.commands = sequencer_step(
            self.seq, inputs, cfg.job, cfg.model.tape.cutter_to_nip_distance, cfg.control_period
        )
        self._note_transitions(prev_seq, t)

        # manual cycles only run while the sequencer is idle
        feed_valve = self.commands.feed_valve
        blade_valve = self.commands.blade_valve
        if self.seq.state is SeqState.IDLE:
            if self.manual_feed_active:
                if self.pneumatics.auto_switch_front:
                    self.manual_feed_active = False
                else:
                    feed_valve = True
            if self.manual_cut_active:
                if not self._manual_cut_extended:
                    if self.pneumatics.blade_phase is BladePhase.EXTENDED:
                        self._manual_cut_extended = True
                    else:
                        blade_valve = True
                elif self.pneumatics.blade_phase is BladePhase.RETRACTED:
                    self.manual_cut_active = False
        else:
            self.manual_feed_active = False
            self.manual_cut_active = False

        # plant substeps with zero-order-hold commands
        advancing = self.commands.advance_enable
        taping_speed = cfg.window.feed_speed if advancing else 0.0
        in_contact_zone = self.seq.state in (SeqState.APPROACHING,) + ADVANCING_STATES
        cut_this_tick = self.commands.issue_cut
        heater_on = self.commands.heaters_enable
        for sub in range(cfg.substeps):
            try:
                self.pneumatics, advance = pneumatic_step(
                    self.pneumatics, feed_valve, blade_valve, cfg.dt
                )
            except InterlockViolation as e:
                self.pending_alarms.append(f"interlock:{e}")
                advance = 0.0
            try:
                self.tape = tape_step(
                    self.tape,
                    advance,
                    taping_speed,
                    cfg.dt,
                    cutting=cut_this_tick and sub == 0,
                    cutter_to_nip_distance=cfg.model.tape.cutter_to_nip_distance,
                )
            except SpoolEmpty as e:
                self.pending_alarms.append(f"spool_empty:{e}")
            tape_speed = advance / cfg.dt + taping_speed
            for i in range(3):
                self.zones[i] = thermal_step(
                    self.zones[i], powers[i] if heater_on else 0.0, tape_speed, cfg.dt
                )
            # the mold only moves clear of the roller once contact is released
            if in_contact_zone or self.bank.state.contact:
                mold_gap = cfg.model.acf.contact_gap
            else:
                mold_gap = cfg.model.acf.contact_gap + cfg.model.acf.retract_clearance
            self.bank.step_plant(mold_gap, cfg.dt)

        if advancing:
            self._lay_progress = self.seq.s_progress

        # mold pose follows the planned trajectory for the active track
        sample = None
        if self.seq.state is not SeqState.IDLE or self.seq.job_done:
            sample = self._trajectory_sample(self.seq.current_track, self.seq.s_progress)
        if sample is not None:
            self.mold_pose = sample.mold_pose
            self.joints = sample.joints
        elif not self.seq.stop_requested:  # a stopped run keeps the frozen pose
            self.mold_pose = Pose(
                self.home_pose.position + self.jog_offset, self.home_pose.orientation
            )

        # bookkeeping
        in_window = cfg.window.temps_ok(temps[0], temps[1])
        if in_window:
            self.time_in_window += cfg.control_period
        if advancing:
            acf_now = self.bank.state
            if not (acf_now.actual_force >= cfg.window.min_force - 1e-9 and in_window):
                self.consolidation_violations += 1

        self.io = IoImage(
            feed_valve=feed_valve,
            blade_valve=blade_valve,
            heater_enable=(heater_on,) * 3,
            auto_switch_rear=self.pneumatics.auto_switch_rear,
            auto_switch_front=self.pneumatics.auto_switch_front,
            zone_temp=temps,
            heater_power_cmd=tuple(powers) if heater_on else (0.0, 0.0, 0.0),
        )

        self.tick_index += 1
        self._emit_trace(t)
        self._update_snapshot(t)

        if self.seq.state is SeqState.FAULT:
            if self.fault_since is None:
                self.fault_since = t
        else:
            self.fault_since = None

    def _note_transitions(self, prev: SequencerState, t: float) -> None:
        if prev.state is not self.seq.state:
            self.trace.event(
                t, "transition", f"{prev.state.value} -> {self.seq.state.value}"
            )
            if self.seq.state is SeqState.FAULT:
                self.fault_count += 1
                for a in self.seq.alarm_latch[len(prev.alarm_latch) :]:
                    self.trace.event(t, "alarm", a)
            if prev.state is SeqState.FINISHING_TAIL and self.seq.state is SeqState.RETRACTING:
                self.laid_lengths[prev.current_track] = self._lay_progress
                self.tape = tape_mark_laid(
                    self.tape, prev.current_track, 0.0, self._lay_progress
                )
                self.tape = tape_new_track(self.tape)
            if prev.state is SeqState.INDEXING and self.seq.state is SeqState.FEEDING:
                self._ensure_trajectory(self.seq.current_track, self.joints)
        if self.seq.alarm_latch and prev.alarm_latch == self.seq.alarm_latch[:-1]:
            # spool-short style precheck alarms latch without a state change
            if prev.state is self.seq.state:
                self.trace.event(t, "alarm", self.seq.alarm_latch[-1])

    def _emit_trace(self, t: float) -> None:
        acf = self.bank.state
        rec = TraceRecord(
            t=t,
            state=self.seq.state.value,
            track=self.seq.current_track,
            s_progress=self.seq.s_progress,
            feed_valve=int(self.io.feed_valve),
            blade_valve=int(self.io.blade_valve),
            heater_enable_1=int(self.io.heater_enable[0]),
            heater_enable_2=int(self.io.heater_enable[1]),
            heater_enable_3=int(self.io.heater_enable[2]),
            auto_switch_rear=int(self.io.auto_switch_rear),
            auto_switch_front=int(self.io.auto_switch_front),
            zone_temp_1=self.io.zone_temp[0],
            zone_temp_2=self.io.zone_temp[1],
            zone_temp_3=self.io.zone_temp[2],
            heater_power_1=self.io.heater_power_cmd[0],
            heater_power_2=self.io.heater_power_cmd[1],
            heater_power_3=self.io.heater_power_cmd[2],
            temp_setpoint=self.temp_setpoint,
            force_target=self.supervisor.desired_force,
            acf_force=acf.actual_force,
            acf_stroke=acf.stroke,
            acf_contact=int(acf.contact),
            acf_error=acf.error.value,
            spool_remaining=self.tape.spool_remaining,
            fed_length=self.tape.fed_length,
            tail_remaining=-1.0 if self.tape.tail_remaining is None else self.tape.tail_remaining,
            mold_x=self.mold_pose.position[0],
            mold_y=self.mold_pose.position[1],
            mold_z=self.mold_pose.position[2],
            mold_qw=self.mold_pose.orientation[0],
            mold_qx=self.mold_pose.orientation[1],
            mold_qy=self.mold_pose.orientation[2],
            mold_qz=self.mold_pose.orientation[3],
            q1=self.joints[0],
            q2=self.joints[1],
            q3=self.joints[2],
            q4=self.joints[3],
            q5=self.joints[4],
            q6=self.joints[5],
        )
        self.trace.write(rec)
        self.last_record = rec

    def _update_snapshot(self, t: float) -> None:
        with self._snap_lock:
            self._snapshot = Snapshot(
                record=self.last_record,
                state=self.seq.state.value,
                alarms=self.seq.alarm_latch,
                t=t,
                done=self.finished,
            )

    def snapshot(self) -> Snapshot:
        with self._snap_lock:
            return self._snapshot

    # -- run loop ------------------------------------------------------------

    def run(self, command_source, max_time: float = 600.0) -> Dict:
        """Run to job completion, stop, fault timeout, or max_time."""
        cfg = self.cfg
        stop_grace: Optional[float] = None
        wall_start = time.monotonic()
        while True:
            self.tick(command_source)
            t = self.tick_index * cfg.control_period
            if self.seq.job_done:
                self.exit_reason = "job_complete"
                break
            if self.seq.stop_requested:
                # let the ACF retract before declaring the halt complete
                if stop_grace is None:
                    stop_grace = t + 2.0
                if self.bank.state.stroke <= 1e-9 or t >= stop_grace:
                    self.exit_reason = "stopped"
                    break
            if (
                self.fault_since is not None
                and t - self.fault_since >= cfg.fault_timeout
            ):
                self.exit_reason = "fault_timeout"
                break
            if t >= max_time:
                self.exit_reason = "max_time"
                break
            if cfg.real_time_factor > 0:
                target = wall_start + t / cfg.real_time_factor
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
        self.finished = True
        self._update_snapshot(self.tick_index * cfg.control_period)
        return self.summary()

    def summary(self) -> Dict:
        return {
            "exit_reason": self.exit_reason,
            "sim_time": self.tick_index * self.cfg.control_period,
            "ticks": self.tick_index,
            "laid_lengths": dict(self.laid_lengths),
            "track_lengths": {i: t.length for i, t in enumerate(self.cfg.job.tracks)},
            "time_in_window": self.time_in_window,
            "fault_count": self.fault_count,
            "consolidation_violations": self.consolidation_violations,
            "alarms": list(self.seq.alarm_latch),
            "spool_remaining": self.tape.spool_remaining,
        }


def run_job(
    cfg: RunConfig,
    command_source=None,
    trace_path=None,
    max_time: float = 600.0,
    modbus_port: Optional[int] = None,
) -> Dict:
    """Run one job headless; returns the exit summary."""
    if command_source is None:
        command_source = ScriptedCommands([(0.0, Command("start"))])
    sink = TraceWriter(trace_path).open() if trace_path is not None else TraceBuffer(1)
    sim = Simulation(cfg, trace_sink=sink, modbus_port=modbus_port)
    try:
        summary = sim.run(command_source, max_time=max_time)
        summary["trace_records"] = sink.count
        return summary
    finally:
        sim.close()
        if isinstance(sink, TraceWriter):
            sink.close()
