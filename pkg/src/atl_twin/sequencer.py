"""Discrete process state machine for the taping cycle.

Pure transition function: it consumes a per-tick input snapshot and emits
valve/enable commands as values. The runtime loop owns the only instance
and performs all I/O. Faults latch and are only cleared by an explicit
operator acknowledge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from .planner import TapeTrack, TrackOffSurface, WidthOutOfRange, MAX_TAPE_WIDTH
from .plants import BladePhase


class SeqState(Enum):
    IDLE = "idle"
    FEEDING = "feeding"
    HEATING = "heating"
    APPROACHING = "approaching"
    TAPING = "taping"
    CUTTING = "cutting"
    FINISHING_TAIL = "finishing_tail"
    RETRACTING = "retracting"
    INDEXING = "indexing"
    FAULT = "fault"


# states in which the trajectory is allowed to advance
ADVANCING_STATES = (SeqState.TAPING, SeqState.CUTTING, SeqState.FINISHING_TAIL)


@dataclass(frozen=True)
class ProcessWindow:
    temp_setpoint: float  # deg C
    temp_tolerance: float  # K
    min_force: float  # N
    feed_speed: float  # m/s

    def __post_init__(self):
        if self.temp_tolerance <= 0 or self.min_force <= 0 or self.feed_speed <= 0:
            raise ValueError("process window values must be positive")

    def temps_ok(self, *temps: float) -> bool:
        return all(abs(t - self.temp_setpoint) <= self.temp_tolerance for t in temps)


@dataclass(frozen=True)
class Job:
    tracks: Tuple[TapeTrack, ...]
    window: ProcessWindow
    feed_waste_per_track: float  # tape consumed by the initial feed stroke, m

    @property
    def total_requirement(self) -> float:
        return sum(t.length for t in self.tracks) + self.feed_waste_per_track * len(self.tracks)

    def requirement_from(self, track_index: int) -> float:
        rest = self.tracks[track_index:]
        return sum(t.length for t in rest) + self.feed_waste_per_track * len(rest)


def job_plan(
    tracks: Sequence[TapeTrack], window: ProcessWindow, feed_waste_per_track: float = 0.0
) -> Job:
    """Validate and order the tracks of one job.

    Tracks must share a surface, keep their width inside the spool range,
    and lie on the surface.
    """
    tracks = tuple(tracks)
    for t in tracks:
        if not 0.0 < t.width <= MAX_TAPE_WIDTH:
            raise WidthOutOfRange(
                f"track {t.index}: width {t.width} m outside (0, {MAX_TAPE_WIDTH}]"
            )
        if t.surface is not tracks[0].surface:
            raise ValueError("all tracks of a job must lie on the same surface")
        if not t.on_surface():
            raise TrackOffSurface(f"track {t.index} leaves the mold surface")
    return Job(tracks, window, feed_waste_per_track)


@dataclass(frozen=True)
class SequencerInputs:
    # operator events, valid for this tick only
    start: bool = False
    stop: bool = False
    ack_fault: bool = False
    # plant snapshot
    auto_switch_rear: bool = True
    auto_switch_front: bool = False
    blade_phase: BladePhase = BladePhase.RETRACTED
    temp_main_1: float = 0.0
    temp_main_2: float = 0.0
    acf_contact: bool = False
    acf_force: float = 0.0
    acf_stroke: float = 0.0
    tail_remaining: Optional[float] = None
    spool_remaining: float = 0.0
    # external alarms raised since the last tick (supervisor, interlocks)
    alarms: Tuple[str, ...] = ()


@dataclass(frozen=True)
class SequencerCommands:
    feed_valve: bool = False
    blade_valve: bool = False
    advance_enable: bool = False
    acf_enable: bool = False
    heaters_enable: bool = False
    issue_cut: bool = False  # blade just reached full extension: mark the tape


@dataclass(frozen=True)
class SequencerState:
    state: SeqState = SeqState.IDLE
    current_track: int = 0
    s_progress: float = 0.0
    alarm_latch: Tuple[str, ...] = ()
    cut_issued: bool = False
    blade_extended_seen: bool = False
    job_done: bool = False
    stop_requested: bool = False


def sequencer_step(
    st: SequencerState,
    inputs: SequencerInputs,
    job: Job,
    cutter_to_nip_distance: float,
    dt: float,
) -> Tuple[SequencerState, SequencerCommands]:
    """Advance the process state machine by one control tick."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    window = job.window
    heaters_on = st.state is not SeqState.IDLE or st.job_done

    # fault entry dominates everything except acknowledge
    if inputs.alarms and st.state is not SeqState.FAULT:
        latched = st.alarm_latch + tuple(inputs.alarms)
        return (
            replace(st, state=SeqState.FAULT, alarm_latch=latched),
            SequencerCommands(heaters_enable=True),
        )

    if st.state is SeqState.FAULT:
        if inputs.ack_fault:
            return (
                replace(st, state=SeqState.IDLE, alarm_latch=(), cut_issued=False),
                SequencerCommands(heaters_enable=True),
            )
        return st, SequencerCommands(heaters_enable=True)

    if inputs.stop and st.state is not SeqState.IDLE:
        # controlled halt: trajectory frozen, ACF retracted, heaters stay up
        return (
            replace(st, state=SeqState.IDLE, stop_requested=True),
            SequencerCommands(heaters_enable=True),
        )

    if st.state is SeqState.IDLE:
        if inputs.start and not st.job_done and job.tracks:
            required = job.requirement_from(st.current_track)
            if inputs.spool_remaining < required:
                latched = st.alarm_latch + (
                    f"spool_short:need {required:.3f} m, have {inputs.spool_remaining:.3f} m",
                )
                return replace(st, alarm_latch=latched), SequencerCommands(
                    heaters_enable=heaters_on
                )
            return (
                replace(st, state=SeqState.FEEDING, s_progress=0.0, cut_issued=False),
                SequencerCommands(feed_valve=True, heaters_enable=True),
            )
        return st, SequencerCommands(heaters_enable=heaters_on)

    if st.state is SeqState.FEEDING:
        if inputs.auto_switch_front:
            return replace(st, state=SeqState.HEATING), SequencerCommands(heaters_enable=True)
        return st, SequencerCommands(feed_valve=True, heaters_enable=True)

    if st.state is SeqState.HEATING:
        if window.temps_ok(inputs.temp_main_1, inputs.temp_main_2):
            return replace(st, state=SeqState.APPROACHING), SequencerCommands(
                heaters_enable=True, acf_enable=True
            )
        return st, SequencerCommands(heaters_enable=True)

    if st.state is SeqState.APPROACHING:
        if (
            inputs.acf_contact
            and inputs.acf_force >= window.min_force
            and window.temps_ok(inputs.temp_main_1, inputs.temp_main_2)
        ):
            return replace(st, state=SeqState.TAPING), SequencerCommands(
                heaters_enable=True, acf_enable=True, advance_enable=True
            )
        return st, SequencerCommands(heaters_enable=True, acf_enable=True)

    if st.state in ADVANCING_STATES:
        # consolidation preconditions hold in every advancing state
        problems = []
        if not window.temps_ok(inputs.temp_main_1, inputs.temp_main_2):
            problems.append("process_window:temperature out of window while advancing")
        if not inputs.acf_contact:
            problems.append("contact_lost:ACF contact lost while advancing")
        if problems:
            return (
                replace(st, state=SeqState.FAULT, alarm_latch=st.alarm_latch + tuple(problems)),
                SequencerCommands(heaters_enable=True),
            )

        track = job.tracks[st.current_track]
        s = min(st.s_progress + window.feed_speed * dt, track.length)
        st = replace(st, s_progress=s)

        if st.state is SeqState.TAPING:
            if track.length - s <= cutter_to_nip_distance:
                # mark the tape now: the detached tail ends exactly at the
                # track end once it has passed the nip point
                return replace(st, state=SeqState.CUTTING, cut_issued=True), SequencerCommands(
                    heaters_enable=True,
                    acf_enable=True,
                    advance_enable=True,
                    blade_valve=True,
                    issue_cut=True,
                )
            return st, SequencerCommands(
                heaters_enable=True, acf_enable=True, advance_enable=True
            )

        if st.state is SeqState.CUTTING:
            # blade extends, then spring-returns; cycle complete at retracted
            if not st.blade_extended_seen:
                if inputs.blade_phase is BladePhase.EXTENDED:
                    st = replace(st, blade_extended_seen=True)
                    blade_valve = False  # release for spring return
                else:
                    blade_valve = True
            else:
                blade_valve = False
                if inputs.blade_phase is BladePhase.RETRACTED:
                    return (
                        replace(st, state=SeqState.FINISHING_TAIL, blade_extended_seen=False),
                        SequencerCommands(
                            heaters_enable=True, acf_enable=True, advance_enable=True
                        ),
                    )
            return st, SequencerCommands(
                heaters_enable=True,
                acf_enable=True,
                advance_enable=True,
                blade_valve=blade_valve,
            )

        # FINISHING_TAIL
        if s >= track.length - 1e-12:
            return replace(st, state=SeqState.RETRACTING), SequencerCommands(
                heaters_enable=True
            )
        return st, SequencerCommands(heaters_enable=True, acf_enable=True, advance_enable=True)

    if st.state is SeqState.RETRACTING:
        if not inputs.acf_contact and inputs.acf_stroke <= 1e-9:
            return replace(st, state=SeqState.INDEXING), SequencerCommands(heaters_enable=True)
        return st, SequencerCommands(heaters_enable=True)

    if st.state is SeqState.INDEXING:
        nxt = st.current_track + 1
        if nxt < len(job.tracks):
            return (
                replace(
                    st,
                    state=SeqState.FEEDING,
                    current_track=nxt,
                    s_progress=0.0,
                    cut_issued=False,
                ),
                SequencerCommands(feed_valve=True, heaters_enable=True),
            )
        return (
            replace(st, state=SeqState.IDLE, job_done=True),
            SequencerCommands(heaters_enable=True),
        )

    raise AssertionError(f"unhandled sequencer state {st.state}")
