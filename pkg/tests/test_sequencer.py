"""Process state machine: cycle order, fault latching, and interlocks."""

import numpy as np
import pytest

from atl_twin.geometry import Pose
from atl_twin.planner import Plane, TapeTrack, TrackOffSurface, WidthOutOfRange
from atl_twin.plants import BladePhase
from atl_twin.sequencer import (
    ADVANCING_STATES,
    Job,
    ProcessWindow,
    SeqState,
    SequencerInputs,
    SequencerState,
    job_plan,
    sequencer_step,
)

CUTTER_TO_NIP = 0.15
DT = 0.01

WINDOW = ProcessWindow(
    temp_setpoint=200.0, temp_tolerance=10.0, min_force=25.0, feed_speed=0.1
)


@pytest.fixture()
def job():
    plane = Plane(Pose.identity(), extent_x=1.2, extent_y=0.4)
    tracks = [
        TapeTrack(plane, np.array([[-0.5, y], [0.5, y]]), 0.05, index=i)
        for i, y in enumerate((0.0, 0.055))
    ]
    return job_plan(tracks, WINDOW, feed_waste_per_track=0.3)


def good_inputs(**kw):
    defaults = dict(
        temp_main_1=200.0,
        temp_main_2=200.0,
        acf_contact=True,
        acf_force=30.0,
        spool_remaining=10.0,
    )
    defaults.update(kw)
    return SequencerInputs(**defaults)


def run_until(st, job, predicate, inputs_fn, limit=100_000):
    """Step with inputs from inputs_fn(state) until predicate(state)."""
    for _ in range(limit):
        st, cmds = sequencer_step(st, inputs_fn(st), job, CUTTER_TO_NIP, DT)
        if predicate(st):
            return st, cmds
    raise AssertionError("predicate never satisfied")


class TestJobPlan:
    def test_width_gate(self):
        plane = Plane(Pose.identity(), extent_x=1.2, extent_y=0.4)
        with pytest.raises(WidthOutOfRange):
            TapeTrack(plane, np.array([[-0.5, 0.0], [0.5, 0.0]]), 0.060)

    def test_off_surface_rejected(self):
        plane = Plane(Pose.identity(), extent_x=1.2, extent_y=0.4)
        track = TapeTrack(plane, np.array([[-0.5, 0.0], [0.5, 0.5]]), 0.05)
        with pytest.raises(TrackOffSurface):
            job_plan([track], WINDOW)

    def test_mixed_surfaces_rejected(self):
        p1 = Plane(Pose.identity(), extent_x=1.2, extent_y=0.4)
        p2 = Plane(Pose.identity(), extent_x=1.2, extent_y=0.4)
        t1 = TapeTrack(p1, np.array([[-0.5, 0.0], [0.5, 0.0]]), 0.05)
        t2 = TapeTrack(p2, np.array([[-0.5, 0.0], [0.5, 0.0]]), 0.05)
        with pytest.raises(ValueError):
            job_plan([t1, t2], WINDOW)

    def test_requirement_accounts_for_feed_waste(self, job):
        assert job.total_requirement == pytest.approx(2.0 + 2 * 0.3)
        assert job.requirement_from(1) == pytest.approx(1.0 + 0.3)


class TestCycle:
    def test_start_begins_feeding(self, job):
        st, cmds = sequencer_step(
            SequencerState(), good_inputs(start=True), job, CUTTER_TO_NIP, DT
        )
        assert st.state is SeqState.FEEDING
        assert cmds.feed_valve and cmds.heaters_enable

    def test_spool_short_precheck_blocks_start(self, job):
        st, cmds = sequencer_step(
            SequencerState(),
            good_inputs(start=True, spool_remaining=1.0),  # needs 2.6 m
            job,
            CUTTER_TO_NIP,
            DT,
        )
        assert st.state is SeqState.IDLE
        assert any(a.startswith("spool_short") for a in st.alarm_latch)

    def test_heating_waits_for_window(self, job):
        st = SequencerState(state=SeqState.HEATING)
        st, cmds = sequencer_step(
            st, good_inputs(temp_main_1=150.0), job, CUTTER_TO_NIP, DT
        )
        assert st.state is SeqState.HEATING
        st, cmds = sequencer_step(st, good_inputs(), job, CUTTER_TO_NIP, DT)
        assert st.state is SeqState.APPROACHING
        assert cmds.acf_enable

    def test_taping_requires_contact_and_force(self, job):
        st = SequencerState(state=SeqState.APPROACHING)
        st, _ = sequencer_step(
            st, good_inputs(acf_contact=True, acf_force=10.0), job, CUTTER_TO_NIP, DT
        )
        assert st.state is SeqState.APPROACHING
        st, cmds = sequencer_step(st, good_inputs(), job, CUTTER_TO_NIP, DT)
        assert st.state is SeqState.TAPING
        assert cmds.advance_enable

    def test_cut_triggered_at_cutter_distance_before_end(self, job):
        # track length 1.0 m, cutter 0.15 m ahead: the cut must come at
        # s = 0.85 m within one control tick of feed
        st = SequencerState(state=SeqState.TAPING)
        st, cmds = run_until(
            st, job, lambda s: s.state is SeqState.CUTTING, lambda s: good_inputs()
        )
        assert st.cut_issued and cmds.issue_cut and cmds.blade_valve
        assert 0.85 <= st.s_progress <= 0.85 + WINDOW.feed_speed * DT + 1e-12

    def test_blade_cycle_then_finishing_tail(self, job):
        st = SequencerState(state=SeqState.CUTTING, s_progress=0.86, cut_issued=True)

        def inputs(s):
            phase = BladePhase.EXTENDED if not s.blade_extended_seen else BladePhase.RETRACTED
            return good_inputs(blade_phase=phase)

        st, cmds = run_until(st, job, lambda s: s.state is SeqState.FINISHING_TAIL, inputs)
        assert cmds.advance_enable and not cmds.blade_valve

    def test_full_job_completes(self, job):
        st = SequencerState()
        seen = []

        def inputs(s):
            if s.state is SeqState.IDLE and not s.job_done:
                return good_inputs(start=True)
            if s.state is SeqState.FEEDING:
                return good_inputs(auto_switch_front=True)
            if s.state is SeqState.CUTTING:
                phase = (
                    BladePhase.EXTENDED if not s.blade_extended_seen else BladePhase.RETRACTED
                )
                return good_inputs(blade_phase=phase)
            if s.state is SeqState.RETRACTING:
                return good_inputs(acf_contact=False, acf_force=0.0, acf_stroke=0.0)
            return good_inputs()

        for _ in range(100_000):
            prev = st.state
            st, cmds = sequencer_step(st, inputs(st), job, CUTTER_TO_NIP, DT)
            if st.state is not prev:
                seen.append(st.state)
            if st.job_done:
                break
        assert st.job_done and st.state is SeqState.IDLE
        assert seen.count(SeqState.TAPING) == len(job.tracks)
        assert SeqState.FAULT not in seen
        # cycle order within each track
        order = [s for s in seen if s is not SeqState.IDLE]
        per_track = [
            SeqState.FEEDING,
            SeqState.HEATING,
            SeqState.APPROACHING,
            SeqState.TAPING,
            SeqState.CUTTING,
            SeqState.FINISHING_TAIL,
            SeqState.RETRACTING,
            SeqState.INDEXING,
        ]
        assert order == per_track * len(job.tracks)


class TestFaults:
    def test_alarm_faults_and_latches(self, job):
        st = SequencerState(state=SeqState.TAPING, s_progress=0.3)
        st, cmds = sequencer_step(
            st, good_inputs(alarms=("acf_error:1",)), job, CUTTER_TO_NIP, DT
        )
        assert st.state is SeqState.FAULT
        assert "acf_error:1" in st.alarm_latch
        assert not cmds.advance_enable and not cmds.acf_enable
        # stays latched without acknowledge
        st, _ = sequencer_step(st, good_inputs(), job, CUTTER_TO_NIP, DT)
        assert st.state is SeqState.FAULT
        st, _ = sequencer_step(st, good_inputs(ack_fault=True), job, CUTTER_TO_NIP, DT)
        assert st.state is SeqState.IDLE
        assert st.alarm_latch == ()

    def test_temperature_drop_while_advancing_faults(self, job):
        st = SequencerState(state=SeqState.TAPING, s_progress=0.3)
        st, _ = sequencer_step(
            st, good_inputs(temp_main_2=150.0), job, CUTTER_TO_NIP, DT
        )
        assert st.state is SeqState.FAULT
        assert any(a.startswith("process_window") for a in st.alarm_latch)

    def test_contact_loss_while_advancing_faults(self, job):
        st = SequencerState(state=SeqState.FINISHING_TAIL, s_progress=0.9)
        st, _ = sequencer_step(
            st, good_inputs(acf_contact=False), job, CUTTER_TO_NIP, DT
        )
        assert st.state is SeqState.FAULT
        assert any(a.startswith("contact_lost") for a in st.alarm_latch)

    def test_stop_halts_to_idle(self, job):
        st = SequencerState(state=SeqState.TAPING, s_progress=0.4)
        st, cmds = sequencer_step(st, good_inputs(stop=True), job, CUTTER_TO_NIP, DT)
        assert st.state is SeqState.IDLE and st.stop_requested
        assert not cmds.advance_enable and not cmds.acf_enable


class TestAdvanceInterlock:
    def test_advance_only_in_advancing_states(self, job):
        # walk every state against a grid of input conditions: advance_enable
        # must imply an advancing state, and vice versa require the
        # consolidation conditions
        input_grid = []
        for temps_ok in (True, False):
            for contact in (True, False):
                for force in (0.0, 30.0):
                    for start in (True, False):
                        for stop in (True, False):
                            input_grid.append(
                                good_inputs(
                                    start=start,
                                    stop=stop,
                                    temp_main_1=200.0 if temps_ok else 100.0,
                                    acf_contact=contact,
                                    acf_force=force,
                                )
                            )
        for state in SeqState:
            for inputs in input_grid:
                st = SequencerState(state=state, s_progress=0.3)
                nxt, cmds = sequencer_step(st, inputs, job, CUTTER_TO_NIP, DT)
                if cmds.advance_enable:
                    assert nxt.state in ADVANCING_STATES
                    assert inputs.acf_contact
                    assert abs(inputs.temp_main_1 - 200.0) <= 10.0
                if cmds.feed_valve:
                    assert not cmds.blade_valve  # valve interlock at the source
