"""Run configuration: JSON schema, validation, and construction of domain objects.

Every validation failure names the offending field. The dt stability bound
for the thermal plants and the control/plant period ratio are checked here
so the runtime can assume a sane configuration.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from .geometry import Pose
from .kinematics import DEFAULT_DH, DEFAULT_JOINT_LIMITS, DhRow, KinematicParams
from .planner import Cylinder, NipFrame, Plane, TapeTrack
from .plants import AcfParams, PneumaticParams, ThermalParams
from .sequencer import Job, ProcessWindow, job_plan


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    """File missing or not valid JSON."""


class ValidationError(ConfigError):
    """Config contents violate a constraint; message names the field."""


class PoseModel(BaseModel):
    position: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def build(self) -> Pose:
        return Pose(np.array(self.position), np.array(self.orientation))


class SimModel(BaseModel):
    dt: float = Field(0.001, gt=0)
    control_period: float = Field(0.01, gt=0)
    seed: int = 0
    noise_std: float = Field(0.0, ge=0)
    real_time_factor: float = Field(0.0, ge=0)  # 0 = as fast as possible
    fault_timeout: float = Field(5.0, gt=0)

    @model_validator(mode="after")
    def _ratio(self):
        n = self.control_period / self.dt
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError("sim.control_period must be an integer multiple of sim.dt")
        return self


class ThermalZoneModel(BaseModel):
    capacity: float = Field(gt=0)  # J/K
    loss: float = Field(gt=0)  # W/K
    efficiency: float = Field(gt=0, le=1)
    ambient: float = 25.0
    power_max: float = Field(500.0, gt=0)
    sensor_distance: float = Field(0.0, ge=0)

    def build(self) -> ThermalParams:
        return ThermalParams(
            capacity=self.capacity,
            loss=self.loss,
            efficiency=self.efficiency,
            ambient=self.ambient,
            power_max=self.power_max,
            sensor_distance=self.sensor_distance,
        )


class ThermalModel(BaseModel):
    main_zone_1: ThermalZoneModel
    main_zone_2: ThermalZoneModel
    preheat: ThermalZoneModel
    preheat_margin: float = Field(20.0, gt=0)  # K below the process setpoint

    def zones(self) -> List[ThermalParams]:
        return [self.main_zone_1.build(), self.main_zone_2.build(), self.preheat.build()]


class PidGainsModel(BaseModel):
    kp: float = Field(ge=0)
    ki: float = Field(0.0, ge=0)
    kd: float = Field(0.0, ge=0)
    derivative_alpha: float = Field(0.9, ge=0, le=1)


class PidModel(BaseModel):
    # omitted zones fall back to rule-based defaults from the plant parameters
    main_zone_1: Optional[PidGainsModel] = None
    main_zone_2: Optional[PidGainsModel] = None
    preheat: Optional[PidGainsModel] = None


class AcfModel(BaseModel):
    stroke_max: float = Field(gt=0)  # mm
    contact_stiffness: float = Field(gt=0)  # N/mm
    approach_speed: float = Field(50.0, gt=0)  # mm/s
    target_force: float = Field(gt=0)  # N
    payload: float = Field(0.0, ge=0)  # kg
    contact_ramp: float = Field(gt=0)  # N/s
    contact_gap: float = Field(gt=0)  # mm, taping-position gap
    retract_clearance: float = Field(gt=0)  # mm added when retracted

    def build(self) -> AcfParams:
        return AcfParams(
            stroke_max=self.stroke_max,
            contact_stiffness=self.contact_stiffness,
            approach_speed=self.approach_speed,
        )


class PneumaticsModel(BaseModel):
    feed_travel_time: float = Field(gt=0)
    blade_travel_time: float = Field(gt=0)
    feed_stroke_length: float = Field(gt=0)

    def build(self) -> PneumaticParams:
        return PneumaticParams(
            feed_travel_time=self.feed_travel_time,
            blade_travel_time=self.blade_travel_time,
            feed_stroke_length=self.feed_stroke_length,
        )


class TapeModel(BaseModel):
    spool_length: float = Field(gt=0)  # m
    cutter_to_nip_distance: float = Field(gt=0)  # m


class KinematicsModel(BaseModel):
    dh: Optional[List[Tuple[float, float, float, float]]] = None  # a, alpha, d, theta_offset
    joint_limits: Optional[List[Tuple[float, float]]] = None
    base: PoseModel = PoseModel()
    flange_to_mold: PoseModel = PoseModel()
    home_joints: Tuple[float, float, float, float, float, float] = (0, 0, 0, 0, 0, 0)

    def build(self) -> KinematicParams:
        dh = DEFAULT_DH if self.dh is None else tuple(DhRow(*row) for row in self.dh)
        limits = (
            DEFAULT_JOINT_LIMITS
            if self.joint_limits is None
            else tuple((lo, hi) for lo, hi in self.joint_limits)
        )
        return KinematicParams(
            dh=dh,
            joint_limits=limits,
            base=self.base.build(),
            flange_to_mold=self.flange_to_mold.build(),
        )


class NipModel(BaseModel):
    position: Tuple[float, float, float]
    compaction_axis: Tuple[float, float, float]
    feed_direction: Tuple[float, float, float]

    def build(self) -> NipFrame:
        return NipFrame(
            np.array(self.position),
            np.array(self.compaction_axis),
            np.array(self.feed_direction),
        )


class PlaneModel(BaseModel):
    type: Literal["plane"]
    frame: PoseModel = PoseModel()
    extent_x: float = Field(gt=0)
    extent_y: float = Field(gt=0)

    def build(self) -> Plane:
        return Plane(self.frame.build(), self.extent_x, self.extent_y)


class CylinderModel(BaseModel):
    type: Literal["cylinder"]
    frame: PoseModel = PoseModel()
    radius: float = Field(gt=0)
    length: float = Field(gt=0)

    def build(self) -> Cylinder:
        return Cylinder(self.frame.build(), self.radius, self.length)


class TrackModel(BaseModel):
    points: List[Tuple[float, float]] = Field(min_length=2)
    width: float


class WindowModel(BaseModel):
    temp_setpoint: float
    temp_tolerance: float = Field(gt=0)
    min_force: float = Field(gt=0)
    feed_speed: float = Field(gt=0)

    def build(self) -> ProcessWindow:
        return ProcessWindow(
            temp_setpoint=self.temp_setpoint,
            temp_tolerance=self.temp_tolerance,
            min_force=self.min_force,
            feed_speed=self.feed_speed,
        )


class JobModel(BaseModel):
    tracks: List[TrackModel] = Field(min_length=0)
    window: WindowModel


class ModbusModel(BaseModel):
    host: str = "127.0.0.1"
    port: int = Field(1502, ge=0, le=65535)
    timeout: float = Field(0.008, gt=0)


class ApiModel(BaseModel):
    host: str = "127.0.0.1"
    port: int = Field(8000, ge=0, le=65535)


class RunConfigModel(BaseModel):
    sim: SimModel = SimModel()
    thermal: ThermalModel
    pid: PidModel = PidModel()
    acf: AcfModel
    pneumatics: PneumaticsModel
    tape: TapeModel
    kinematics: KinematicsModel = KinematicsModel()
    nip: NipModel
    surface: Union[PlaneModel, CylinderModel] = Field(discriminator="type")
    job: JobModel
    modbus: ModbusModel = ModbusModel()
    api: ApiModel = ApiModel()
    trace_path: str = "trace.csv"


class RunConfig:
    """Validated configuration with domain objects built from the raw model."""

    def __init__(self, model: RunConfigModel):
        self.model = model
        self.dt = model.sim.dt
        self.control_period = model.sim.control_period
        self.substeps = round(model.sim.control_period / model.sim.dt)
        self.seed = model.sim.seed
        self.noise_std = model.sim.noise_std
        self.real_time_factor = model.sim.real_time_factor
        self.fault_timeout = model.sim.fault_timeout

        self.zone_params = model.thermal.zones()  # [main1, main2, preheat]
        self.preheat_margin = model.thermal.preheat_margin
        self.acf_params = model.acf.build()
        self.pneumatic_params = model.pneumatics.build()
        self.kinematic_params = model.kinematics.build()
        self.home_joints = np.array(model.kinematics.home_joints, dtype=float)
        self.nip = model.nip.build()
        self.surface = model.surface.build()
        self.window = model.job.window.build()

        tracks = []
        for i, tm in enumerate(model.job.tracks):
            try:
                tracks.append(
                    TapeTrack(
                        surface=self.surface,
                        points=np.array(tm.points),
                        width=tm.width,
                        index=i,
                    )
                )
            except ValueError as e:
                raise ValidationError(f"job.tracks[{i}]: {e}") from e
        try:
            self.job: Job = job_plan(
                tracks, self.window, model.pneumatics.feed_stroke_length
            )
        except ValueError as e:
            raise ValidationError(f"job.tracks: {e}") from e

        # explicit Euler stability guard for every thermal zone
        for name, zp in zip(("main_zone_1", "main_zone_2", "preheat"), self.zone_params):
            bound = 0.1 * zp.time_constant()
            if self.dt >= bound:
                raise ValidationError(
                    f"thermal.{name}: sim.dt {self.dt} violates the stability bound "
                    f"dt < 0.1*capacity/loss = {bound:.4g}"
                )
        if model.modbus.timeout >= self.control_period:
            raise ValidationError(
                "modbus.timeout must be below sim.control_period so a lost device "
                "cannot stall the control tick"
            )


def load_config(path) -> RunConfig:
    """Load and validate a JSON run configuration."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ParseError(f"cannot read {p}: {e}") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{p} is not valid JSON: {e}") from e
    try:
        model = RunConfigModel.model_validate(raw)
    except PydanticValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(x) for x in first["loc"])
        raise ValidationError(f"{loc}: {first['msg']}") from e
    return RunConfig(model)
