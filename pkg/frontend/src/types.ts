// Wire types for the runtime's HTTP/WS API. These mirror the JSON the server
// emits; the HMI renders exactly what arrives and keeps no process state of
// its own.

/** One per-tick sample as streamed by the runtime. */
export interface TraceRecord {
  t: number;
  state: string;
  track: number;
  s_progress: number;
  feed_valve: number;
  blade_valve: number;
  heater_enable_1: number;
  heater_enable_2: number;
  heater_enable_3: number;
  auto_switch_rear: number;
  auto_switch_front: number;
  zone_temp_1: number;
  zone_temp_2: number;
  zone_temp_3: number;
  heater_power_1: number;
  heater_power_2: number;
  heater_power_3: number;
  temp_setpoint: number;
  force_target: number;
  acf_force: number;
  acf_stroke: number;
  acf_contact: number;
  acf_error: number;
  spool_remaining: number;
  fed_length: number;
  tail_remaining: number;
  mold_x: number;
  mold_y: number;
  mold_z: number;
  mold_qw: number;
  mold_qx: number;
  mold_qy: number;
  mold_qz: number;
  q1: number;
  q2: number;
  q3: number;
  q4: number;
  q5: number;
  q6: number;
}

/** GET /state body and WS /stream message. */
export interface StateSnapshot {
  t: number;
  state: string;
  alarms: string[];
  done: boolean;
  record: TraceRecord | null;
}

export type CommandType =
  | "start"
  | "stop"
  | "ack_fault"
  | "set_setpoint"
  | "set_force"
  | "set_gains"
  | "manual_feed"
  | "manual_cut"
  | "jog";

export interface CommandBody {
  type: CommandType;
  args?: Record<string, number | string>;
}

export interface CommandReply {
  ok: boolean;
  message: string;
}
