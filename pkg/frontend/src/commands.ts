// Command catalogue and submission. Every command the console can issue is
// declared here with its fields and unit labels; client-side bounds mirror
// the server's validation but the server stays authoritative — refusals come
// back as { ok: false } and are displayed verbatim.

import type { CommandBody, CommandReply, CommandType } from "./types.js";

export interface FieldSpec {
  name: string;
  label: string;
  unit: string;
  min?: number;
  /** strictly greater than min (e.g. force > 0) */
  exclusiveMin?: boolean;
  step?: number;
  defaultValue?: number;
  options?: string[]; // enumerated string field instead of a number
}

export interface CommandSpec {
  type: CommandType;
  label: string;
  fields: FieldSpec[];
  confirm?: boolean; // ask before sending (process-level actions)
}

export const COMMANDS: CommandSpec[] = [
  { type: "start", label: "Start job", fields: [], confirm: true },
  { type: "stop", label: "Stop", fields: [], confirm: true },
  { type: "ack_fault", label: "Acknowledge fault", fields: [] },
  {
    type: "set_setpoint",
    label: "Temperature setpoint",
    fields: [{ name: "value", label: "Setpoint", unit: "°C", min: 0, defaultValue: 200 }],
  },
  {
    type: "set_force",
    label: "Force target",
    fields: [
      {
        name: "value",
        label: "Target force",
        unit: "N",
        min: 0,
        exclusiveMin: true,
        defaultValue: 30,
      },
    ],
  },
  {
    type: "set_gains",
    label: "PID gains",
    fields: [
      {
        name: "zone",
        label: "Zone",
        unit: "",
        options: ["main_zone_1", "main_zone_2", "preheat"],
      },
      { name: "kp", label: "kp", unit: "W/K", min: 0, defaultValue: 6.25 },
      { name: "ki", label: "ki", unit: "W/(K·s)", min: 0, defaultValue: 0.4 },
      { name: "kd", label: "kd", unit: "W·s/K", min: 0, defaultValue: 0 },
    ],
  },
  { type: "manual_feed", label: "Manual feed cycle", fields: [] },
  { type: "manual_cut", label: "Manual cut cycle", fields: [], confirm: true },
  {
    type: "jog",
    label: "Jog mold",
    fields: [
      { name: "dx", label: "Δx", unit: "m", step: 0.001, defaultValue: 0 },
      { name: "dy", label: "Δy", unit: "m", step: 0.001, defaultValue: 0 },
      { name: "dz", label: "Δz", unit: "m", step: 0.001, defaultValue: 0 },
    ],
  },
];

export function specFor(type: CommandType): CommandSpec {
  const spec = COMMANDS.find((c) => c.type === type);
  if (!spec) throw new Error(`unknown command type ${type}`);
  return spec;
}

/** Mirror of the server-side checks; returns a message or null when valid. */
export function validate(body: CommandBody): string | null {
  let spec: CommandSpec;
  try {
    spec = specFor(body.type);
  } catch (e) {
    return (e as Error).message;
  }
  const args = body.args ?? {};
  for (const field of spec.fields) {
    const raw = args[field.name];
    if (raw === undefined) {
      return `${field.label} is required`;
    }
    if (field.options) {
      if (!field.options.includes(String(raw))) {
        return `${field.label} must be one of ${field.options.join(", ")}`;
      }
      continue;
    }
    const value = Number(raw);
    if (!Number.isFinite(value)) {
      return `${field.label} must be a number`;
    }
    if (field.min !== undefined) {
      if (field.exclusiveMin ? value <= field.min : value < field.min) {
        const op = field.exclusiveMin ? ">" : ">=";
        return `${field.label} must be ${op} ${field.min} ${field.unit}`.trim();
      }
    }
  }
  return null;
}

export type FetchLike = (
  url: string,
  init: { method: string; headers: Record<string, string>; body: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

/**
 * POST the command; client validation runs first, server refusals are
 * returned as-is. Network failures reject so the caller can offer a retry.
 */
export async function submitCommand(
  apiBase: string,
  body: CommandBody,
  fetchFn: FetchLike = fetch,
): Promise<CommandReply> {
  const clientError = validate(body);
  if (clientError) {
    return { ok: false, message: clientError };
  }
  const resp = await fetchFn(`${apiBase}/command`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  return (await resp.json()) as CommandReply;
}
