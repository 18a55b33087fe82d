/**
 * Wire protocol for the /teleop WebSocket endpoint.
 *
 * JSON text messages, schema version 1. The server greets each session
 * with a hello message (joint names, limits, rest pose, control period),
 * then streams state messages; the panel sends command messages back.
 */

export const SCHEMA_VERSION = 1;

export type ControllerType = "adaptive" | "fixed" | "position";

export const CONTROLLER_TYPES: ControllerType[] = ["adaptive", "fixed", "position"];

export class ProtocolError extends Error {}

export interface HelloMessage {
  joints: string[];
  limitLo: number[];
  limitHi: number[];
  rest: number[];
  ctrlDt: number;
  controller: ControllerType;
}

export interface ContactInfo {
  fingertip: string;
  object: string;
  point: number[];
  force: number;
}

export interface StateMessage {
  t: number;
  q: number[];
  qD: number[];
  fingertips: Record<string, number[]>;
  contacts: ContactInfo[];
  ks: number[];
  kd: number[];
  v: number[];
  aggregates: { maxContactForce: number; meanContactForce: number; ticks: number };
}

export interface CommandMessage {
  qD: number[];
  controller?: ControllerType;
  reset?: boolean;
}

export type ServerMessage =
  | { kind: "hello"; hello: HelloMessage }
  | { kind: "state"; state: StateMessage }
  | { kind: "error"; error: string };

function asObject(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ProtocolError(`${what} must be an object`);
  }
  return value as Record<string, unknown>;
}

function finiteNumber(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new ProtocolError(`${what} must be a finite number`);
  }
  return value;
}

function numberArray(value: unknown, what: string): number[] {
  if (!Array.isArray(value)) {
    throw new ProtocolError(`${what} must be an array`);
  }
  return value.map((x, i) => finiteNumber(x, `${what}[${i}]`));
}

function stringArray(value: unknown, what: string): string[] {
  if (!Array.isArray(value) || !value.every((x) => typeof x === "string")) {
    throw new ProtocolError(`${what} must be an array of strings`);
  }
  return value as string[];
}

function checkSchema(payload: Record<string, unknown>): void {
  if (payload["schema"] !== SCHEMA_VERSION) {
    throw new ProtocolError(`unknown schema version ${JSON.stringify(payload["schema"])}`);
  }
}

function decodeHello(payload: Record<string, unknown>): HelloMessage {
  const joints = stringArray(payload["joints"], "joints");
  const limitLo = numberArray(payload["limit_lo"], "limit_lo");
  const limitHi = numberArray(payload["limit_hi"], "limit_hi");
  const rest = numberArray(payload["rest"], "rest");
  const n = joints.length;
  if (n === 0 || limitLo.length !== n || limitHi.length !== n || rest.length !== n) {
    throw new ProtocolError("hello arrays must share the joint count");
  }
  const ctrlDt = finiteNumber(payload["ctrl_dt"], "ctrl_dt");
  if (ctrlDt <= 0) {
    throw new ProtocolError(`ctrl_dt must be positive, got ${ctrlDt}`);
  }
  const controller = payload["controller"];
  if (!CONTROLLER_TYPES.includes(controller as ControllerType)) {
    throw new ProtocolError(`unknown controller type ${JSON.stringify(controller)}`);
  }
  return { joints, limitLo, limitHi, rest, ctrlDt, controller: controller as ControllerType };
}

function decodeContacts(value: unknown): ContactInfo[] {
  if (!Array.isArray(value)) {
    throw new ProtocolError("contacts must be an array");
  }
  return value.map((raw, i) => {
    const c = asObject(raw, `contacts[${i}]`);
    return {
      fingertip: String(c["fingertip"]),
      object: String(c["object"]),
      point: numberArray(c["point"], `contacts[${i}].point`),
      force: finiteNumber(c["force"], `contacts[${i}].force`),
    };
  });
}

function decodeState(payload: Record<string, unknown>): StateMessage {
  const profiles = asObject(payload["profiles"], "profiles");
  const aggregates = asObject(payload["aggregates"], "aggregates");
  const rawTips = asObject(payload["fingertips"], "fingertips");
  const fingertips: Record<string, number[]> = {};
  for (const [name, pos] of Object.entries(rawTips)) {
    fingertips[name] = numberArray(pos, `fingertips.${name}`);
  }
  return {
    t: finiteNumber(payload["t"], "t"),
    q: numberArray(payload["q"], "q"),
    qD: numberArray(payload["q_d"], "q_d"),
    fingertips,
    contacts: decodeContacts(payload["contacts"]),
    ks: numberArray(profiles["ks"], "profiles.ks"),
    kd: numberArray(profiles["kd"], "profiles.kd"),
    v: numberArray(profiles["v"], "profiles.v"),
    aggregates: {
      maxContactForce: finiteNumber(aggregates["max_contact_force"], "max_contact_force"),
      meanContactForce: finiteNumber(aggregates["mean_contact_force"], "mean_contact_force"),
      ticks: finiteNumber(aggregates["ticks"], "ticks"),
    },
  };
}

/** Parse one inbound server message, throwing ProtocolError on anything malformed. */
export function decodeServerMessage(text: string): ServerMessage {
  let payload: Record<string, unknown>;
  try {
    payload = asObject(JSON.parse(text), "message");
  } catch (exc) {
    if (exc instanceof ProtocolError) throw exc;
    throw new ProtocolError(`not valid JSON: ${String(exc)}`);
  }
  checkSchema(payload);
  switch (payload["type"]) {
    case "hello":
      return { kind: "hello", hello: decodeHello(payload) };
    case "state":
      return { kind: "state", state: decodeState(payload) };
    case "error":
      return { kind: "error", error: String(payload["error"]) };
    default:
      throw new ProtocolError(`unknown message type ${JSON.stringify(payload["type"])}`);
  }
}

/** Serialize a command exactly as the server's decoder expects it. */
export function encodeCommand(msg: CommandMessage): string {
  for (const x of msg.qD) {
    if (!Number.isFinite(x)) {
      throw new ProtocolError(`command q_d must be finite, got ${x}`);
    }
  }
  const payload: Record<string, unknown> = {
    type: "command",
    schema: SCHEMA_VERSION,
    q_d: msg.qD,
  };
  if (msg.controller !== undefined) payload["controller"] = msg.controller;
  if (msg.reset) payload["reset"] = true;
  return JSON.stringify(payload);
}

export function clampScalar(value: number, lo: number, hi: number): number {
  return Math.min(Math.max(value, lo), hi);
}

export function clampToLimits(values: number[], lo: number[], hi: number[]): number[] {
  return values.map((v, i) => clampScalar(v, lo[i]!, hi[i]!));
}
