import { describe, expect, it } from "vitest";

import {
  clampToLimits,
  decodeServerMessage,
  encodeCommand,
  ProtocolError,
  SCHEMA_VERSION,
} from "../src/protocol.js";
import { helloText, stateText } from "./mock.js";

describe("decodeServerMessage", () => {
  it("decodes a hello with wire field names mapped", () => {
    const msg = decodeServerMessage(helloText());
    expect(msg.kind).toBe("hello");
    if (msg.kind !== "hello") return;
    expect(msg.hello.joints).toEqual(["J0", "J1", "J2", "J3"]);
    expect(msg.hello.limitLo).toEqual([-1.0, -0.5, 0.0, -2.0]);
    expect(msg.hello.ctrlDt).toBe(0.02);
    expect(msg.hello.controller).toBe("adaptive");
  });

  it("decodes a state message with profiles and aggregates", () => {
    const msg = decodeServerMessage(stateText(0.34));
    expect(msg.kind).toBe("state");
    if (msg.kind !== "state") return;
    expect(msg.state.t).toBe(0.34);
    expect(msg.state.ks).toEqual([1, 1, 1, 1]);
    expect(msg.state.fingertips["ff"]).toEqual([0.18, -0.03, 0.0]);
    expect(msg.state.aggregates.maxContactForce).toBe(0);
  });

  it("decodes an error message", () => {
    const text = JSON.stringify({ type: "error", schema: SCHEMA_VERSION, error: "nope" });
    expect(decodeServerMessage(text)).toEqual({ kind: "error", error: "nope" });
  });

  it.each([
    ["garbage", "{not json"],
    ["non-object", "[1,2,3]"],
    ["missing schema", JSON.stringify({ type: "state" })],
    ["wrong schema", stateText(0.1).replace(`"schema":${SCHEMA_VERSION}`, '"schema":99')],
    ["unknown type", JSON.stringify({ type: "pong", schema: SCHEMA_VERSION })],
    ["non-numeric q", stateText(0.1).replace('"q":[0,0,0,0]', '"q":[0,"x",0,0]')],
    ["non-finite t", stateText(0.1).replace('"t":0.1', '"t":null')],
    ["bad controller", helloText({ controller: "pid" })],
    ["negative ctrl_dt", helloText({ ctrl_dt: -0.01 })],
    ["ragged hello arrays", helloText({ rest: [0, 0] })],
  ])("rejects %s", (_label, text) => {
    expect(() => decodeServerMessage(text)).toThrow(ProtocolError);
  });
});

describe("encodeCommand", () => {
  it("emits the exact wire shape the server decodes", () => {
    const text = encodeCommand({ qD: [0.1, -0.2] });
    expect(JSON.parse(text)).toEqual({ type: "command", schema: SCHEMA_VERSION, q_d: [0.1, -0.2] });
  });

  it("includes controller and reset only when set", () => {
    const text = encodeCommand({ qD: [0], controller: "fixed", reset: true });
    expect(JSON.parse(text)).toEqual({
      type: "command",
      schema: SCHEMA_VERSION,
      q_d: [0],
      controller: "fixed",
      reset: true,
    });
    expect(encodeCommand({ qD: [0], reset: false })).not.toContain("reset");
  });

  it("refuses non-finite targets", () => {
    expect(() => encodeCommand({ qD: [Number.NaN] })).toThrow(ProtocolError);
    expect(() => encodeCommand({ qD: [Infinity] })).toThrow(ProtocolError);
  });
});

describe("clampToLimits", () => {
  it("clamps each entry into its own interval", () => {
    expect(clampToLimits([5, -5, 0.3], [-1, -1, 0], [1, 1, 1])).toEqual([1, -1, 0.3]);
  });
});
