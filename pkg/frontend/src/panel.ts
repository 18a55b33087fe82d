/**
 * Panel state: everything the UI knows, independent of DOM and socket.
 *
 * Holds the connection status, the latest state snapshot (a depth-one
 * cell: rendering always reads the newest message, never a backlog),
 * slider values clamped to the advertised joint limits, and a recording
 * buffer of sent commands exportable as a trajectory CSV.
 */

import {
  clampScalar,
  clampToLimits,
  type ControllerType,
  type HelloMessage,
  type StateMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface SentCommand {
  t: number;
  qD: number[];
}

export class Panel {
  status: ConnectionStatus = "disconnected";
  hello: HelloMessage | null = null;
  latest: StateMessage | null = null;
  sliders: number[] = [];
  controller: ControllerType = "adaptive";
  recording: SentCommand[] = [];
  /** Count of state messages dropped for stale or out-of-order timestamps. */
  dropped = 0;

  private slidersTouched = false;
  private slidersInitialized = false;

  get nJoints(): number {
    return this.hello ? this.hello.joints.length : 0;
  }

  /** First message of a session: fixes slider ranges and provisional values. */
  onHello(hello: HelloMessage): void {
    const previous = this.sliders;
    const keepValues = this.slidersTouched && previous.length === hello.joints.length;
    this.hello = hello;
    this.controller = hello.controller;
    this.latest = null;
    this.sliders = clampToLimits(keepValues ? previous : hello.rest, hello.limitLo, hello.limitHi);
    this.slidersInitialized = keepValues;
  }

  /**
   * Accept a state snapshot. Returns false (and counts a drop) when the
   * timestamp does not advance past the latest accepted one.
   */
  onState(state: StateMessage): boolean {
    if (this.latest !== null && state.t <= this.latest.t) {
      this.dropped += 1;
      return false;
    }
    this.latest = state;
    if (!this.slidersInitialized && this.hello !== null) {
      if (!this.slidersTouched && state.qD.length === this.nJoints) {
        this.sliders = clampToLimits(state.qD, this.hello.limitLo, this.hello.limitHi);
      }
      this.slidersInitialized = true;
    }
    return true;
  }

  setSlider(index: number, value: number): void {
    if (this.hello === null || index < 0 || index >= this.nJoints) {
      throw new RangeError(`no slider ${index}`);
    }
    this.slidersTouched = true;
    this.sliders[index] = clampScalar(value, this.hello.limitLo[index]!, this.hello.limitHi[index]!);
  }

  /** Target vector for the next command, clamped to the advertised limits. */
  commandTarget(): number[] {
    if (this.hello === null) {
      throw new Error("no session");
    }
    return clampToLimits(this.sliders, this.hello.limitLo, this.hello.limitHi);
  }

  /**
   * Append a sent command to the recording buffer, stamped with the
   * latest simulation time. Equal timestamps overwrite the previous
   * entry (latest wins) so the buffer stays strictly increasing in t.
   */
  recordSent(qD: number[]): void {
    const t = this.latest ? this.latest.t : 0;
    const last = this.recording[this.recording.length - 1];
    if (last !== undefined && t <= last.t) {
      this.recording[this.recording.length - 1] = { t: last.t, qD: qD.slice() };
      return;
    }
    this.recording.push({ t, qD: qD.slice() });
  }

  /** Forget the session timeline after a reset command: sim time restarts. */
  noteReset(): void {
    this.latest = null;
    this.recording = [];
  }

  /** Render the recording buffer in the trajectory file format. */
  exportCsv(): string {
    if (this.recording.length === 0) {
      throw new Error("nothing recorded yet");
    }
    const n = this.recording[0]!.qD.length;
    const header = "t," + Array.from({ length: n }, (_, i) => `q_${i}`).join(",");
    const rows = this.recording.map((s) => `${s.t},${s.qD.join(",")}`);
    return header + "\n" + rows.join("\n") + "\n";
  }
}
