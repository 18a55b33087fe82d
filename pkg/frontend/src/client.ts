/**
 * Teleoperation session: one socket, a rate-limited command pipeline,
 * and automatic reconnection.
 *
 * Slider moves mark the panel dirty; a send fires immediately when the
 * last send is at least one control period old, otherwise one timer
 * coalesces every move in the window into a single command. Commands
 * therefore never exceed the advertised control rate, and a burst of
 * slider events yields exactly one message per period.
 */

import { Panel } from "./panel.js";
import {
  decodeServerMessage,
  encodeCommand,
  ProtocolError,
  type CommandMessage,
  type ControllerType,
} from "./protocol.js";

/** The subset of the WebSocket surface the client touches. */
export interface SocketLike {
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

/** Seconds-based clock with cancellable timers, injectable for tests. */
export interface Clock {
  now(): number;
  after(seconds: number, fn: () => void): () => void;
}

export function realClock(): Clock {
  return {
    now: () => performance.now() / 1000,
    after: (seconds, fn) => {
      const id = setTimeout(fn, seconds * 1000);
      return () => clearTimeout(id);
    },
  };
}

export interface ClientOptions {
  factory?: SocketFactory;
  clock?: Clock;
  retryDelay?: number;
  onHello?: () => void;
  onState?: () => void;
  onStatus?: () => void;
  onServerError?: (reason: string) => void;
}

export class TeleopClient {
  readonly panel = new Panel();
  /** Total commands put on the wire, for rate assertions and the UI footer. */
  commandsSent = 0;
  lastProtocolError: string | null = null;

  private socket: SocketLike | null = null;
  private readonly factory: SocketFactory;
  private readonly clock: Clock;
  private readonly retryDelay: number;
  private readonly hooks: ClientOptions;

  private closed = false;
  private cancelRetry: (() => void) | null = null;
  private cancelSend: (() => void) | null = null;
  private dirty = false;
  private lastSendAt = -Infinity;
  private pendingController: ControllerType | null = null;
  private pendingReset = false;

  constructor(
    readonly url: string,
    options: ClientOptions = {},
  ) {
    this.factory = options.factory ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.clock = options.clock ?? realClock();
    this.retryDelay = options.retryDelay ?? 1.0;
    this.hooks = options;
  }

  connect(): void {
    this.closed = false;
    this.cancelRetry?.();
    this.cancelRetry = null;
    this.panel.status = "connecting";
    this.hooks.onStatus?.();
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.handleDisconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.panel.status = "connected";
      this.hooks.onStatus?.();
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onclose = () => this.handleDisconnect();
    socket.onerror = () => this.handleDisconnect();
  }

  close(): void {
    this.closed = true;
    this.cancelRetry?.();
    this.cancelRetry = null;
    this.cancelSend?.();
    this.cancelSend = null;
    this.dirty = false;
    const socket = this.socket;
    this.socket = null;
    socket?.close();
    this.panel.status = "disconnected";
    this.hooks.onStatus?.();
  }

  get connected(): boolean {
    return this.panel.status === "connected" && this.socket !== null;
  }

  // ---- user input --------------------------------------------------------

  moveSlider(index: number, value: number): void {
    this.panel.setSlider(index, value);
    this.queueCommand();
  }

  selectController(type: ControllerType): void {
    if (type === this.panel.controller) return;
    this.panel.controller = type;
    this.pendingController = type;
    this.queueCommand();
  }

  requestReset(): void {
    this.pendingReset = true;
    this.queueCommand();
  }

  exportCsv(): string {
    return this.panel.exportCsv();
  }

  // ---- command pipeline ----------------------------------------------------

  private queueCommand(): void {
    if (!this.connected || this.panel.hello === null) {
      return; // never send while disconnected; moves only update the panel
    }
    this.dirty = true;
    if (this.cancelSend !== null) return;
    const wait = this.lastSendAt + this.panel.hello.ctrlDt - this.clock.now();
    if (wait <= 0) {
      this.fireCommand();
    } else {
      this.cancelSend = this.clock.after(wait, () => {
        this.cancelSend = null;
        this.fireCommand();
      });
    }
  }

  private fireCommand(): void {
    if (!this.dirty || !this.connected || this.socket === null) return;
    this.dirty = false;
    const msg: CommandMessage = { qD: this.panel.commandTarget() };
    if (this.pendingController !== null) {
      msg.controller = this.pendingController;
      this.pendingController = null;
    }
    if (this.pendingReset) {
      msg.reset = true;
      this.pendingReset = false;
    }
    this.lastSendAt = this.clock.now();
    this.socket.send(encodeCommand(msg));
    this.commandsSent += 1;
    if (msg.reset) {
      this.panel.noteReset();
    }
    this.panel.recordSent(msg.qD);
  }

  // ---- socket events -------------------------------------------------------

  private handleMessage(text: string): void {
    let decoded;
    try {
      decoded = decodeServerMessage(text);
    } catch (exc) {
      if (exc instanceof ProtocolError) {
        this.lastProtocolError = exc.message;
        return;
      }
      throw exc;
    }
    switch (decoded.kind) {
      case "hello":
        this.panel.onHello(decoded.hello);
        this.hooks.onHello?.();
        break;
      case "state":
        if (this.panel.onState(decoded.state)) {
          this.hooks.onState?.();
        }
        break;
      case "error":
        this.lastProtocolError = decoded.error;
        this.hooks.onServerError?.(decoded.error);
        break;
    }
  }

  private handleDisconnect(): void {
    if (this.socket === null && this.panel.status === "disconnected") return;
    this.socket = null;
    this.cancelSend?.();
    this.cancelSend = null;
    this.dirty = false;
    this.pendingController = null;
    this.pendingReset = false;
    this.panel.status = "disconnected";
    this.hooks.onStatus?.();
    if (!this.closed && this.cancelRetry === null) {
      this.cancelRetry = this.clock.after(this.retryDelay, () => {
        this.cancelRetry = null;
        if (!this.closed) this.connect();
      });
    }
  }
}
