/** DOM bootstrap: wires the teleop client, sliders, and canvases together. */

import { TeleopClient } from "./client.js";
import { CONTROLLER_TYPES, type ControllerType } from "./protocol.js";
import { drawForceBars, drawProfiles, drawSkeleton } from "./render.js";
import { buildFrame, ProfileTraces, RenderLoop } from "./viewmodel.js";

const GRASP_PRESETS: Record<string, Record<string, number>> = {
  open: {},
  point: { MFJ2: 1.4, MFJ3: 1.4, RFJ2: 1.4, RFJ3: 1.4, LFJ2: 1.4, LFJ3: 1.4, THJ2: 0.5 },
  pinch: { FFJ2: 0.8, FFJ3: 0.9, THJ1: 0.6, THJ2: 0.4, THJ4: 1.0 },
  fist: {
    FFJ1: 1.2, FFJ2: 1.4, FFJ3: 1.4,
    MFJ1: 1.2, MFJ2: 1.4, MFJ3: 1.4,
    RFJ1: 1.2, RFJ2: 1.4, RFJ3: 1.4,
    LFJ1: 1.2, LFJ2: 1.4, LFJ3: 1.4,
    THJ1: 0.9, THJ2: 0.5, THJ4: 1.1,
  },
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function canvasCtx(id: string): [CanvasRenderingContext2D, HTMLCanvasElement] {
  const canvas = el<HTMLCanvasElement>(id);
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error(`no 2d context for #${id}`);
  return [ctx, canvas];
}

function main(): void {
  const defaultUrl = `ws://${location.hostname || "localhost"}:8765/teleop`;
  const urlInput = el<HTMLInputElement>("server-url");
  urlInput.value = defaultUrl;

  const statusEl = el<HTMLSpanElement>("status");
  const slidersEl = el<HTMLDivElement>("sliders");
  const footerEl = el<HTMLSpanElement>("footer");
  const controllerSel = el<HTMLSelectElement>("controller");
  for (const type of CONTROLLER_TYPES) {
    const opt = document.createElement("option");
    opt.value = type;
    opt.textContent = type;
    controllerSel.appendChild(opt);
  }

  let client = makeClient(urlInput.value);
  const traces = new ProfileTraces();
  const sliderInputs: HTMLInputElement[] = [];

  function makeClient(url: string): TeleopClient {
    return new TeleopClient(url, {
      onStatus: () => {
        statusEl.textContent = client.panel.status;
        statusEl.className = `pill ${client.panel.status}`;
      },
      onHello: () => {
        rebuildSliders();
        controllerSel.value = client.panel.controller;
        traces.clear();
      },
      onState: () => {
        const latest = client.panel.latest;
        if (latest !== null) {
          traces.observe(latest);
          syncSliderReadouts();
        }
      },
      onServerError: (reason) => {
        footerEl.textContent = `server: ${reason}`;
      },
    });
  }

  function rebuildSliders(): void {
    const hello = client.panel.hello;
    if (hello === null) return;
    slidersEl.textContent = "";
    sliderInputs.length = 0;
    hello.joints.forEach((name, i) => {
      const row = document.createElement("div");
      row.className = "slider-row";
      const label = document.createElement("label");
      label.textContent = name;
      const input = document.createElement("input");
      input.type = "range";
      input.min = String(hello.limitLo[i]);
      input.max = String(hello.limitHi[i]);
      input.step = "0.001";
      input.value = String(client.panel.sliders[i]);
      const readout = document.createElement("span");
      readout.className = "readout";
      readout.textContent = Number(input.value).toFixed(3);
      input.addEventListener("input", () => {
        client.moveSlider(i, Number(input.value));
        readout.textContent = Number(client.panel.sliders[i]).toFixed(3);
      });
      row.append(label, input, readout);
      slidersEl.appendChild(row);
      sliderInputs.push(input);
    });
  }

  function syncSliderReadouts(): void {
    // Keep untouched sliders following the panel (first-state initialization).
    sliderInputs.forEach((input, i) => {
      const value = client.panel.sliders[i];
      if (value !== undefined && document.activeElement !== input) {
        input.value = String(value);
      }
    });
  }

  function applyPreset(name: string): void {
    const hello = client.panel.hello;
    const preset = GRASP_PRESETS[name];
    if (hello === null || preset === undefined) return;
    hello.joints.forEach((joint, i) => {
      client.moveSlider(i, preset[joint] ?? 0);
    });
    syncSliderReadouts();
    sliderInputs.forEach((input, i) => {
      input.value = String(client.panel.sliders[i]);
    });
  }

  el<HTMLButtonElement>("connect").addEventListener("click", () => {
    client.close();
    client = makeClient(urlInput.value);
    client.connect();
  });
  controllerSel.addEventListener("change", () => {
    client.selectController(controllerSel.value as ControllerType);
  });
  el<HTMLButtonElement>("reset").addEventListener("click", () => client.requestReset());
  for (const name of Object.keys(GRASP_PRESETS)) {
    el<HTMLButtonElement>(`preset-${name}`).addEventListener("click", () => applyPreset(name));
  }
  el<HTMLButtonElement>("export").addEventListener("click", () => {
    let csv: string;
    try {
      csv = client.exportCsv();
    } catch (exc) {
      footerEl.textContent = String(exc instanceof Error ? exc.message : exc);
      return;
    }
    const blob = new Blob([csv], { type: "text/csv" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "teleop_trajectory.csv";
    a.click();
    URL.revokeObjectURL(a.href);
  });

  const [skeletonCtx, skeletonCanvas] = canvasCtx("skeleton");
  const [barsCtx, barsCanvas] = canvasCtx("force-bars");
  const [profileCtx, profileCanvas] = canvasCtx("profiles");

  const loop = new RenderLoop(
    client.panel,
    traces,
    () => {
      // Rebuild from the live client each frame; `client` is swappable.
      const frame = buildFrame(client.panel, traces);
      drawSkeleton(skeletonCtx, frame, skeletonCanvas.width, skeletonCanvas.height);
      drawForceBars(barsCtx, frame, barsCanvas.width, barsCanvas.height);
      drawProfiles(profileCtx, frame, profileCanvas.width, profileCanvas.height);
      footerEl.textContent =
        `t=${frame.t.toFixed(2)}s  sent=${client.commandsSent}  ` +
        `dropped=${client.panel.dropped}  max force=${frame.maxContactForce.toFixed(2)}N`;
    },
    (cb) => requestAnimationFrame(cb),
  );
  loop.start();
  client.connect();
}

main();
