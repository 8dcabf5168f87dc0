// @vitest-environment jsdom
//
// Scripted browser test against the real service (mock backend): five
// vote-evolve iterations driven through the DOM, history strip showing six
// generations, reload reconstruction from GETs alone, and a model export
// that the CLI `sample` command accepts.

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/ui.js";

const PORT = 18000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(__dirname, "..", "..");

let service: ChildProcess;
let serviceLog = "";

function client(): ApiClient {
  return new ApiClient(BASE, (url, init) => fetch(url, init));
}

async function waitFor(predicate: () => boolean, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error(`timed out; service log:\n${serviceLog}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "promptga-ui-"));
  service = spawn(
    "python3",
    ["-m", "promptga.cli", "serve", "--data-dir", dataDir,
     "--port", String(PORT), "--host", "127.0.0.1"],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  service.stdout?.on("data", (chunk) => (serviceLog += chunk));
  service.stderr?.on("data", (chunk) => (serviceLog += chunk));

  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      await client().health();
      break;
    } catch {
      if (Date.now() > deadline) throw new Error(`service never came up:\n${serviceLog}`);
      await new Promise((r) => setTimeout(r, 200));
    }
  }
}, 40_000);

afterAll(() => {
  service?.kill();
});

describe("voting loop against the live service", () => {
  it("runs five vote-evolve iterations and exports a usable model", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = new App(root, client());

    // start a seeded mock session through the start panel
    (app.query<HTMLInputElement>("seed-input")).value = "20240811";
    app.query<HTMLButtonElement>("start-button").click();
    await waitFor(() => root.querySelector('[data-testid="session-panel"]') !== null);

    expect(root.querySelectorAll('[data-testid="card-grid"] .card')).toHaveLength(16);
    expect(app.query("generation-number").textContent).toBe("generation 0");
    // export is disabled until a tally is recorded
    expect(app.query<HTMLButtonElement>("export-button").disabled).toBe(true);

    for (let iteration = 0; iteration < 5; iteration++) {
      // vote on four cards through the steppers (twice on the first)
      app.query<HTMLButtonElement>(`vote-plus-${iteration % 16}`).click();
      app.query<HTMLButtonElement>(`vote-plus-${iteration % 16}`).click();
      for (const index of [4, 9, 13]) {
        app.query<HTMLButtonElement>(`vote-plus-${index}`).click();
      }
      expect(app.query("pending-total").textContent).toBe("5 votes pending");

      app.query<HTMLButtonElement>("evolve-button").click();
      const expected = `generation ${iteration + 1}`;
      await waitFor(() => app.query("generation-number").textContent === expected);
    }

    // history strip shows all six generations with their recorded votes
    const rows = root.querySelectorAll('[data-testid="history-strip"] .history-row');
    expect(rows).toHaveLength(6);
    for (let g = 0; g < 5; g++) {
      expect(app.query(`history-gen-${g}`).textContent).toContain("5 votes");
    }
    expect(app.query("history-gen-5").textContent).toContain("0 votes");

    // vote steppers were reset after each evolve
    expect(app.query("pending-total").textContent).toBe("0 votes pending");

    // telemetry panel shows learned weights and continuous means
    expect(app.query("telemetry-weights").querySelectorAll("li").length).toBeGreaterThan(0);
    expect(app.query("telemetry-continuous").textContent).toContain("brightness");

    // export now enabled; the document is accepted by the CLI sampler
    expect(app.query<HTMLButtonElement>("export-button").disabled).toBe(false);
    const doc = await app.exportModel();
    expect(doc.format).toBe("promptga-personalized-model");
    const modelPath = join(mkdtempSync(join(tmpdir(), "promptga-model-")), "model.json");
    writeFileSync(modelPath, JSON.stringify(doc));
    const result = spawnSync(
      "python3",
      ["-m", "promptga.cli", "sample", "--model", modelPath, "--count", "3", "--seed", "1"],
      { cwd: REPO_ROOT, encoding: "utf-8" },
    );
    expect(result.status, result.stderr).toBe(0);
    const lines = result.stdout.trim().split("\n");
    expect(lines).toHaveLength(3);
    for (const line of lines) expect(line.startsWith("kandinsky, ")).toBe(true);

    // seeded sampling through the UI is stable
    app.query<HTMLInputElement>("sample-seed").value = "9";
    const first = await app.samplePrompts(9);
    const second = await app.samplePrompts(9);
    expect(first).toEqual(second);
    expect(first).toHaveLength(8);
    expect(root.querySelectorAll('[data-testid="sample-list"] li')).toHaveLength(8);

    // placeholder previews render deterministically
    app.query<HTMLButtonElement>("preview-button").click();
    expect(root.querySelectorAll('[data-testid="preview-0"] i')).toHaveLength(9);

    // a reload rebuilds the identical view from GET endpoints alone
    const root2 = document.createElement("div");
    document.body.appendChild(root2);
    const app2 = new App(root2, client());
    await app2.loadExisting(app.state!.sessionId);
    expect(app2.query("generation-number").textContent).toBe("generation 5");
    expect(app2.query("history-strip").innerHTML).toBe(app.query("history-strip").innerHTML);
    expect(app2.query("card-grid").innerHTML).toBe(app.query("card-grid").innerHTML);
  }, 120_000);

  it("zero-vote evolve is legal", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = new App(root, client());
    await app.start("mock", 7);
    await app.voteAndEvolve();
    expect(app.state!.error).toBeNull();
    expect(app.query("generation-number").textContent).toBe("generation 1");
    expect(app.query("history-gen-0").textContent).toContain("0 votes");
  }, 60_000);

  it("surfaces service errors without crashing", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const unreachable = new ApiClient("http://127.0.0.1:1", (url, init) => fetch(url, init));
    const app = new App(root, unreachable);
    await app.start("mock");
    expect(root.querySelector('[data-testid="error-banner"]')).not.toBeNull();
    expect(root.querySelector('[data-testid="start-panel"]')).not.toBeNull();
  }, 60_000);

  it("disables the evolve button while busy", async () => {
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = new App(root, client());
    await app.start("mock", 8);
    app.state = { ...app.state!, busy: true };
    app.render();
    expect(app.query<HTMLButtonElement>("evolve-button").disabled).toBe(true);
    expect(root.querySelector('[data-testid="busy-indicator"]')).not.toBeNull();
  }, 60_000);
});
