/**
 * DOM layer: renders the session view and drives the vote-evolve loop.
 *
 * All evolution happens server-side; this class only posts tallies,
 * requests evolution, and re-renders from the returned payloads. Mutating
 * requests are serialized client-side through the `busy` flag, and a 409
 * from a concurrent evolve falls back to 1 s polling until the next
 * generation is visible.
 */

import { ApiClient, ApiError } from "./api.js";
import { pollUntil } from "./poller.js";
import {
  SessionViewState,
  appendGeneration,
  adjustVote,
  currentGeneration,
  freshSession,
  generationView,
  hasVotedGeneration,
  placeholderTiles,
  topWeightedValues,
  totalPendingVotes,
  updateGeneration,
} from "./state.js";

const SAMPLE_COUNT = 8;

export class App {
  state: SessionViewState | null = null;
  lastSample: string[] = [];
  showPreviews = false;

  constructor(
    private root: HTMLElement,
    private client: ApiClient,
  ) {
    this.renderStartPanel();
  }

  // -- actions ---------------------------------------------------------

  async start(backend: string, seed?: number): Promise<void> {
    const body: { backend: string; master_seed?: number } = { backend };
    if (seed !== undefined && Number.isFinite(seed)) body.master_seed = seed;
    try {
      const created = await this.client.createSession(body);
      this.state = freshSession(created.session_id, created.population);
      this.lastSample = [];
      this.showPreviews = false;
    } catch (err) {
      this.renderStartPanel(errorText(err));
      return;
    }
    this.render();
  }

  /** Rebuild the whole view from GET endpoints alone (reload path). */
  async loadExisting(sessionId: string): Promise<void> {
    const summary = await this.client.getSession(sessionId);
    let state: SessionViewState | null = null;
    for (const generation of summary.generations) {
      const payload = await this.client.getPopulation(sessionId, generation.generation_number);
      state = state === null
        ? freshSession(sessionId, payload)
        : appendGeneration(state, payload);
    }
    if (state === null) throw new Error("session has no generations");
    this.state = state;
    this.render();
  }

  async voteAndEvolve(): Promise<void> {
    if (!this.state || this.state.busy) return;
    const state = this.state;
    const sessionId = state.sessionId;
    const votedGeneration = currentGeneration(state).generationNumber;
    this.state = { ...state, busy: true, error: null };
    this.render();
    try {
      await this.client.postVotes(sessionId, state.pendingVotes);
      let next;
      try {
        next = await this.client.evolve(sessionId);
      } catch (err) {
        if (err instanceof ApiError && err.code === "evolve_in_progress") {
          next = await this.pollForGeneration(sessionId, votedGeneration + 1);
        } else {
          throw err;
        }
      }
      // re-read the voted generation so its recorded tally comes from the service
      const voted = await this.client.getPopulation(sessionId, votedGeneration);
      this.state = appendGeneration(
        updateGeneration({ ...this.state, busy: false }, voted),
        next,
      );
    } catch (err) {
      this.state = { ...this.state, busy: false, error: errorText(err) };
    }
    this.render();
  }

  private pollForGeneration(sessionId: string, generation: number, intervalMs = 1000) {
    return pollUntil(async () => {
      const summary = await this.client.getSession(sessionId);
      if (summary.generation_count > generation) {
        return this.client.getPopulation(sessionId, generation);
      }
      return null;
    }, intervalMs);
  }

  async exportModel(): Promise<Record<string, unknown>> {
    if (!this.state) throw new Error("no session");
    const doc = await this.client.getModel(this.state.sessionId);
    triggerDownload(`${this.state.sessionId}-model.json`, JSON.stringify(doc, null, 2));
    return doc;
  }

  async samplePrompts(seed?: number): Promise<string[]> {
    if (!this.state) throw new Error("no session");
    const response = await this.client.sampleModel(this.state.sessionId, SAMPLE_COUNT, seed);
    this.lastSample = response.prompts;
    this.showPreviews = false;
    this.render();
    return response.prompts;
  }

  generatePreviews(): void {
    this.showPreviews = true;
    this.render();
  }

  // -- rendering ----------------------------------------------------------

  private renderStartPanel(error?: string): void {
    this.root.innerHTML = `
      <section class="start-panel" data-testid="start-panel">
        <h1>promptga</h1>
        <p>Evolve prompts from your votes. Pick a backend and start a session.</p>
        <label>backend
          <select data-testid="backend-choice">
            <option value="mock">mock (offline placeholders)</option>
            <option value="txt2img">txt2img (remote artist model)</option>
          </select>
        </label>
        <label>seed (optional)
          <input type="number" data-testid="seed-input" placeholder="random" />
        </label>
        <button data-testid="start-button">Start session</button>
        ${error ? `<div class="error-banner" data-testid="error-banner">${escapeHtml(error)}</div>` : ""}
      </section>`;
    const button = this.query<HTMLButtonElement>("start-button");
    button.addEventListener("click", () => {
      const backend = this.query<HTMLSelectElement>("backend-choice").value;
      const raw = this.query<HTMLInputElement>("seed-input").value;
      const seed = raw === "" ? undefined : Number(raw);
      void this.start(backend, seed);
    });
  }

  render(): void {
    const state = this.state;
    if (!state) {
      this.renderStartPanel();
      return;
    }
    const generation = currentGeneration(state);
    const exportable = hasVotedGeneration(state);
    this.root.innerHTML = `
      <section class="session-panel" data-testid="session-panel">
        <header>
          <h1>promptga</h1>
          <span data-testid="session-id" class="session-id">${escapeHtml(state.sessionId)}</span>
          <span data-testid="generation-number" class="generation-number">generation ${generation.generationNumber}</span>
          ${state.busy ? `<span class="busy" data-testid="busy-indicator">evolving…</span>` : ""}
        </header>
        ${state.error ? `<div class="error-banner" data-testid="error-banner">${escapeHtml(state.error)}</div>` : ""}
        <div class="grid" data-testid="card-grid">${generation.cards.map((card) => this.cardHtml(card, state)).join("")}</div>
        <div class="actions">
          <span data-testid="pending-total">${totalPendingVotes(state)} votes pending</span>
          <button data-testid="evolve-button" ${state.busy ? "disabled" : ""}>Vote &amp; evolve</button>
        </div>
        <section class="history" data-testid="history-strip">
          ${state.generations.map((g) => this.historyRowHtml(g)).join("")}
        </section>
        <section class="telemetry" data-testid="telemetry">
          ${this.telemetryHtml(generation)}
        </section>
        <section class="export-panel">
          <button data-testid="export-button" ${exportable ? "" : 'disabled title="vote on at least one generation first"'}>Export model</button>
          <label>sample seed <input type="number" data-testid="sample-seed" /></label>
          <button data-testid="sample-button" ${exportable ? "" : 'disabled title="vote on at least one generation first"'}>Sample ${SAMPLE_COUNT} prompts</button>
          ${this.sampleHtml()}
        </section>
      </section>`;
    this.wireSessionEvents();
  }

  private cardHtml(card: { index: number; prompt: string; imageUrl: string | null; votes: number }, state: SessionViewState): string {
    const votes = state.pendingVotes[card.index] ?? 0;
    const image = card.imageUrl
      ? `<img src="${this.client.imageUrl(card.imageUrl)}" alt="individual ${card.index}" title="${escapeHtml(card.prompt)}" />`
      : `<div class="placeholder" title="${escapeHtml(card.prompt)}">no image</div>`;
    return `
      <figure class="card" data-testid="card-${card.index}">
        ${image}
        <figcaption title="${escapeHtml(card.prompt)}">${escapeHtml(shorten(card.prompt))}</figcaption>
        <div class="stepper">
          <button data-testid="vote-minus-${card.index}" data-vote-minus="${card.index}">−</button>
          <span data-testid="vote-count-${card.index}" class="vote-count">${votes}</span>
          <button data-testid="vote-plus-${card.index}" data-vote-plus="${card.index}">+</button>
        </div>
      </figure>`;
  }

  private historyRowHtml(g: { generationNumber: number; cards: { imageUrl: string | null; votes: number }[]; totalVotes: number }): string {
    const thumbs = g.cards
      .map((card) => {
        const badge = card.votes > 0 ? `<span class="vote-badge">${card.votes}</span>` : "";
        const img = card.imageUrl
          ? `<img src="${this.client.imageUrl(card.imageUrl)}" alt="" />`
          : `<span class="placeholder-thumb"></span>`;
        return `<span class="thumb">${img}${badge}</span>`;
      })
      .join("");
    return `
      <div class="history-row" data-testid="history-gen-${g.generationNumber}">
        <span class="history-label">gen ${g.generationNumber} · ${g.totalVotes} votes</span>
        <div class="history-thumbs">${thumbs}</div>
      </div>`;
  }

  private telemetryHtml(generation: { model: { weights: Record<string, Record<string, number>>; continuous: Record<string, { mean: number; variance: number }> } }): string {
    const top = topWeightedValues(generation.model);
    const weightRows = Object.entries(top)
      .map(([attribute, values]) => {
        const list = values.map((v) => `${escapeHtml(v.value)} (${v.weight})`).join(", ");
        return `<li><strong>${escapeHtml(attribute)}</strong>: ${list}</li>`;
      })
      .join("");
    const continuousRows = Object.entries(generation.model.continuous)
      .map(([attribute, d]) =>
        `<li><strong>${escapeHtml(attribute)}</strong>: mean ${d.mean.toFixed(3)}, var ${d.variance.toFixed(3)}</li>`)
      .join("");
    return `
      <h2>learned preferences</h2>
      <ul class="weights" data-testid="telemetry-weights">${weightRows}</ul>
      <ul class="continuous" data-testid="telemetry-continuous">${continuousRows}</ul>`;
  }

  private sampleHtml(): string {
    if (this.lastSample.length === 0) return "";
    const items = this.lastSample
      .map((prompt, i) => {
        const tiles = this.showPreviews
          ? `<span class="preview" data-testid="preview-${i}">${placeholderTiles(prompt)
              .map((c) => `<i style="background:${c}"></i>`)
              .join("")}</span>`
          : "";
        return `<li data-testid="sample-${i}">${escapeHtml(prompt)}${tiles}</li>`;
      })
      .join("");
    return `
      <ol class="samples" data-testid="sample-list">${items}</ol>
      <button data-testid="preview-button">Generate previews</button>
      <p class="hint">previews are deterministic placeholders derived from the prompt text</p>`;
  }

  private wireSessionEvents(): void {
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-vote-plus]")) {
      button.addEventListener("click", () => this.bumpVote(Number(button.dataset.votePlus), +1));
    }
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("[data-vote-minus]")) {
      button.addEventListener("click", () => this.bumpVote(Number(button.dataset.voteMinus), -1));
    }
    this.query<HTMLButtonElement>("evolve-button").addEventListener("click", () => {
      void this.voteAndEvolve();
    });
    const exportButton = this.query<HTMLButtonElement>("export-button");
    if (!exportButton.disabled) {
      exportButton.addEventListener("click", () => void this.exportModel());
    }
    const sampleButton = this.query<HTMLButtonElement>("sample-button");
    if (!sampleButton.disabled) {
      sampleButton.addEventListener("click", () => {
        const raw = this.query<HTMLInputElement>("sample-seed").value;
        void this.samplePrompts(raw === "" ? undefined : Number(raw));
      });
    }
    const previewButton = this.root.querySelector<HTMLButtonElement>('[data-testid="preview-button"]');
    previewButton?.addEventListener("click", () => this.generatePreviews());
  }

  private bumpVote(index: number, delta: number): void {
    if (!this.state || this.state.busy) return;
    this.state = adjustVote(this.state, index, delta);
    this.render();
  }

  query<T extends Element>(testId: string): T {
    const node = this.root.querySelector<T>(`[data-testid="${testId}"]`);
    if (!node) throw new Error(`missing element ${testId}`);
    return node;
  }
}

function shorten(prompt: string, max = 60): string {
  return prompt.length <= max ? prompt : prompt.slice(0, max - 1) + "…";
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return String(err);
}

function triggerDownload(filename: string, text: string): void {
  // jsdom implements createObjectURL but not navigation; skip the click there
  if (typeof URL.createObjectURL !== "function") return;
  if (typeof navigator !== "undefined" && navigator.userAgent.includes("jsdom")) return;
  const blob = new Blob([text], { type: "application/json" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}

// re-export for main.ts convenience
export { generationView };
