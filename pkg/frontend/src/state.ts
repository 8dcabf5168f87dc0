/**
 * Pure projections of service payloads into view state.
 *
 * Nothing here touches the DOM or the network, and no evolution logic
 * lives client-side: a view is a deterministic function of the payloads,
 * so a page reload rebuilds the identical state from GET responses alone.
 */

import type { ModelTelemetry, PopulationPayload } from "./api.js";

export const VOTE_CAP = 9;

export interface CardView {
  index: number;
  prompt: string;
  imageUrl: string | null;
  votes: number;
}

export interface GenerationView {
  generationNumber: number;
  cards: CardView[];
  /** recorded tally, present once the generation has been voted */
  recordedVotes: number[] | null;
  totalVotes: number;
  model: ModelTelemetry;
}

export interface TopValue {
  value: string;
  weight: number;
}

export interface SessionViewState {
  sessionId: string;
  generations: GenerationView[];
  /** editable tally for the current (last) generation */
  pendingVotes: number[];
  busy: boolean;
  error: string | null;
}

export function generationView(payload: PopulationPayload): GenerationView {
  const votes = payload.votes;
  return {
    generationNumber: payload.generation_number,
    cards: payload.individuals.map((ind) => ({
      index: ind.index,
      prompt: ind.prompt,
      imageUrl: ind.image_url,
      votes: votes ? votes[ind.index] : 0,
    })),
    recordedVotes: votes ? [...votes] : null,
    totalVotes: votes ? votes.reduce((a, b) => a + b, 0) : 0,
    model: payload.model,
  };
}

export function freshSession(sessionId: string, first: PopulationPayload): SessionViewState {
  const generation = generationView(first);
  return {
    sessionId,
    generations: [generation],
    pendingVotes: new Array(generation.cards.length).fill(0),
    busy: false,
    error: null,
  };
}

export function appendGeneration(state: SessionViewState, payload: PopulationPayload): SessionViewState {
  const generation = generationView(payload);
  return {
    ...state,
    generations: [...state.generations, generation],
    pendingVotes: new Array(generation.cards.length).fill(0),
    error: null,
  };
}

/** Replace an already-known generation (e.g. its tally arrived). */
export function updateGeneration(state: SessionViewState, payload: PopulationPayload): SessionViewState {
  const generation = generationView(payload);
  const generations = state.generations.map((g) =>
    g.generationNumber === generation.generationNumber ? generation : g,
  );
  return { ...state, generations };
}

export function currentGeneration(state: SessionViewState): GenerationView {
  return state.generations[state.generations.length - 1];
}

export function adjustVote(state: SessionViewState, index: number, delta: number): SessionViewState {
  const pendingVotes = [...state.pendingVotes];
  const next = Math.max(0, Math.min(VOTE_CAP, (pendingVotes[index] ?? 0) + delta));
  pendingVotes[index] = next;
  return { ...state, pendingVotes };
}

export function totalPendingVotes(state: SessionViewState): number {
  return state.pendingVotes.reduce((a, b) => a + b, 0);
}

/** True once any generation carries a recorded tally (export becomes legal). */
export function hasVotedGeneration(state: SessionViewState): boolean {
  return state.generations.some((g) => g.recordedVotes !== null);
}

/** Highest-weighted values per attribute, for the telemetry panel. */
export function topWeightedValues(model: ModelTelemetry, perAttribute = 3): Record<string, TopValue[]> {
  const out: Record<string, TopValue[]> = {};
  for (const [attribute, table] of Object.entries(model.weights)) {
    out[attribute] = Object.entries(table)
      .map(([value, weight]) => ({ value, weight }))
      .sort((a, b) => b.weight - a.weight || a.value.localeCompare(b.value))
      .slice(0, perAttribute);
  }
  return out;
}

/**
 * Deterministic decorative tile colors for sampled prompts (FNV-1a over
 * the prompt text). Placeholder only: real previews are the session grid.
 */
export function placeholderTiles(prompt: string, tiles = 9): string[] {
  let hash = 0x811c9dc5;
  const colors: string[] = [];
  for (let t = 0; t < tiles; t++) {
    const text = `${prompt}#${t}`;
    for (let i = 0; i < text.length; i++) {
      hash ^= text.charCodeAt(i);
      hash = Math.imul(hash, 0x01000193) >>> 0;
    }
    const r = (hash >>> 16) & 0xff;
    const g = (hash >>> 8) & 0xff;
    const b = hash & 0xff;
    colors.push(`rgb(${r}, ${g}, ${b})`);
  }
  return colors;
}
