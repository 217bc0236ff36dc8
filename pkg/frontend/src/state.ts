/** View state and its pure transitions. */

import { clampBeta } from "./api.js";

export const MAX_PINS = 4;

export type CompareMode =
  | { kind: "single" }
  | { kind: "side-by-side"; betaLeft: number; betaRight: number }
  | { kind: "wipe"; betaLeft: number; betaRight: number; divider: number };

export interface ViewState {
  selectedId: string | null;
  beta: number;
  mode: CompareMode;
  pinnedBetas: number[];
}

export function initialState(): ViewState {
  return { selectedId: null, beta: 0, mode: { kind: "single" }, pinnedBetas: [] };
}

export function selectItem(state: ViewState, id: string): ViewState {
  return { ...state, selectedId: id };
}

export function setBeta(state: ViewState, beta: number): ViewState {
  return { ...state, beta: clampBeta(beta) };
}

export function setMode(state: ViewState, mode: CompareMode): ViewState {
  if (mode.kind !== "single") {
    mode = {
      ...mode,
      betaLeft: clampBeta(mode.betaLeft),
      betaRight: clampBeta(mode.betaRight),
    };
  }
  return { ...state, mode };
}

/** Add a pinned weight; duplicates and a fifth pin are rejected unchanged. */
export function pinBeta(state: ViewState, beta: number): ViewState {
  const b = clampBeta(beta);
  if (state.pinnedBetas.some((p) => Math.abs(p - b) < 1e-9)) return state;
  if (state.pinnedBetas.length >= MAX_PINS) return state;
  return { ...state, pinnedBetas: [...state.pinnedBetas, b] };
}

export function unpinBeta(state: ViewState, beta: number): ViewState {
  return {
    ...state,
    pinnedBetas: state.pinnedBetas.filter((p) => Math.abs(p - beta) >= 1e-9),
  };
}

/** Every realism weight the current view needs to fetch. */
export function betasInView(state: ViewState): number[] {
  if (state.mode.kind === "single") return [state.beta];
  return [state.mode.betaLeft, state.mode.betaRight];
}
