/**
 * The demo's interactive loop: request fills for the current blanks, accept
 * them one by one, or regenerate a single blank with a fresh seed. Every
 * operation returns a new state; failures reject without touching the input
 * state, so the caller can show an error banner and keep editing.
 */

import { InfillClient } from "./api.js";
import {
  EditorState,
  applyFills,
  blankCount,
  clearFill,
  serialize,
} from "./state.js";

export interface RequestOutcome {
  state: EditorState;
  truncated: boolean;
}

export async function requestFills(
  client: InfillClient,
  state: EditorState,
  seed: number = state.lastSeed,
): Promise<RequestOutcome> {
  if (blankCount(state) === 0) {
    throw new Error("insert at least one blank before requesting fills");
  }
  const response = await client.infill(serialize(state), state.decode, seed);
  const filled = applyFills(state, response.fills);
  return {
    state: { ...filled, lastSeed: seed },
    truncated: response.diagnostics.truncated,
  };
}

/**
 * Re-request the i-th blank with a new seed. Other blanks keep their pending
 * fills; only the regenerated blank's fill is replaced.
 */
export async function regenerateFill(
  client: InfillClient,
  state: EditorState,
  i: number,
  newSeed: number,
): Promise<RequestOutcome> {
  const cleared = clearFill(state, i);
  const response = await client.infill(serialize(cleared), cleared.decode, newSeed);
  const fill = response.fills.find((f) => f.index === i);
  const next = fill === undefined ? cleared : applyFills(cleared, [fill]);
  return {
    state: { ...next, lastSeed: newSeed },
    truncated: response.diagnostics.truncated,
  };
}
