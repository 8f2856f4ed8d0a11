/** DOM wiring for the demo page. All document state lives in `state`. */

import { InfillClient, ApiError } from "./api.js";
import { requestFills, regenerateFill } from "./controller.js";
import {
  EditorState,
  GRANULARITIES,
  Granularity,
  acceptFill,
  blankCount,
  createState,
  insertBlank,
  parse,
} from "./state.js";

const client = new InfillClient("");
let state: EditorState = createState(
  "One morning, Mia found a red kite near the river.",
);
let busy = false;

const $ = (id: string) => document.getElementById(id)!;

function setBanner(message: string | null): void {
  const banner = $("banner");
  banner.textContent = message ?? "";
  banner.classList.toggle("hidden", message === null);
}

function render(): void {
  const editor = $("editor");
  editor.textContent = "";
  let blankIndex = 0;
  state.segments.forEach((seg) => {
    if (seg.kind === "text") {
      const span = document.createElement("span");
      span.textContent = seg.text;
      editor.appendChild(span);
      return;
    }
    const i = blankIndex;
    blankIndex += 1;
    const chip = document.createElement("span");
    chip.className = seg.pendingFill === null ? "blank" : "blank filled";
    chip.textContent = seg.pendingFill ?? `[${seg.granularity}]`;
    if (seg.pendingFill !== null) {
      const accept = document.createElement("button");
      accept.textContent = "accept";
      accept.onclick = () => {
        state = acceptFill(state, i);
        render();
      };
      const again = document.createElement("button");
      again.textContent = "regenerate";
      again.onclick = () => run(() => regenerateFill(client, state, i, state.lastSeed + 1));
      chip.append(" ", accept, again);
    }
    editor.appendChild(chip);
  });
  ($("fill-btn") as HTMLButtonElement).disabled = busy || blankCount(state) === 0;
}

async function run(op: () => Promise<{ state: EditorState; truncated: boolean }>) {
  busy = true;
  setBanner(null);
  render();
  try {
    const outcome = await op();
    state = outcome.state;
    setBanner(outcome.truncated ? "response truncated; try regenerating" : null);
  } catch (err) {
    if (err instanceof ApiError) {
      setBanner(`service error ${err.status}: ${err.message}`);
    } else if ((err as Error).name !== "AbortError") {
      setBanner(`request failed: ${(err as Error).message}`);
    }
  } finally {
    busy = false;
    render();
  }
}

function wire(): void {
  const picker = $("granularity") as HTMLSelectElement;
  GRANULARITIES.forEach((g) => {
    const opt = document.createElement("option");
    opt.value = g;
    opt.textContent = g;
    picker.appendChild(opt);
  });
  picker.value = "ngram";

  $("load-btn").onclick = () => {
    try {
      state = parse(($("source") as HTMLTextAreaElement).value, state.decode, state.lastSeed);
      setBanner(null);
    } catch (err) {
      setBanner((err as Error).message);
    }
    render();
  };

  $("blank-btn").onclick = () => {
    const selection = window.getSelection();
    const offset = selection?.focusOffset ?? 0;
    try {
      state = insertBlank(state, offset, picker.value as Granularity);
    } catch (err) {
      setBanner((err as Error).message);
    }
    render();
  };

  $("fill-btn").onclick = () =>
    run(() => requestFills(client, state, state.lastSeed + 1));

  render();
  client
    .health()
    .then(() => setBanner(null))
    .catch(() => setBanner("service unavailable; is the server running?"));
}

wire();
