/**
 * Editor state for the infilling demo.
 *
 * The document is a list of segments: plain text interleaved with blank
 * markers. Serializing a state produces the service's marker syntax; parsing
 * that syntax back yields an equal state. Pending (unaccepted) fills live on
 * the blank segments but never appear in the serialized form, so the
 * roundtrip invariant is stated over states without pending fills.
 */

export const GRANULARITIES = [
  "word",
  "ngram",
  "sentence",
  "paragraph",
  "document",
] as const;

export type Granularity = (typeof GRANULARITIES)[number];

export interface TextSegment {
  kind: "text";
  text: string;
}

export interface BlankSegment {
  kind: "blank";
  granularity: Granularity;
  /** Fill proposed by the service, shown inline until accepted or replaced. */
  pendingFill: string | null;
}

export type Segment = TextSegment | BlankSegment;

export interface DecodeSettings {
  method: "greedy" | "temperature" | "top_k" | "nucleus";
  temperature: number;
  top_k: number;
  top_p: number;
  max_new_tokens: number;
}

export interface EditorState {
  segments: Segment[];
  decode: DecodeSettings;
  lastSeed: number;
}

export const DEFAULT_DECODE: DecodeSettings = {
  method: "nucleus",
  temperature: 1.0,
  top_k: 40,
  top_p: 0.95,
  max_new_tokens: 64,
};

export function createState(
  text: string,
  decode: DecodeSettings = DEFAULT_DECODE,
  seed = 0,
): EditorState {
  const segments: Segment[] = text === "" ? [] : [{ kind: "text", text }];
  return { segments, decode, lastSeed: seed };
}

/** Merge adjacent text segments and drop empty ones. */
export function normalize(segments: readonly Segment[]): Segment[] {
  const out: Segment[] = [];
  for (const seg of segments) {
    if (seg.kind === "text") {
      if (seg.text === "") continue;
      const last = out[out.length - 1];
      if (last && last.kind === "text") {
        out[out.length - 1] = { kind: "text", text: last.text + seg.text };
        continue;
      }
    }
    out.push({ ...seg });
  }
  return out;
}

export function blankCount(state: EditorState): number {
  return state.segments.filter((s) => s.kind === "blank").length;
}

/**
 * Insert a blank at a character offset into the rendered text. Splits the
 * text segment containing the offset; inserting into a blank is rejected.
 */
export function insertBlank(
  state: EditorState,
  position: number,
  granularity: Granularity,
): EditorState {
  if (position < 0) throw new RangeError(`negative position ${position}`);
  const blank: BlankSegment = { kind: "blank", granularity, pendingFill: null };
  const segments: Segment[] = [];
  let remaining = position;
  let placed = false;
  for (const seg of state.segments) {
    if (placed) {
      segments.push(seg);
      continue;
    }
    const len = seg.kind === "text" ? seg.text.length : 0;
    if (remaining <= len) {
      if (seg.kind === "text") {
        segments.push({ kind: "text", text: seg.text.slice(0, remaining) });
        segments.push(blank);
        segments.push({ kind: "text", text: seg.text.slice(remaining) });
      } else {
        if (remaining !== 0) {
          throw new RangeError("position falls inside a blank marker");
        }
        segments.push(blank, seg);
      }
      placed = true;
    } else {
      segments.push(seg);
      remaining -= len;
    }
  }
  if (!placed) {
    if (remaining > 0) throw new RangeError(`position ${position} past end of text`);
    segments.push(blank);
  }
  return { ...state, segments: normalize(segments) };
}

const MARKER = /\[blank:(word|ngram|sentence|paragraph|document)\]/g;

/** Serialize to the service marker syntax. Pending fills are omitted. */
export function serialize(state: EditorState): string {
  return state.segments
    .map((seg) =>
      seg.kind === "text" ? seg.text : `[blank:${seg.granularity}]`,
    )
    .join("");
}

/** Inverse of serialize. Unknown "[blank" fragments are a syntax error. */
export function parse(
  text: string,
  decode: DecodeSettings = DEFAULT_DECODE,
  seed = 0,
): EditorState {
  const segments: Segment[] = [];
  let cursor = 0;
  MARKER.lastIndex = 0;
  for (const match of text.matchAll(MARKER)) {
    const index = match.index ?? 0;
    if (index > cursor) {
      segments.push({ kind: "text", text: text.slice(cursor, index) });
    }
    segments.push({
      kind: "blank",
      granularity: match[1] as Granularity,
      pendingFill: null,
    });
    cursor = index + match[0].length;
  }
  if (cursor < text.length) {
    segments.push({ kind: "text", text: text.slice(cursor) });
  }
  for (const seg of segments) {
    if (seg.kind === "text" && seg.text.includes("[blank")) {
      throw new SyntaxError(`malformed blank marker near "${seg.text}"`);
    }
  }
  return { segments: normalize(segments), decode, lastSeed: seed };
}

function nthBlankIndex(segments: readonly Segment[], i: number): number {
  let seen = 0;
  for (let s = 0; s < segments.length; s += 1) {
    if (segments[s]!.kind === "blank") {
      if (seen === i) return s;
      seen += 1;
    }
  }
  throw new RangeError(`no blank with index ${i}`);
}

/** Attach service-proposed fills to the blanks, in order. */
export function applyFills(
  state: EditorState,
  fills: readonly { index: number; text: string }[],
): EditorState {
  const segments = state.segments.map((s) => ({ ...s }));
  for (const fill of fills) {
    const at = nthBlankIndex(segments, fill.index);
    (segments[at] as BlankSegment).pendingFill = fill.text;
  }
  return { ...state, segments };
}

/**
 * Accept the i-th blank's pending fill: the blank becomes plain text. A
 * document-granularity blank replaces the whole editor content.
 */
export function acceptFill(state: EditorState, i: number): EditorState {
  const at = nthBlankIndex(state.segments, i);
  const blank = state.segments[at] as BlankSegment;
  if (blank.pendingFill === null) {
    throw new Error(`blank ${i} has no pending fill to accept`);
  }
  const accepted: TextSegment = { kind: "text", text: blank.pendingFill };
  const segments =
    blank.granularity === "document"
      ? [accepted]
      : state.segments.map((seg, s) => (s === at ? accepted : { ...seg }));
  return { ...state, segments: normalize(segments) };
}

/** Drop the i-th blank's pending fill so a fresh request can replace it. */
export function clearFill(state: EditorState, i: number): EditorState {
  const at = nthBlankIndex(state.segments, i);
  const segments = state.segments.map((seg, s) =>
    s === at ? { ...(seg as BlankSegment), pendingFill: null } : { ...seg },
  );
  return { ...state, segments };
}
