/**
 * Lookup table loaded from a JSON Lines dataset file.
 *
 * Each line is an object carrying at least {"input", "gold"}; any other
 * fields (id, task_kind, metadata) are ignored, so harness dataset files
 * can be served directly.
 */

import { readFileSync } from "node:fs";

export const DEFAULT_FALLBACK = "UNKNOWN";

export interface AnswerTable {
  entries: Map<string, string>;
  fallback: string;
}

export function parseTable(text: string, fallback: string = DEFAULT_FALLBACK): AnswerTable {
  const entries = new Map<string, string>();
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    let row: unknown;
    try {
      row = JSON.parse(line);
    } catch (err) {
      throw new Error(`line ${i + 1}: not valid JSON (${String(err)})`);
    }
    if (typeof row !== "object" || row === null) {
      throw new Error(`line ${i + 1}: expected an object`);
    }
    const { input, gold } = row as Record<string, unknown>;
    if (typeof input !== "string" || typeof gold !== "string") {
      throw new Error(`line ${i + 1}: rows need string "input" and "gold" fields`);
    }
    entries.set(input, gold);
  }
  if (entries.size === 0) {
    throw new Error("table file has no rows");
  }
  return { entries, fallback };
}

export function loadTable(path: string, fallback: string = DEFAULT_FALLBACK): AnswerTable {
  return parseTable(readFileSync(path, "utf-8"), fallback);
}

export function answerFor(table: AnswerTable, query: string): string {
  return table.entries.get(query) ?? table.fallback;
}
