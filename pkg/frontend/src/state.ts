/** Filter state: conjunctive predicates over the embedded rows.
 *
 * Filtering is presentation-only; rows are never mutated, every transition
 * returns a fresh state, and clearing all filters restores the full set.
 */

import type { Cell, FieldInfo } from "./types";

export type Predicate =
  | { kind: "equals"; value: Cell }
  | { kind: "in-set"; values: Cell[] }
  | { kind: "range"; min: number | null; max: number | null };

export interface Filter {
  field: string;
  predicate: Predicate;
}

export interface ViewerState {
  filters: Filter[];
  origin: "table" | "chart" | null;
}

export function initialState(): ViewerState {
  return { filters: [], origin: null };
}

export function addFilter(state: ViewerState, filter: Filter, origin: "table" | "chart" = "table"): ViewerState {
  return { filters: [...state.filters, filter], origin };
}

export function removeFilter(state: ViewerState, index: number): ViewerState {
  return { filters: state.filters.filter((_, i) => i !== index), origin: state.origin };
}

export function clearFilters(_state: ViewerState): ViewerState {
  return initialState();
}

function asNumber(value: Cell): number | null {
  if (typeof value === "number") return value;
  if (typeof value === "string") {
    const n = Number(value);
    return Number.isNaN(n) ? null : n;
  }
  if (typeof value === "boolean") return value ? 1 : 0;
  return null;
}

export function matches(value: Cell, predicate: Predicate): boolean {
  switch (predicate.kind) {
    case "equals":
      return String(value) === String(predicate.value);
    case "in-set":
      return predicate.values.some((v) => String(v) === String(value));
    case "range": {
      const n = asNumber(value);
      if (n === null) return false;
      if (predicate.min !== null && n < predicate.min) return false;
      if (predicate.max !== null && n > predicate.max) return false;
      return true;
    }
  }
}

/** Conjunction of all active filters; unknown filter fields match nothing. */
export function applyFilters(fields: FieldInfo[], rows: Cell[][], state: ViewerState): Cell[][] {
  if (state.filters.length === 0) return rows;
  const indexOf = new Map(fields.map((f, i) => [f.name, i]));
  return rows.filter((row) =>
    state.filters.every((filter) => {
      const idx = indexOf.get(filter.field);
      if (idx === undefined) return false;
      const cell = row[idx];
      return matches(cell === undefined ? null : cell, filter.predicate);
    }),
  );
}

export function describeFilter(filter: Filter): string {
  const p = filter.predicate;
  switch (p.kind) {
    case "equals":
      return `${filter.field} = ${String(p.value)}`;
    case "in-set":
      return `${filter.field} in {${p.values.map(String).join(", ")}}`;
    case "range": {
      const lo = p.min === null ? "" : `${p.min} ≤ `;
      const hi = p.max === null ? "" : ` ≤ ${p.max}`;
      return `${lo}${filter.field}${hi}`;
    }
  }
}
