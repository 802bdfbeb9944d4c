import { describe, expect, it } from "vitest";

import {
  addFilter,
  applyFilters,
  clearFilters,
  describeFilter,
  initialState,
  matches,
  removeFilter,
} from "../src/state";
import type { FieldInfo } from "../src/types";

const FIELDS: FieldInfo[] = [
  { name: "Conference", kind: "nominal" },
  { name: "Year", kind: "temporal" },
  { name: "Downloads", kind: "quantitative" },
];

const ROWS = [
  ["VIS", 2018, 10],
  ["VIS", 2020, 350],
  ["CHI", 2021, 40],
  ["VIS", 2022, 900],
  ["CHI", 2017, 5],
] as (string | number)[][];

describe("predicates", () => {
  it("equals compares by string identity", () => {
    expect(matches("VIS", { kind: "equals", value: "VIS" })).toBe(true);
    expect(matches(2020, { kind: "equals", value: "2020" })).toBe(true);
    expect(matches("CHI", { kind: "equals", value: "VIS" })).toBe(false);
  });

  it("in-set matches any member", () => {
    expect(matches("CHI", { kind: "in-set", values: ["VIS", "CHI"] })).toBe(true);
    expect(matches("TVCG", { kind: "in-set", values: ["VIS", "CHI"] })).toBe(false);
  });

  it("range is inclusive and null-safe", () => {
    expect(matches(2019, { kind: "range", min: 2019, max: null })).toBe(true);
    expect(matches(2018, { kind: "range", min: 2019, max: null })).toBe(false);
    expect(matches(5, { kind: "range", min: null, max: 5 })).toBe(true);
    expect(matches(null, { kind: "range", min: 0, max: 10 })).toBe(false);
  });
});

describe("filter composition", () => {
  it("filters compose conjunctively", () => {
    let state = initialState();
    state = addFilter(state, { field: "Conference", predicate: { kind: "equals", value: "VIS" } });
    state = addFilter(state, { field: "Year", predicate: { kind: "range", min: 2019, max: null } });
    const rows = applyFilters(FIELDS, ROWS, state);
    expect(rows).toEqual([
      ["VIS", 2020, 350],
      ["VIS", 2022, 900],
    ]);
  });

  it("clearing restores the full embedded row set", () => {
    let state = initialState();
    state = addFilter(state, { field: "Conference", predicate: { kind: "equals", value: "VIS" } });
    expect(applyFilters(FIELDS, ROWS, state).length).toBe(3);
    state = clearFilters(state);
    expect(applyFilters(FIELDS, ROWS, state)).toEqual(ROWS);
  });

  it("filters are removable individually", () => {
    let state = initialState();
    state = addFilter(state, { field: "Conference", predicate: { kind: "equals", value: "VIS" } });
    state = addFilter(state, { field: "Year", predicate: { kind: "range", min: 2019, max: null } });
    state = removeFilter(state, 0);
    const rows = applyFilters(FIELDS, ROWS, state);
    expect(rows.map((r) => r[0])).toEqual(["VIS", "CHI", "VIS"]);
  });

  it("empty result sets are fine", () => {
    let state = initialState();
    state = addFilter(state, { field: "Conference", predicate: { kind: "equals", value: "Nowhere" } });
    expect(applyFilters(FIELDS, ROWS, state)).toEqual([]);
  });

  it("filters on fields not encoded in the chart still work", () => {
    // Downloads is a plain column here; nothing ties filtering to encodings
    let state = initialState();
    state = addFilter(state, { field: "Downloads", predicate: { kind: "range", min: 100, max: null } });
    expect(applyFilters(FIELDS, ROWS, state).length).toBe(2);
  });

  it("unknown fields match nothing", () => {
    let state = initialState();
    state = addFilter(state, { field: "Ghost", predicate: { kind: "equals", value: "x" } });
    expect(applyFilters(FIELDS, ROWS, state)).toEqual([]);
  });
});

describe("chips", () => {
  it("describes each predicate kind", () => {
    expect(describeFilter({ field: "Conference", predicate: { kind: "equals", value: "VIS" } })).toBe("Conference = VIS");
    expect(describeFilter({ field: "Conference", predicate: { kind: "in-set", values: ["a", "b"] } })).toBe(
      "Conference in {a, b}",
    );
    expect(describeFilter({ field: "Year", predicate: { kind: "range", min: 2019, max: 2024 } })).toBe(
      "2019 ≤ Year ≤ 2024",
    );
  });
});
