import { describe, expect, it } from "vitest";

import { toCsv } from "../src/csv";

const FIELDS = [
  { name: "Conference", kind: "nominal" },
  { name: "Note", kind: "nominal" },
];

describe("csv export", () => {
  it("includes a header row and all rows", () => {
    const csv = toCsv(FIELDS, [
      ["VIS", "plain"],
      ["CHI", "fine"],
    ]);
    const lines = csv.trimEnd().split("\r\n");
    expect(lines[0]).toBe("Conference,Note");
    expect(lines.length).toBe(3);
  });

  it("quotes commas, quotes, and newlines", () => {
    const csv = toCsv(FIELDS, [["V,S", 'say "hi"\nthere']]);
    expect(csv).toContain('"V,S"');
    expect(csv).toContain('"say ""hi""\nthere"');
  });

  it("renders empty cells for nulls", () => {
    const csv = toCsv(FIELDS, [[null, "x"]]);
    expect(csv.split("\r\n")[1]).toBe(",x");
  });

  it("empty subset still carries the header", () => {
    const csv = toCsv(FIELDS, []);
    expect(csv).toBe("Conference,Note\r\n");
  });
});
