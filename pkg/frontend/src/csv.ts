/** CSV export of the currently filtered rows (RFC 4180 quoting). */

import type { Cell, FieldInfo } from "./types";

function quote(value: Cell): string {
  const text = value === null || value === undefined ? "" : String(value);
  if (/[",\r\n]/.test(text)) {
    return '"' + text.replace(/"/g, '""') + '"';
  }
  return text;
}

export function toCsv(fields: FieldInfo[], rows: Cell[][]): string {
  const lines = [fields.map((f) => quote(f.name)).join(",")];
  for (const row of rows) {
    lines.push(row.map(quote).join(","));
  }
  return lines.join("\r\n") + "\r\n";
}

export function downloadCsv(filename: string, content: string): void {
  const blob = new Blob([content], { type: "text/csv;charset=utf-8" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  document.body.appendChild(anchor);
  anchor.click();
  anchor.remove();
  URL.revokeObjectURL(url);
}
