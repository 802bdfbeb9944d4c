/** Minimal SVG renderer for the pipeline's chart-document subset.
 *
 * Understands exactly what the recommender emits: marks point/bar/line/area/
 * tick/rect; channels x/y/color/size/facet; linear/log/symlog scales; count/
 * sum/mean aggregates; equal-width binning. Charts are re-rendered from the
 * caller's (possibly filtered) row subset, so the table and chart always show
 * the same data.
 */

import type { Cell, ChartDoc, EncodingDoc, FieldInfo } from "./types";

const SVG_NS = "http://www.w3.org/2000/svg";
const PANEL_W = 280;
const PANEL_H = 200;
const MARGIN = { left: 52, right: 12, top: 22, bottom: 34 };
const PALETTE = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#eeca3b", "#b279a2", "#ff9da6", "#9d755d", "#bab0ac"];

interface Columns {
  index: Map<string, number>;
  kinds: Map<string, string>;
}

function columnsOf(fields: FieldInfo[]): Columns {
  return {
    index: new Map(fields.map((f, i) => [f.name, i])),
    kinds: new Map(fields.map((f) => [f.name, f.kind])),
  };
}

function el<K extends keyof SVGElementTagNameMap>(tag: K, attrs: Record<string, string | number> = {}): SVGElementTagNameMap[K] {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, String(value));
  }
  return node;
}

function isDiscrete(enc: EncodingDoc | undefined, kinds: Map<string, string>): boolean {
  if (!enc || !enc.field) return false;
  if (enc.bin) return true;
  const kind = kinds.get(enc.field);
  return kind === "nominal" || kind === "ordinal" || kind === "boolean" || kind === "identifier";
}

function numeric(value: Cell): number | null {
  if (typeof value === "number") return value;
  if (typeof value === "boolean") return value ? 1 : 0;
  if (typeof value === "string") {
    const direct = Number(value);
    if (!Number.isNaN(direct)) return direct;
    const parsed = Date.parse(value);
    return Number.isNaN(parsed) ? null : parsed;
  }
  return null;
}

type ScaleFn = (value: Cell) => number | null;

function makeTransform(enc: EncodingDoc): (v: number) => number {
  const scaleType = enc.scale?.type;
  if (scaleType === "log") {
    return (v) => Math.log10(Math.max(v, 1e-12));
  }
  if (scaleType === "symlog") {
    const c = enc.scale?.constant ?? 1;
    return (v) => Math.sign(v) * Math.log10(1 + Math.abs(v) / c);
  }
  return (v) => v;
}

function numericScale(enc: EncodingDoc, values: number[], rangeLo: number, rangeHi: number): ScaleFn {
  const transform = makeTransform(enc);
  const transformed = values.map(transform);
  let lo = Math.min(...transformed);
  let hi = Math.max(...transformed);
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = (hi - lo) * 0.05;
  lo -= pad;
  hi += pad;
  return (value) => {
    const n = numeric(value);
    if (n === null) return null;
    const t = transform(n);
    return rangeLo + ((t - lo) / (hi - lo)) * (rangeHi - rangeLo);
  };
}

function bandScale(domain: string[], rangeLo: number, rangeHi: number): { scale: ScaleFn; width: number } {
  const step = (rangeHi - rangeLo) / Math.max(domain.length, 1);
  const index = new Map(domain.map((v, i) => [v, i]));
  return {
    scale: (value) => {
      const i = index.get(String(value));
      return i === undefined ? null : rangeLo + step * i + step / 2;
    },
    width: step,
  };
}

interface Datum {
  x: Cell;
  y: Cell;
  color: Cell;
  size: Cell;
}

/** Group + aggregate rows the way the chart doc asks (count/sum/mean, bins). */
function prepare(doc: ChartDoc, cols: Columns, rows: Cell[][], xExtent: [number, number] | null): Datum[] {
  const enc = doc.encoding;
  const get = (name: string | undefined, row: Cell[]): Cell => {
    if (!name) return null;
    const idx = cols.index.get(name);
    return idx === undefined ? null : (row[idx] ?? null);
  };

  const xEnc = enc.x;
  const yEnc = enc.y;
  const binned = xEnc?.bin;
  const aggregated = yEnc?.aggregate ?? (yEnc && !yEnc.field ? "count" : undefined);

  if (!aggregated && !binned) {
    return rows.map((row) => ({
      x: get(xEnc?.field, row),
      y: get(yEnc?.field, row),
      color: get(enc.color?.field, row),
      size: get(enc.size?.field, row),
    }));
  }

  // group rows by x key (bin index or discrete value), then reduce y
  const groups = new Map<string, { x: Cell; members: Cell[][] }>();
  const maxbins = binned?.maxbins ?? 20;
  for (const row of rows) {
    const rawX = get(xEnc?.field, row);
    let key: string;
    let xValue: Cell = rawX;
    if (binned && xExtent) {
      const n = numeric(rawX);
      if (n === null) continue;
      const [lo, hi] = xExtent;
      const width = (hi - lo) / maxbins || 1;
      const bin = Math.min(Math.floor((n - lo) / width), maxbins - 1);
      key = `bin:${bin}`;
      xValue = lo + width * (bin + 0.5);
    } else {
      key = String(rawX);
    }
    const group = groups.get(key) ?? { x: xValue, members: [] };
    group.members.push(row);
    groups.set(key, group);
  }

  const reduce = (members: Cell[][]): number => {
    if (aggregated === "count" || !yEnc?.field) return members.length;
    const values = members
      .map((row) => numeric(get(yEnc.field, row)))
      .filter((v): v is number => v !== null);
    if (values.length === 0) return 0;
    const total = values.reduce((a, b) => a + b, 0);
    return aggregated === "mean" ? total / values.length : total;
  };

  return [...groups.values()].map((group) => ({
    x: group.x,
    y: reduce(group.members),
    color: group.members.length ? get(enc.color?.field, group.members[0]!) : null,
    size: null,
  }));
}

function colorScale(enc: EncodingDoc | undefined, cols: Columns, rows: Cell[][]): (value: Cell) => string {
  if (!enc?.field) return () => PALETTE[0]!;
  const idx = cols.index.get(enc.field);
  if (idx === undefined) return () => PALETTE[0]!;
  const kind = cols.kinds.get(enc.field);
  if (kind === "quantitative") {
    const values = rows.map((r) => numeric(r[idx] ?? null)).filter((v): v is number => v !== null);
    const lo = Math.min(...values, 0);
    const hi = Math.max(...values, 1);
    return (value) => {
      const n = numeric(value) ?? lo;
      const t = hi === lo ? 0.5 : (n - lo) / (hi - lo);
      const light = 85 - Math.round(t * 55);
      return `hsl(210, 65%, ${light}%)`;
    };
  }
  const domain = [...new Set(rows.map((r) => String(r[idx] ?? "")))].sort();
  const lookup = new Map(domain.map((v, i) => [v, PALETTE[i % PALETTE.length]!]));
  return (value) => lookup.get(String(value)) ?? PALETTE[0]!;
}

function axisTicks(values: number[], count = 5): number[] {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  if (!Number.isFinite(lo) || !Number.isFinite(hi) || lo === hi) return [lo];
  const step = (hi - lo) / (count - 1);
  return Array.from({ length: count }, (_, i) => lo + step * i);
}

function shortLabel(value: Cell): string {
  if (typeof value === "number") {
    if (Math.abs(value) >= 10000) return value.toExponential(1);
    return Number.isInteger(value) ? String(value) : value.toFixed(2);
  }
  const text = String(value);
  return text.length > 9 ? text.slice(0, 8) + "…" : text;
}

export function renderChart(doc: ChartDoc, fields: FieldInfo[], rows: Cell[][]): SVGSVGElement {
  const cols = columnsOf(fields);
  const enc = doc.encoding;
  const facetEnc = enc.facet;

  let panels: { label: string | null; rows: Cell[][] }[];
  if (facetEnc?.field) {
    const idx = cols.index.get(facetEnc.field);
    const domain = [...new Set(rows.map((r) => String(r[idx ?? 0] ?? "")))].sort();
    panels = domain.map((value) => ({
      label: value,
      rows: rows.filter((r) => String(r[idx ?? 0] ?? "") === value),
    }));
    if (panels.length === 0) panels = [{ label: null, rows: [] }];
  } else {
    panels = [{ label: null, rows }];
  }

  const columnsCount = Math.min(panels.length, 3);
  const rowsCount = Math.ceil(panels.length / columnsCount);
  const width = MARGIN.left + columnsCount * (PANEL_W + 16) + MARGIN.right;
  const height = MARGIN.top + rowsCount * (PANEL_H + MARGIN.bottom + 18);

  const svg = el("svg", { width, height, viewBox: `0 0 ${width} ${height}`, role: "img" });
  svg.classList.add("rs-chart");

  // shared scales across panels, computed on the full (filtered) row set
  const xEnc = enc.x;
  const yEnc = enc.y;
  const xDiscrete = isDiscrete(xEnc, cols.kinds) && !xEnc?.bin;
  const yDiscrete = isDiscrete(yEnc, cols.kinds);

  const xIdx = xEnc?.field ? cols.index.get(xEnc.field) : undefined;
  const xNumbers = xIdx === undefined ? [] : rows.map((r) => numeric(r[xIdx] ?? null)).filter((v): v is number => v !== null);
  const xExtent: [number, number] | null = xNumbers.length ? [Math.min(...xNumbers), Math.max(...xNumbers)] : null;

  const allData = panels.map((p) => prepare(doc, cols, p.rows, xExtent));
  const flat = allData.flat();
  const color = colorScale(enc.color, cols, rows);

  const xDomain = xDiscrete ? [...new Set(flat.map((d) => String(d.x)))].sort() : [];
  const yDomain = yDiscrete ? [...new Set(flat.map((d) => String(d.y)))].sort() : [];
  const xNums = flat.map((d) => numeric(d.x)).filter((v): v is number => v !== null);
  const yNums = flat.map((d) => numeric(d.y)).filter((v): v is number => v !== null);

  if (flat.length === 0) {
    const empty = el("text", { x: width / 2, y: height / 2, "text-anchor": "middle", fill: "#718096" });
    empty.textContent = "no rows match the active filters";
    svg.appendChild(empty);
    return svg;
  }

  panels.forEach((panel, panelIndex) => {
    const columnIndex = panelIndex % columnsCount;
    const rowIndex = Math.floor(panelIndex / columnsCount);
    const ox = MARGIN.left + columnIndex * (PANEL_W + 16);
    const oy = MARGIN.top + rowIndex * (PANEL_H + MARGIN.bottom + 18);
    const g = el("g", { transform: `translate(${ox},${oy})` });
    svg.appendChild(g);

    if (panel.label !== null) {
      const header = el("text", { x: PANEL_W / 2, y: -8, "text-anchor": "middle", "font-size": 11, fill: "#4a5568" });
      header.textContent = panel.label;
      g.appendChild(header);
    }

    const xBand = xDiscrete ? bandScale(xDomain, 0, PANEL_W) : null;
    const yBand = yDiscrete ? bandScale(yDomain, PANEL_H, 0) : null;
    const sx: ScaleFn = xBand ? xBand.scale : numericScale(xEnc ?? { type: "quantitative" }, xNums, 0, PANEL_W);
    const sy: ScaleFn = yBand ? yBand.scale : numericScale(yEnc ?? { type: "quantitative" }, yNums.length ? yNums : [0, 1], PANEL_H, 0);

    g.appendChild(el("line", { x1: 0, y1: PANEL_H, x2: PANEL_W, y2: PANEL_H, stroke: "#cbd5e0" }));
    g.appendChild(el("line", { x1: 0, y1: 0, x2: 0, y2: PANEL_H, stroke: "#cbd5e0" }));

    const data = allData[panelIndex]!;
    drawMarks(g, doc.mark, data, sx, sy, color, xBand?.width ?? 18, yBand?.width ?? 18, PANEL_H);

    // x labels
    const labelY = PANEL_H + 14;
    if (xBand) {
      const shown = xDomain.length <= 10 ? xDomain : xDomain.filter((_, i) => i % Math.ceil(xDomain.length / 10) === 0);
      for (const value of shown) {
        const px = xBand.scale(value);
        if (px === null) continue;
        const label = el("text", { x: px, y: labelY, "text-anchor": "middle", "font-size": 9, fill: "#4a5568" });
        label.textContent = shortLabel(value);
        g.appendChild(label);
      }
    } else if (xNums.length) {
      for (const tick of axisTicks(xNums)) {
        const px = sx(tick);
        if (px === null) continue;
        const label = el("text", { x: px, y: labelY, "text-anchor": "middle", "font-size": 9, fill: "#4a5568" });
        label.textContent = shortLabel(tick);
        g.appendChild(label);
      }
    }
    // y labels
    if (yBand) {
      for (const value of yDomain) {
        const py = yBand.scale(value);
        if (py === null) continue;
        const label = el("text", { x: -6, y: py + 3, "text-anchor": "end", "font-size": 9, fill: "#4a5568" });
        label.textContent = shortLabel(value);
        g.appendChild(label);
      }
    } else if (yNums.length) {
      for (const tick of axisTicks(yNums)) {
        const py = sy(tick);
        if (py === null) continue;
        const label = el("text", { x: -6, y: py + 3, "text-anchor": "end", "font-size": 9, fill: "#4a5568" });
        label.textContent = shortLabel(tick);
        g.appendChild(label);
      }
    }

    // axis titles on the first panel only
    if (panelIndex === 0) {
      const xTitle = el("text", { x: PANEL_W / 2, y: PANEL_H + 28, "text-anchor": "middle", "font-size": 10, fill: "#2d3748" });
      xTitle.textContent = xEnc?.field ?? (xEnc?.aggregate ?? "");
      g.appendChild(xTitle);
      const yTitle = el("text", { x: -40, y: PANEL_H / 2, "font-size": 10, fill: "#2d3748", transform: `rotate(-90, -40, ${PANEL_H / 2})`, "text-anchor": "middle" });
      yTitle.textContent = yEnc?.field ?? (yEnc?.aggregate === "count" ? "count" : "");
      g.appendChild(yTitle);
    }
  });

  return svg;
}

function drawMarks(
  g: SVGGElement,
  mark: string,
  data: Datum[],
  sx: ScaleFn,
  sy: ScaleFn,
  color: (value: Cell) => string,
  bandW: number,
  bandH: number,
  panelH: number,
): void {
  const sizeNums = data.map((d) => numeric(d.size)).filter((v): v is number => v !== null);
  const sizeLo = sizeNums.length ? Math.min(...sizeNums) : 0;
  const sizeHi = sizeNums.length ? Math.max(...sizeNums) : 1;

  const points = data
    .map((d) => ({ d, px: sx(d.x), py: sy(d.y) }))
    .filter((p): p is { d: Datum; px: number; py: number } => p.px !== null && p.py !== null);

  if (mark === "line" || mark === "area") {
    const sorted = [...points].sort((a, b) => a.px - b.px);
    if (sorted.length) {
      const path = sorted.map((p, i) => `${i === 0 ? "M" : "L"}${p.px.toFixed(1)},${p.py.toFixed(1)}`).join(" ");
      if (mark === "area") {
        const first = sorted[0]!;
        const last = sorted[sorted.length - 1]!;
        const closed = `${path} L${last.px.toFixed(1)},${panelH} L${first.px.toFixed(1)},${panelH} Z`;
        g.appendChild(el("path", { d: closed, fill: PALETTE[0]!, "fill-opacity": 0.35, stroke: "none", class: "mark" }));
      }
      g.appendChild(el("path", { d: path, fill: "none", stroke: PALETTE[0]!, "stroke-width": 1.6, class: mark === "line" ? "mark" : "mark-outline" }));
    }
    return;
  }

  for (const { d, px, py } of points) {
    const fill = color(d.color);
    if (mark === "bar") {
      const w = Math.max(bandW * 0.8, 2);
      g.appendChild(el("rect", { x: px - w / 2, y: Math.min(py, panelH), width: w, height: Math.max(panelH - py, 0.5), fill, class: "mark" }));
    } else if (mark === "tick") {
      g.appendChild(el("rect", { x: px - 0.75, y: py - 6, width: 1.5, height: 12, fill, class: "mark" }));
    } else if (mark === "rect") {
      const w = Math.max(bandW * 0.9, 2);
      const h = Math.max(bandH * 0.9, 2);
      g.appendChild(el("rect", { x: px - w / 2, y: py - h / 2, width: w, height: h, fill, class: "mark" }));
    } else {
      const sn = numeric(d.size);
      const radius = sn === null || sizeHi === sizeLo ? 3 : 2 + ((sn - sizeLo) / (sizeHi - sizeLo)) * 6;
      g.appendChild(el("circle", { cx: px, cy: py, r: radius, fill, "fill-opacity": 0.7, class: "mark" }));
    }
  }
}
