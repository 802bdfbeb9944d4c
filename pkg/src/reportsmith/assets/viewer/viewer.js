"use strict";
(() => {
  // src/chart.ts
  var SVG_NS = "http://www.w3.org/2000/svg";
  var PANEL_W = 280;
  var PANEL_H = 200;
  var MARGIN = { left: 52, right: 12, top: 22, bottom: 34 };
  var PALETTE = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#eeca3b", "#b279a2", "#ff9da6", "#9d755d", "#bab0ac"];
  function columnsOf(fields) {
    return {
      index: new Map(fields.map((f, i) => [f.name, i])),
      kinds: new Map(fields.map((f) => [f.name, f.kind]))
    };
  }
  function el(tag, attrs = {}) {
    const node = document.createElementNS(SVG_NS, tag);
    for (const [key, value] of Object.entries(attrs)) {
      node.setAttribute(key, String(value));
    }
    return node;
  }
  function isDiscrete(enc, kinds) {
    if (!enc || !enc.field) return false;
    if (enc.bin) return true;
    const kind = kinds.get(enc.field);
    return kind === "nominal" || kind === "ordinal" || kind === "boolean" || kind === "identifier";
  }
  function numeric(value) {
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
  function makeTransform(enc) {
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
  function numericScale(enc, values, rangeLo, rangeHi) {
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
      return rangeLo + (t - lo) / (hi - lo) * (rangeHi - rangeLo);
    };
  }
  function bandScale(domain, rangeLo, rangeHi) {
    const step = (rangeHi - rangeLo) / Math.max(domain.length, 1);
    const index = new Map(domain.map((v, i) => [v, i]));
    return {
      scale: (value) => {
        const i = index.get(String(value));
        return i === void 0 ? null : rangeLo + step * i + step / 2;
      },
      width: step
    };
  }
  function prepare(doc, cols, rows, xExtent) {
    const enc = doc.encoding;
    const get = (name, row) => {
      if (!name) return null;
      const idx = cols.index.get(name);
      return idx === void 0 ? null : row[idx] ?? null;
    };
    const xEnc = enc.x;
    const yEnc = enc.y;
    const binned = xEnc?.bin;
    const aggregated = yEnc?.aggregate ?? (yEnc && !yEnc.field ? "count" : void 0);
    if (!aggregated && !binned) {
      return rows.map((row) => ({
        x: get(xEnc?.field, row),
        y: get(yEnc?.field, row),
        color: get(enc.color?.field, row),
        size: get(enc.size?.field, row)
      }));
    }
    const groups = /* @__PURE__ */ new Map();
    const maxbins = binned?.maxbins ?? 20;
    for (const row of rows) {
      const rawX = get(xEnc?.field, row);
      let key;
      let xValue = rawX;
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
    const reduce = (members) => {
      if (aggregated === "count" || !yEnc?.field) return members.length;
      const values = members.map((row) => numeric(get(yEnc.field, row))).filter((v) => v !== null);
      if (values.length === 0) return 0;
      const total = values.reduce((a, b) => a + b, 0);
      return aggregated === "mean" ? total / values.length : total;
    };
    return [...groups.values()].map((group) => ({
      x: group.x,
      y: reduce(group.members),
      color: group.members.length ? get(enc.color?.field, group.members[0]) : null,
      size: null
    }));
  }
  function colorScale(enc, cols, rows) {
    if (!enc?.field) return () => PALETTE[0];
    const idx = cols.index.get(enc.field);
    if (idx === void 0) return () => PALETTE[0];
    const kind = cols.kinds.get(enc.field);
    if (kind === "quantitative") {
      const values = rows.map((r) => numeric(r[idx] ?? null)).filter((v) => v !== null);
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
    const lookup = new Map(domain.map((v, i) => [v, PALETTE[i % PALETTE.length]]));
    return (value) => lookup.get(String(value)) ?? PALETTE[0];
  }
  function axisTicks(values, count = 5) {
    const lo = Math.min(...values);
    const hi = Math.max(...values);
    if (!Number.isFinite(lo) || !Number.isFinite(hi) || lo === hi) return [lo];
    const step = (hi - lo) / (count - 1);
    return Array.from({ length: count }, (_, i) => lo + step * i);
  }
  function shortLabel(value) {
    if (typeof value === "number") {
      if (Math.abs(value) >= 1e4) return value.toExponential(1);
      return Number.isInteger(value) ? String(value) : value.toFixed(2);
    }
    const text = String(value);
    return text.length > 9 ? text.slice(0, 8) + "\u2026" : text;
  }
  function renderChart(doc, fields, rows) {
    const cols = columnsOf(fields);
    const enc = doc.encoding;
    const facetEnc = enc.facet;
    let panels;
    if (facetEnc?.field) {
      const idx = cols.index.get(facetEnc.field);
      const domain = [...new Set(rows.map((r) => String(r[idx ?? 0] ?? "")))].sort();
      panels = domain.map((value) => ({
        label: value,
        rows: rows.filter((r) => String(r[idx ?? 0] ?? "") === value)
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
    const xEnc = enc.x;
    const yEnc = enc.y;
    const xDiscrete = isDiscrete(xEnc, cols.kinds) && !xEnc?.bin;
    const yDiscrete = isDiscrete(yEnc, cols.kinds);
    const xIdx = xEnc?.field ? cols.index.get(xEnc.field) : void 0;
    const xNumbers = xIdx === void 0 ? [] : rows.map((r) => numeric(r[xIdx] ?? null)).filter((v) => v !== null);
    const xExtent = xNumbers.length ? [Math.min(...xNumbers), Math.max(...xNumbers)] : null;
    const allData = panels.map((p) => prepare(doc, cols, p.rows, xExtent));
    const flat = allData.flat();
    const color = colorScale(enc.color, cols, rows);
    const xDomain = xDiscrete ? [...new Set(flat.map((d) => String(d.x)))].sort() : [];
    const yDomain = yDiscrete ? [...new Set(flat.map((d) => String(d.y)))].sort() : [];
    const xNums = flat.map((d) => numeric(d.x)).filter((v) => v !== null);
    const yNums = flat.map((d) => numeric(d.y)).filter((v) => v !== null);
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
      const sx = xBand ? xBand.scale : numericScale(xEnc ?? { type: "quantitative" }, xNums, 0, PANEL_W);
      const sy = yBand ? yBand.scale : numericScale(yEnc ?? { type: "quantitative" }, yNums.length ? yNums : [0, 1], PANEL_H, 0);
      g.appendChild(el("line", { x1: 0, y1: PANEL_H, x2: PANEL_W, y2: PANEL_H, stroke: "#cbd5e0" }));
      g.appendChild(el("line", { x1: 0, y1: 0, x2: 0, y2: PANEL_H, stroke: "#cbd5e0" }));
      const data = allData[panelIndex];
      drawMarks(g, doc.mark, data, sx, sy, color, xBand?.width ?? 18, yBand?.width ?? 18, PANEL_H);
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
  function drawMarks(g, mark, data, sx, sy, color, bandW, bandH, panelH) {
    const sizeNums = data.map((d) => numeric(d.size)).filter((v) => v !== null);
    const sizeLo = sizeNums.length ? Math.min(...sizeNums) : 0;
    const sizeHi = sizeNums.length ? Math.max(...sizeNums) : 1;
    const points = data.map((d) => ({ d, px: sx(d.x), py: sy(d.y) })).filter((p) => p.px !== null && p.py !== null);
    if (mark === "line" || mark === "area") {
      const sorted = [...points].sort((a, b) => a.px - b.px);
      if (sorted.length) {
        const path = sorted.map((p, i) => `${i === 0 ? "M" : "L"}${p.px.toFixed(1)},${p.py.toFixed(1)}`).join(" ");
        if (mark === "area") {
          const first = sorted[0];
          const last = sorted[sorted.length - 1];
          const closed = `${path} L${last.px.toFixed(1)},${panelH} L${first.px.toFixed(1)},${panelH} Z`;
          g.appendChild(el("path", { d: closed, fill: PALETTE[0], "fill-opacity": 0.35, stroke: "none", class: "mark" }));
        }
        g.appendChild(el("path", { d: path, fill: "none", stroke: PALETTE[0], "stroke-width": 1.6, class: mark === "line" ? "mark" : "mark-outline" }));
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
        const h2 = Math.max(bandH * 0.9, 2);
        g.appendChild(el("rect", { x: px - w / 2, y: py - h2 / 2, width: w, height: h2, fill, class: "mark" }));
      } else {
        const sn = numeric(d.size);
        const radius = sn === null || sizeHi === sizeLo ? 3 : 2 + (sn - sizeLo) / (sizeHi - sizeLo) * 6;
        g.appendChild(el("circle", { cx: px, cy: py, r: radius, fill, "fill-opacity": 0.7, class: "mark" }));
      }
    }
  }

  // src/csv.ts
  function quote(value) {
    const text = value === null || value === void 0 ? "" : String(value);
    if (/[",\r\n]/.test(text)) {
      return '"' + text.replace(/"/g, '""') + '"';
    }
    return text;
  }
  function toCsv(fields, rows) {
    const lines = [fields.map((f) => quote(f.name)).join(",")];
    for (const row of rows) {
      lines.push(row.map(quote).join(","));
    }
    return lines.join("\r\n") + "\r\n";
  }
  function downloadCsv(filename, content) {
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

  // src/state.ts
  function initialState() {
    return { filters: [], origin: null };
  }
  function addFilter(state, filter, origin = "table") {
    return { filters: [...state.filters, filter], origin };
  }
  function removeFilter(state, index) {
    return { filters: state.filters.filter((_, i) => i !== index), origin: state.origin };
  }
  function clearFilters(_state) {
    return initialState();
  }
  function asNumber(value) {
    if (typeof value === "number") return value;
    if (typeof value === "string") {
      const n = Number(value);
      return Number.isNaN(n) ? null : n;
    }
    if (typeof value === "boolean") return value ? 1 : 0;
    return null;
  }
  function matches(value, predicate) {
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
  function applyFilters(fields, rows, state) {
    if (state.filters.length === 0) return rows;
    const indexOf = new Map(fields.map((f, i) => [f.name, i]));
    return rows.filter(
      (row) => state.filters.every((filter) => {
        const idx = indexOf.get(filter.field);
        if (idx === void 0) return false;
        const cell = row[idx];
        return matches(cell === void 0 ? null : cell, filter.predicate);
      })
    );
  }
  function describeFilter(filter) {
    const p = filter.predicate;
    switch (p.kind) {
      case "equals":
        return `${filter.field} = ${String(p.value)}`;
      case "in-set":
        return `${filter.field} in {${p.values.map(String).join(", ")}}`;
      case "range": {
        const lo = p.min === null ? "" : `${p.min} \u2264 `;
        const hi = p.max === null ? "" : ` \u2264 ${p.max}`;
        return `${lo}${filter.field}${hi}`;
      }
    }
  }

  // src/main.ts
  var TABLE_DISPLAY_CAP = 200;
  function h(tag, attrs = {}, children = []) {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) {
      node.setAttribute(key, value);
    }
    for (const child of children) {
      node.append(child);
    }
    return node;
  }
  function errorPanel(message) {
    return h("div", { class: "rs-error", role: "alert" }, [`\u26A0 ${message}`]);
  }
  function renderTable(fields, rows, onCellFilter) {
    const table = h("table", { class: "rs-table" });
    const head = h("tr");
    for (const f of fields) {
      head.appendChild(h("th", {}, [f.name]));
    }
    table.appendChild(h("thead", {}, [head]));
    const body = h("tbody");
    for (const row of rows.slice(0, TABLE_DISPLAY_CAP)) {
      const tr = h("tr");
      row.forEach((cell, i) => {
        const td = h("td", { class: "rs-cell" }, [cell === null ? "" : String(cell)]);
        td.addEventListener("click", () => onCellFilter(fields[i].name, cell));
        td.title = "click to filter on this value";
        tr.appendChild(td);
      });
      body.appendChild(tr);
    }
    table.appendChild(body);
    const wrapper = h("div", { class: "rs-table-wrap" }, [table]);
    if (rows.length > TABLE_DISPLAY_CAP) {
      wrapper.appendChild(h("p", { class: "rs-note" }, [`showing ${TABLE_DISPLAY_CAP} of ${rows.length} rows`]));
    }
    if (rows.length === 0) {
      wrapper.appendChild(h("p", { class: "rs-empty" }, ["no rows match the active filters"]));
    }
    return wrapper;
  }
  var InsightSection = class {
    constructor(entry, chartDoc, data) {
      this.entry = entry;
      this.chartDoc = chartDoc;
      this.data = data;
      this.state = initialState();
      this.chartMount = h("div", { class: "rs-chart-mount" });
      this.tableMount = h("div", { class: "rs-table-mount" });
      this.chipsMount = h("div", { class: "rs-chips" });
      this.countLabel = h("span", { class: "rs-count" });
      this.root = h("section", { class: "rs-insight", id: `insight-${entry.insight_id}` });
      this.build();
      this.refresh();
    }
    build() {
      const entry = this.entry;
      this.root.appendChild(h("h2", {}, [entry.title]));
      this.root.appendChild(h("p", { class: "rs-question" }, [entry.question]));
      this.root.appendChild(h("p", { class: "rs-narrative" }, [entry.narrative.body_markdown]));
      if (this.data.truncated) {
        this.root.appendChild(
          h("p", { class: "rs-truncated" }, [
            `showing the first ${this.data.rows.length} of ${this.data.row_count} rows (embedded data is capped)`
          ])
        );
      }
      this.root.appendChild(this.chartMount);
      this.root.appendChild(this.buildFilterBar());
      this.root.appendChild(this.chipsMount);
      this.root.appendChild(this.countLabel);
      this.root.appendChild(this.tableMount);
      const sql = h("details", { class: "rs-sql" }, [h("summary", {}, ["SQL derivation"]), h("pre", {}, [entry.sql])]);
      this.root.appendChild(sql);
    }
    buildFilterBar() {
      const bar = h("div", { class: "rs-filter-bar" });
      const fieldSelect = h("select", { class: "rs-filter-field", "aria-label": "filter field" });
      for (const f of this.data.fields) {
        fieldSelect.appendChild(h("option", { value: f.name }, [f.name]));
      }
      const valueInput = h("input", { class: "rs-filter-value", placeholder: "value (equals)" });
      const minInput = h("input", { class: "rs-filter-min", placeholder: "min", size: "6" });
      const maxInput = h("input", { class: "rs-filter-max", placeholder: "max", size: "6" });
      const addEquals = h("button", { type: "button", class: "rs-add-equals" }, ["= filter"]);
      addEquals.addEventListener("click", () => {
        if (valueInput.value === "") return;
        this.apply({ field: fieldSelect.value, predicate: { kind: "equals", value: valueInput.value } });
        valueInput.value = "";
      });
      const addRange = h("button", { type: "button", class: "rs-add-range" }, ["range filter"]);
      addRange.addEventListener("click", () => {
        const min = minInput.value === "" ? null : Number(minInput.value);
        const max = maxInput.value === "" ? null : Number(maxInput.value);
        if (min === null && max === null) return;
        this.apply({ field: fieldSelect.value, predicate: { kind: "range", min, max } });
        minInput.value = "";
        maxInput.value = "";
      });
      const clear = h("button", { type: "button", class: "rs-clear" }, ["clear filters"]);
      clear.addEventListener("click", () => {
        this.state = clearFilters(this.state);
        this.refresh();
      });
      const exportBtn = h("button", { type: "button", class: "rs-export" }, ["export CSV"]);
      exportBtn.addEventListener("click", () => {
        const rows = applyFilters(this.data.fields, this.data.rows, this.state);
        downloadCsv(`${this.entry.insight_id}-filtered.csv`, toCsv(this.data.fields, rows));
      });
      bar.append(fieldSelect, valueInput, addEquals, minInput, maxInput, addRange, clear, exportBtn);
      return bar;
    }
    apply(filter, origin = "table") {
      this.state = addFilter(this.state, filter, origin);
      this.refresh();
    }
    filteredRows() {
      return applyFilters(this.data.fields, this.data.rows, this.state);
    }
    refresh() {
      const rows = this.filteredRows();
      this.chipsMount.replaceChildren();
      this.state.filters.forEach((filter, index) => {
        const chip = h("span", { class: "rs-chip" }, [describeFilter(filter)]);
        const remove = h("button", { type: "button", class: "rs-chip-remove", "aria-label": "remove filter" }, ["\xD7"]);
        remove.addEventListener("click", () => {
          this.state = removeFilter(this.state, index);
          this.refresh();
        });
        chip.appendChild(remove);
        this.chipsMount.appendChild(chip);
      });
      this.countLabel.textContent = `${rows.length} of ${this.data.rows.length} rows`;
      this.chartMount.replaceChildren();
      try {
        const svg = renderChart(this.chartDoc, this.data.fields, rows);
        this.chartMount.appendChild(svg);
      } catch (exc) {
        this.chartMount.appendChild(errorPanel(`chart failed to render: ${String(exc)}`));
      }
      this.tableMount.replaceChildren(
        renderTable(this.data.fields, rows, (field, value) => this.apply({ field, predicate: { kind: "equals", value } }))
      );
    }
  };
  function loadBundle(payload, mount) {
    mount.replaceChildren();
    const sections = [];
    let report;
    try {
      report = payload.report;
      if (!report || !Array.isArray(report.insights)) {
        throw new Error("manifest has no insights array");
      }
    } catch (exc) {
      mount.appendChild(errorPanel(`malformed report manifest: ${String(exc)}`));
      return sections;
    }
    mount.appendChild(h("p", { class: "rs-preamble" }, [report.preamble ?? ""]));
    for (const entry of report.insights) {
      try {
        const chartDoc = payload.charts[entry.insight_id];
        const data = payload.data[entry.insight_id];
        if (!data) throw new Error(`no embedded data for ${entry.insight_id}`);
        if (!chartDoc) throw new Error(`missing chart document for ${entry.insight_id}`);
        const section = new InsightSection(entry, chartDoc, data);
        sections.push(section);
        mount.appendChild(section.root);
      } catch (exc) {
        const failed = h("section", { class: "rs-insight rs-failed" }, [h("h2", {}, [entry.title ?? entry.insight_id])]);
        failed.appendChild(errorPanel(String(exc)));
        mount.appendChild(failed);
      }
    }
    for (const skip of report.skipped ?? []) {
      mount.appendChild(
        h("section", { class: "rs-insight rs-skipped" }, [
          h("h2", {}, [`${skip.insight_id} (skipped)`]),
          h("p", {}, [skip.reason])
        ])
      );
    }
    return sections;
  }
  var STYLE = `
.rs-insight { margin: 2.5rem 0; border-top: 1px solid #e2e8f0; padding-top: 1rem; }
.rs-error { background: #fff5f5; border: 1px solid #fc8181; color: #742a2a; padding: .6rem .8rem; border-radius: 4px; margin: .5rem 0; }
.rs-question { color: #718096; font-style: italic; }
.rs-truncated { background: #fffaf0; border: 1px solid #f6ad55; padding: .4rem .6rem; border-radius: 4px; font-size: .85rem; }
.rs-filter-bar { display: flex; flex-wrap: wrap; gap: .4rem; margin: .8rem 0 .4rem; align-items: center; }
.rs-filter-bar input, .rs-filter-bar select { padding: .25rem .4rem; border: 1px solid #cbd5e0; border-radius: 3px; font-size: .85rem; }
.rs-filter-bar button { padding: .25rem .6rem; border: 1px solid #a0aec0; background: #edf2f7; border-radius: 3px; cursor: pointer; font-size: .85rem; }
.rs-chips { display: flex; flex-wrap: wrap; gap: .35rem; margin: .3rem 0; }
.rs-chip { background: #ebf8ff; border: 1px solid #90cdf4; border-radius: 12px; padding: .1rem .6rem; font-size: .8rem; }
.rs-chip-remove { border: none; background: none; cursor: pointer; margin-left: .3rem; }
.rs-count { color: #718096; font-size: .8rem; }
.rs-table-wrap { max-height: 22rem; overflow: auto; margin: .5rem 0; }
.rs-table { border-collapse: collapse; font-size: .82rem; width: 100%; }
.rs-table th { position: sticky; top: 0; background: #f7fafc; text-align: left; padding: .3rem .5rem; border-bottom: 2px solid #cbd5e0; }
.rs-table td { padding: .25rem .5rem; border-bottom: 1px solid #edf2f7; cursor: pointer; }
.rs-table tr:hover td { background: #f0fff4; }
.rs-empty { color: #a0aec0; font-style: italic; }
.rs-note { color: #a0aec0; font-size: .75rem; }
.rs-sql pre { background: #f7fafc; border: 1px solid #e2e8f0; padding: .6rem; overflow-x: auto; font-size: .8rem; }
`;
  function boot() {
    const mount = document.getElementById("app");
    const payload = window.__REPORT__;
    if (!mount) return;
    const style = document.createElement("style");
    style.textContent = STYLE;
    document.head.appendChild(style);
    if (!payload) {
      mount.prepend(errorPanel("no embedded report payload found; showing the static fallback"));
      return;
    }
    loadBundle(payload, mount);
  }
  if (typeof document !== "undefined" && document.getElementById("app")) {
    boot();
  }
})();
