/** Viewer entry: renders the inlined bundle into #app.
 *
 * Each insight section owns its filter state; the chart and the table are
 * always rendered from the same filtered row array, and nothing on disk is
 * ever touched. No network requests are made for any interaction.
 */

import { renderChart } from "./chart";
import { downloadCsv, toCsv } from "./csv";
import {
  Filter,
  ViewerState,
  addFilter,
  applyFilters,
  clearFilters,
  describeFilter,
  initialState,
  removeFilter,
} from "./state";
import type { BundlePayload, Cell, DataPayload, FieldInfo, InsightEntry } from "./types";

const TABLE_DISPLAY_CAP = 200;

declare global {
  interface Window {
    __REPORT__?: BundlePayload;
  }
}

function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function errorPanel(message: string): HTMLElement {
  return h("div", { class: "rs-error", role: "alert" }, [`⚠ ${message}`]);
}

function renderTable(fields: FieldInfo[], rows: Cell[][], onCellFilter: (field: string, value: Cell) => void): HTMLElement {
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
      td.addEventListener("click", () => onCellFilter(fields[i]!.name, cell));
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

class InsightSection {
  state: ViewerState = initialState();
  readonly root: HTMLElement;
  private readonly chartMount = h("div", { class: "rs-chart-mount" });
  private readonly tableMount = h("div", { class: "rs-table-mount" });
  private readonly chipsMount = h("div", { class: "rs-chips" });
  private readonly countLabel = h("span", { class: "rs-count" });

  constructor(
    private readonly entry: InsightEntry,
    private readonly chartDoc: unknown,
    private readonly data: DataPayload,
  ) {
    this.root = h("section", { class: "rs-insight", id: `insight-${entry.insight_id}` });
    this.build();
    this.refresh();
  }

  private build(): void {
    const entry = this.entry;
    this.root.appendChild(h("h2", {}, [entry.title]));
    this.root.appendChild(h("p", { class: "rs-question" }, [entry.question]));
    this.root.appendChild(h("p", { class: "rs-narrative" }, [entry.narrative.body_markdown]));
    if (this.data.truncated) {
      this.root.appendChild(
        h("p", { class: "rs-truncated" }, [
          `showing the first ${this.data.rows.length} of ${this.data.row_count} rows (embedded data is capped)`,
        ]),
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

  private buildFilterBar(): HTMLElement {
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

  apply(filter: Filter, origin: "table" | "chart" = "table"): void {
    this.state = addFilter(this.state, filter, origin);
    this.refresh();
  }

  filteredRows(): Cell[][] {
    return applyFilters(this.data.fields, this.data.rows, this.state);
  }

  refresh(): void {
    const rows = this.filteredRows();

    this.chipsMount.replaceChildren();
    this.state.filters.forEach((filter, index) => {
      const chip = h("span", { class: "rs-chip" }, [describeFilter(filter)]);
      const remove = h("button", { type: "button", class: "rs-chip-remove", "aria-label": "remove filter" }, ["×"]);
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
      const svg = renderChart(this.chartDoc as never, this.data.fields, rows);
      this.chartMount.appendChild(svg);
    } catch (exc) {
      this.chartMount.appendChild(errorPanel(`chart failed to render: ${String(exc)}`));
    }

    this.tableMount.replaceChildren(
      renderTable(this.data.fields, rows, (field, value) => this.apply({ field, predicate: { kind: "equals", value } })),
    );
  }
}

export function loadBundle(payload: BundlePayload, mount: HTMLElement): InsightSection[] {
  mount.replaceChildren();
  const sections: InsightSection[] = [];
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
        h("p", {}, [skip.reason]),
      ]),
    );
  }
  return sections;
}

const STYLE = `
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

export function boot(): void {
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
