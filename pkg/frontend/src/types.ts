/** Shapes of the bundle files emitted by the pipeline (report.json, charts/, data/). */

export type Cell = string | number | boolean | null;

export interface FieldInfo {
  name: string;
  kind: "quantitative" | "temporal" | "ordinal" | "nominal" | "boolean" | "identifier" | string;
}

export interface DataPayload {
  insight_id: string;
  fields: FieldInfo[];
  rows: Cell[][];
  row_count: number;
  truncated: boolean;
}

export interface EncodingDoc {
  field?: string;
  type: string;
  aggregate?: "count" | "sum" | "mean";
  bin?: { maxbins: number };
  scale?: { type: "log" | "symlog"; constant?: number };
}

export interface ChartDoc {
  data: { url: string };
  mark: "point" | "bar" | "line" | "area" | "tick" | "rect" | string;
  encoding: Record<string, EncodingDoc>;
}

export interface NarrativeDoc {
  insight_id: string;
  title: string;
  body_markdown: string;
  stat_citations: [string, unknown][];
}

export interface InsightEntry {
  insight_id: string;
  title: string;
  question: string;
  task: string;
  narrative: NarrativeDoc;
  chart_ref: { digest: string; store_key: string };
  data_ref: { digest: string; store_key: string };
  sql: string;
  row_count: number;
}

export interface ReportManifest {
  version: string;
  run_id: string;
  title: string;
  goal: string;
  preamble: string;
  generated_at: string;
  insights: InsightEntry[];
  skipped: { insight_id: string; reason: string }[];
}

/** Everything index.html inlines for the viewer. */
export interface BundlePayload {
  report: ReportManifest;
  charts: Record<string, ChartDoc>;
  data: Record<string, DataPayload>;
}
