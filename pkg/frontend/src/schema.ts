import { readFileSync } from "node:fs";
import Papa from "papaparse";

// Versioned column sets of the harness CSV outputs.  The first column of
// every data row repeats the schema tag so consumers can check compatibility
// before trusting the numbers.
export const SCHEMAS = {
  "vkgap-1": [
    "schema", "eps", "nu", "h", "e_scaled", "e_limit", "gap_abs", "gap_rel",
    "max_dist", "i_over_h4", "wall_ms",
  ],
  "vkmom-1": ["schema", "eps", "nu", "h", "moment_gap", "wall_ms"],
  "vktrace-1": ["schema", "iter", "energy", "grad_norm", "step"],
} as const;

export type SchemaTag = keyof typeof SCHEMAS;

export class SchemaError extends Error {}

export type Row = Record<string, unknown>;

export interface Table {
  tag: SchemaTag;
  path: string;
  rows: Row[];
}

export function readTable(path: string, tag: SchemaTag): Table {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Row>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`${path}: row ${e.row}: ${e.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of SCHEMAS[tag]) {
    if (!fields.includes(col)) {
      throw new SchemaError(`${path}: missing column '${col}' required by ${tag}`);
    }
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  for (const row of parsed.data) {
    if (row.schema !== tag) {
      throw new SchemaError(
        `${path}: schema tag '${String(row.schema)}' does not match expected '${tag}'`);
    }
  }
  return { tag, path, rows: parsed.data };
}

// Numeric cell accessor; empty/diagnostic-off cells stay out of figures, so
// anything non-finite here is a schema violation.
export function num(table: Table, row: Row, col: string): number {
  const v = row[col];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new SchemaError(`${table.path}: column '${col}' holds non-numeric value ${String(v)}`);
  }
  return v;
}
