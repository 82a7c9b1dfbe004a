import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { SchemaError, readTable } from "../src/schema.js";

const FIX = join(dirname(fileURLToPath(import.meta.url)), "fixtures");
const TMP = mkdtempSync(join(tmpdir(), "vkplots-schema-"));

function csv(name: string, text: string): string {
  const p = join(TMP, name);
  writeFileSync(p, text);
  return p;
}

describe("readTable", () => {
  it("reads the canonical gap sweep", () => {
    const t = readTable(join(FIX, "converge.csv"), "vkgap-1");
    expect(t.rows.length).toBe(4);
    expect(t.rows[0].eps).toBe(0.125);
    expect(t.rows[3].gap_rel).toBeCloseTo(0.0026353310012935537, 12);
  });

  it("keeps diagnostic columns optional per row but present in the header", () => {
    const p = csv("nodiag.csv",
      "schema,eps,nu,h,e_scaled,e_limit,gap_abs,gap_rel,max_dist,i_over_h4,wall_ms\n" +
      "vkgap-1,0.125,3,0.25,59.1,49.8,9.23,0.185,0.58,,18.6\n");
    const t = readTable(p, "vkgap-1");
    expect(t.rows[0].i_over_h4).toBeNull();
  });

  it("rejects a header missing a schema column", () => {
    const p = csv("missing.csv",
      "schema,eps,nu,h,e_scaled,e_limit,gap_rel,max_dist,i_over_h4,wall_ms\n" +
      "vkgap-1,0.125,3,0.25,59.1,49.8,0.185,0.58,,18.6\n");
    expect(() => readTable(p, "vkgap-1")).toThrow(SchemaError);
    expect(() => readTable(p, "vkgap-1")).toThrow(/missing column 'gap_abs'/);
  });

  it("rejects rows tagged with a different schema", () => {
    expect(() => readTable(join(FIX, "strain.csv"), "vkgap-1")).toThrow(SchemaError);
    const p = csv("mistagged.csv",
      "schema,eps,nu,h,moment_gap,wall_ms\nvkmom-2,0.125,3,0.25,0.51,9.7\n");
    expect(() => readTable(p, "vkmom-1")).toThrow(/does not match expected 'vkmom-1'/);
  });

  it("rejects a header-only file", () => {
    const p = csv("empty.csv", "schema,eps,nu,h,moment_gap,wall_ms\n");
    expect(() => readTable(p, "vkmom-1")).toThrow(/no data rows/);
  });

  it("reads the minimizer trace", () => {
    const t = readTable(join(FIX, "minimize.csv"), "vktrace-1");
    expect(t.rows.length).toBe(361);
    expect(t.rows[0].iter).toBe(0);
  });
});
