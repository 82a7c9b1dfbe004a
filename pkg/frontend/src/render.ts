import { mkdirSync, writeFileSync } from "node:fs";
import { basename, dirname } from "node:path";
import { scaleLinear, scaleLog } from "d3";
import type { ScaleContinuousNumeric } from "d3";

import { FigureKind, FigureSpec, inputPaths } from "./figure.js";
import { SchemaError, SchemaTag, Table, num, readTable } from "./schema.js";

export const WIDTH = 640;
export const HEIGHT = 440;
const MARGIN = { top: 24, right: 24, bottom: 52, left: 76 };
const X0 = MARGIN.left;
const X1 = WIDTH - MARGIN.right;
const Y0 = HEIGHT - MARGIN.bottom;
const Y1 = MARGIN.top;

// Log plots clip nonpositive values here instead of crashing on a
// zero-gap sweep; clipped markers are drawn hollow.  Converged minimizer
// traces bottom out around 1e-20, so the floor sits well below that.
export const GAP_FLOOR = 1e-24;

const COLORS = ["#1f6fb2", "#c44e52", "#55a868", "#8172b3", "#937860", "#da8bc3"];

export const KIND_TAG: Record<FigureKind, SchemaTag> = {
  convergence: "vkgap-1",
  moments: "vkmom-1",
  trace: "vktrace-1",
};

const KIND_LABELS: Record<FigureKind, { x: string; y: string }> = {
  convergence: { x: "h", y: "energy gap" },
  moments: { x: "h", y: "strain-moment gap" },
  trace: { x: "iteration", y: "scaled energy" },
};

interface Pt {
  x: number;
  y: number;
  clipped: boolean;
}

interface Series {
  name: string;
  pts: Pt[];
}

interface Fit {
  slope: number;
  intercept: number; // in log10 space
  xRange: [number, number];
}

function clipY(x: number, y: number): Pt {
  const clipped = !(y > GAP_FLOOR);
  return { x, y: clipped ? GAP_FLOOR : y, clipped };
}

function seriesFrom(table: Table, kind: FigureKind): Series {
  const name = basename(table.path).replace(/\.[^.]*$/, "");
  let pts: Pt[];
  if (kind === "convergence") {
    pts = table.rows.map((r) => clipY(num(table, r, "h"), num(table, r, "gap_abs")));
  } else if (kind === "moments") {
    pts = table.rows.map((r) => clipY(num(table, r, "h"), num(table, r, "moment_gap")));
  } else {
    pts = table.rows.map((r) => clipY(num(table, r, "iter"), num(table, r, "energy")));
  }
  if (kind !== "trace") {
    pts = [...pts].sort((a, b) => a.x - b.x);
    for (const p of pts) {
      if (!(p.x > 0)) {
        throw new SchemaError(`${table.path}: nonpositive h ${p.x} on a log axis`);
      }
    }
  }
  return { name, pts };
}

// Least-squares slope of log10(y) vs log10(x), excluding the coarsest level
// (largest x), which sits outside the asymptotic regime.
export function fitSlope(pts: Pt[]): Fit | null {
  const xmax = Math.max(...pts.map((p) => p.x));
  const keep = pts.filter((p) => p.x < xmax);
  if (keep.length < 2) return null;
  const lx = keep.map((p) => Math.log10(p.x));
  const ly = keep.map((p) => Math.log10(p.y));
  const n = keep.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx === 0) return null;
  const slope = sxy / sxx;
  return {
    slope,
    intercept: my - slope * mx,
    xRange: [Math.min(...keep.map((p) => p.x)), Math.max(...keep.map((p) => p.x))],
  };
}

function px(v: number): string {
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

type Scale = ScaleContinuousNumeric<number, number>;

function makeScale(values: number[], log: boolean, range: [number, number]): Scale {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (log) {
    if (lo === hi) {
      lo /= 10;
      hi *= 10;
    } else {
      lo /= 1.25;
      hi *= 1.25;
    }
    return scaleLog().domain([lo, hi]).range(range);
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  } else {
    const pad = 0.03 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return scaleLinear().domain([lo, hi]).range(range);
}

function axisParts(scale: Scale, vertical: boolean): string[] {
  const ticks = scale.ticks(8);
  const fmt = scale.tickFormat(8, "~g");
  const parts: string[] = [];
  for (const t of ticks) {
    const p = scale(t);
    const label = fmt(t);
    if (vertical) {
      parts.push(`<line x1="${px(X0)}" y1="${px(p)}" x2="${px(X1)}" y2="${px(p)}" stroke="#dddddd"/>`);
      if (label !== "") {
        parts.push(`<text x="${px(X0 - 8)}" y="${px(p + 4)}" text-anchor="end">${esc(label)}</text>`);
      }
    } else {
      parts.push(`<line x1="${px(p)}" y1="${px(Y0)}" x2="${px(p)}" y2="${px(Y1)}" stroke="#dddddd"/>`);
      if (label !== "") {
        parts.push(`<text x="${px(p)}" y="${px(Y0 + 18)}" text-anchor="middle">${esc(label)}</text>`);
      }
    }
  }
  return parts;
}

function pathOf(pts: Pt[], xs: Scale, ys: Scale): string {
  return pts
    .map((p, i) => `${i === 0 ? "M" : "L"}${px(xs(p.x))},${px(ys(p.y))}`)
    .join("");
}

export function renderFigure(spec: FigureSpec): string {
  const kind = spec.kind;
  const tables = inputPaths(spec).map((p) => readTable(p, KIND_TAG[kind]));
  const series = tables.map((t) => seriesFrom(t, kind));

  const allPts = series.flatMap((s) => s.pts);
  const logX = kind !== "trace";
  const xs = makeScale(allPts.map((p) => p.x), logX, [X0, X1]);
  const ys = makeScale(allPts.map((p) => p.y), true, [Y0, Y1]);

  const fits: (Fit | null)[] =
    kind !== "trace" && spec.fit ? series.map((s) => fitSlope(s.pts)) : series.map(() => null);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif" font-size="12">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  parts.push(...axisParts(xs, false));
  parts.push(...axisParts(ys, true));
  parts.push(
    `<rect x="${px(X0)}" y="${px(Y1)}" width="${px(X1 - X0)}" height="${px(Y0 - Y1)}" ` +
      `fill="none" stroke="#333333"/>`);

  const xlabel = spec.xlabel ?? KIND_LABELS[kind].x;
  const ylabel = spec.ylabel ?? KIND_LABELS[kind].y;
  parts.push(
    `<text x="${px((X0 + X1) / 2)}" y="${px(HEIGHT - 12)}" text-anchor="middle">${esc(xlabel)}</text>`);
  parts.push(
    `<text x="18" y="${px((Y0 + Y1) / 2)}" text-anchor="middle" ` +
      `transform="rotate(-90 18 ${px((Y0 + Y1) / 2)})">${esc(ylabel)}</text>`);

  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    parts.push(`<g data-series="${esc(s.name)}">`);
    parts.push(`<path d="${pathOf(s.pts, xs, ys)}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    if (s.pts.length <= 60) {
      for (const p of s.pts) {
        const fill = p.clipped ? "#ffffff" : color;
        parts.push(
          `<circle cx="${px(xs(p.x))}" cy="${px(ys(p.y))}" r="3" fill="${fill}" stroke="${color}"/>`);
      }
    }
    const fit = fits[i];
    if (fit) {
      const [a, b] = fit.xRange;
      const ya = Math.pow(10, fit.intercept + fit.slope * Math.log10(a));
      const yb = Math.pow(10, fit.intercept + fit.slope * Math.log10(b));
      parts.push(
        `<line x1="${px(xs(a))}" y1="${px(ys(ya))}" x2="${px(xs(b))}" y2="${px(ys(yb))}" ` +
          `stroke="${color}" stroke-dasharray="5,4"/>`);
    }
    parts.push(`</g>`);
  });

  let anchorY = Y1 + 18;
  fits.forEach((fit, i) => {
    if (!fit) return;
    const label =
      series.length > 1
        ? `${series[i].name}: slope ≈ ${fit.slope.toFixed(2)}`
        : `slope ≈ ${fit.slope.toFixed(2)}`;
    parts.push(
      `<text x="${px(X0 + 10)}" y="${px(anchorY)}" ` +
        `data-slope="${fit.slope.toPrecision(12)}">${esc(label)}</text>`);
    anchorY += 16;
  });

  if (series.length > 1) {
    series.forEach((s, i) => {
      const color = COLORS[i % COLORS.length];
      const y = anchorY + 16 * i;
      parts.push(
        `<line x1="${px(X0 + 10)}" y1="${px(y - 4)}" x2="${px(X0 + 34)}" y2="${px(y - 4)}" ` +
          `stroke="${color}" stroke-width="1.5"/>`);
      parts.push(`<text x="${px(X0 + 40)}" y="${px(y)}">${esc(s.name)}</text>`);
    });
  }

  parts.push(`</svg>`);
  return parts.join("\n") + "\n";
}

export function renderToFile(spec: FigureSpec): string {
  const svg = renderFigure(spec);
  const dir = dirname(spec.output);
  if (dir !== "") {
    mkdirSync(dir, { recursive: true });
  }
  writeFileSync(spec.output, svg, "utf8");
  return spec.output;
}
