/**
 * The three study figures, rendered straight from the CSV artifacts:
 *
 *   tracking         y(t) overlaid on y_ref(t) over the plotted interval
 *   error-integrals  sliding error integrals I(t) (optionally log-y)
 *   boundary-surface space-time heatmap of the state on the observation edge
 *
 * Pure file-to-file transforms; no numerical post-processing beyond axis
 * scaling. All numbers come from the producing pipeline.
 */

import { writeFileSync } from "fs";

import { column, loadCsv, prefixedColumns } from "./csv.js";
import {
  DEFAULT_FRAME,
  Frame,
  axes,
  extent,
  heatColor,
  linearScale,
  logScale,
  logTicks,
  polyline,
  svgDocument,
} from "./svg.js";

export type FigureKind = "tracking" | "error-integrals" | "boundary-surface";

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];
  output: string;
  logY?: boolean;
}

function plotArea(frame: Frame): { sxRange: [number, number]; syRange: [number, number] } {
  return {
    sxRange: [frame.margin.left, frame.width - frame.margin.right],
    syRange: [frame.height - frame.margin.bottom, frame.margin.top],
  };
}

function padded([lo, hi]: [number, number], frac = 0.06): [number, number] {
  const pad = (hi - lo) * frac;
  return [lo - pad, hi + pad];
}

export function renderTracking(input: string, output: string): void {
  const table = loadCsv(input);
  const t = column(table, "t", input);
  const y = column(table, "y", input);
  const yref = column(table, "y_ref", input);
  const frame = DEFAULT_FRAME;
  const { sxRange, syRange } = plotArea(frame);
  const sx = linearScale(extent(t), sxRange);
  const sy = linearScale(padded(extent([...y, ...yref])), syRange);
  const body = [
    axes(sx, sy, frame, "t", "output"),
    `<polyline points="${polyline(t, yref, sx, sy)}" fill="none" stroke="black" stroke-width="2.2"/>`,
    `<polyline points="${polyline(t, y, sx, sy)}" fill="none" stroke="#d62728" stroke-width="1.4"/>`,
    `<rect x="${frame.width - 200}" y="${frame.margin.top + 6}" width="170" height="44" fill="white" stroke="#999"/>`,
    `<line x1="${frame.width - 190}" y1="${frame.margin.top + 20}" x2="${frame.width - 160}" y2="${frame.margin.top + 20}" stroke="black" stroke-width="2.2"/>`,
    `<text x="${frame.width - 152}" y="${frame.margin.top + 24}" font-size="12">reference</text>`,
    `<line x1="${frame.width - 190}" y1="${frame.margin.top + 38}" x2="${frame.width - 160}" y2="${frame.margin.top + 38}" stroke="#d62728" stroke-width="1.4"/>`,
    `<text x="${frame.width - 152}" y="${frame.margin.top + 42}" font-size="12">output</text>`,
  ].join("\n");
  writeFileSync(output, svgDocument(frame, body, "controlled output vs reference"));
}

export function renderErrorIntegrals(input: string, output: string, logY = false): void {
  const table = loadCsv(input);
  const t = column(table, "t", input);
  const I = column(table, "I", input);
  const frame = DEFAULT_FRAME;
  const { sxRange, syRange } = plotArea(frame);
  const sx = linearScale(extent(t), sxRange);
  let sy;
  let yTicks;
  const positive = I.filter((v) => v > 0);
  if (logY && positive.length >= 2) {
    const dom = extent(positive);
    sy = logScale(dom, syRange);
    yTicks = logTicks(dom);
  } else {
    const dom = padded(extent(I));
    sy = linearScale([Math.min(0, dom[0]), dom[1]], syRange);
    yTicks = undefined;
  }
  const pts = logY ? t.filter((_, i) => I[i] > 0) : t;
  const vals = logY ? I.filter((v) => v > 0) : I;
  const body = [
    axes(sx, sy, frame, "t", "sliding error integral", { yTicks }),
    `<polyline points="${polyline(pts, vals, sx, sy)}" fill="none" stroke="#1f77b4" stroke-width="1.8"/>`,
  ].join("\n");
  writeFileSync(output, svgDocument(frame, body, "sliding error integrals"));
}

export function renderBoundarySurface(input: string, output: string): void {
  const table = loadCsv(input);
  const t = column(table, "t", input);
  const cols = prefixedColumns(table, "xi2_", input);
  const frame: Frame = { ...DEFAULT_FRAME, width: 780 };
  const { sxRange, syRange } = plotArea(frame);
  const sx = linearScale(extent(t), [sxRange[0], sxRange[1] - 70]);
  const sy = linearScale([0, 1], syRange);

  let lo = Infinity;
  let hi = -Infinity;
  for (const c of cols) {
    const [a, b] = extent(c.values);
    lo = Math.min(lo, a);
    hi = Math.max(hi, b);
  }
  if (!(hi > lo)) {
    hi = lo + 1;
  }
  const cells: string[] = [];
  const nT = t.length;
  for (let j = 0; j < nT; j++) {
    const x = sx(t[j]);
    const xNext = sx(t[Math.min(j + 1, nT - 1)]);
    const w = Math.max(xNext - x, 1);
    for (let i = 0; i < cols.length; i++) {
      const y1 = sy(cols[i].coordinate);
      const yHalf = i + 1 < cols.length ? sy(cols[i + 1].coordinate) : y1;
      const h = Math.max(Math.abs(yHalf - y1), 1);
      const v = (cols[i].values[j] - lo) / (hi - lo);
      cells.push(
        `<rect x="${x.toFixed(1)}" y="${Math.min(y1, yHalf).toFixed(1)}" width="${w.toFixed(1)}" height="${h.toFixed(1)}" fill="${heatColor(v)}"/>`,
      );
    }
  }
  // colorbar
  const barX = frame.width - frame.margin.right - 46;
  const barTop = frame.margin.top;
  const barH = frame.height - frame.margin.top - frame.margin.bottom;
  const bar: string[] = [];
  const steps = 48;
  for (let s = 0; s < steps; s++) {
    const yb = barTop + (1 - (s + 1) / steps) * barH;
    bar.push(
      `<rect x="${barX}" y="${yb.toFixed(1)}" width="14" height="${(barH / steps + 0.5).toFixed(1)}" fill="${heatColor(s / (steps - 1))}"/>`,
    );
  }
  bar.push(`<text x="${barX + 18}" y="${barTop + 10}" font-size="11">${hi.toPrecision(3)}</text>`);
  bar.push(`<text x="${barX + 18}" y="${barTop + barH}" font-size="11">${lo.toPrecision(3)}</text>`);

  const body = [
    cells.join("\n"),
    axes(sx, sy, frame, "t", "position along the observation edge"),
    bar.join("\n"),
  ].join("\n");
  writeFileSync(output, svgDocument(frame, body, "state on the observation edge"));
}

export function render(spec: FigureSpec): void {
  if (spec.inputs.length !== 1) {
    throw new Error(`figure kind '${spec.kind}' takes exactly one input CSV, got ${spec.inputs.length}`);
  }
  switch (spec.kind) {
    case "tracking":
      return renderTracking(spec.inputs[0], spec.output);
    case "error-integrals":
      return renderErrorIntegrals(spec.inputs[0], spec.output, spec.logY ?? false);
    case "boundary-surface":
      return renderBoundarySurface(spec.inputs[0], spec.output);
    default:
      throw new Error(`unknown figure kind '${spec.kind}'`);
  }
}
