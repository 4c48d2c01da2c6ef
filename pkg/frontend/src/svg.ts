/** Minimal SVG plotting primitives: linear/log scales, ticks, axes, paths. */

export interface Scale {
  (v: number): number;
  domain: [number, number];
  range: [number, number];
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const f = ((v: number) => r0 + ((v - d0) / span) * (r1 - r0)) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

export function logScale(domain: [number, number], range: [number, number]): Scale {
  const lo = Math.log10(domain[0]);
  const hi = Math.log10(domain[1]);
  const inner = linearScale([lo, hi], range);
  const f = ((v: number) => inner(Math.log10(v))) as Scale;
  f.domain = domain;
  f.range = range;
  return f;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

export function ticks(domain: [number, number], count = 6): number[] {
  const [lo, hi] = domain;
  const span = hi - lo;
  if (span <= 0) return [lo];
  const step0 = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = (span / count) / step0;
  const step = step0 * (err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1);
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function logTicks(domain: [number, number]): number[] {
  const lo = Math.ceil(Math.log10(domain[0]) - 1e-9);
  const hi = Math.floor(Math.log10(domain[1]) + 1e-9);
  const out: number[] = [];
  for (let e = lo; e <= hi; e++) out.push(Math.pow(10, e));
  return out.length >= 2 ? out : [domain[0], domain[1]];
}

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

export function polyline(xs: number[], ys: number[], sx: Scale, sy: Scale): string {
  const pts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    const x = sx(xs[i]);
    const y = sy(ys[i]);
    if (Number.isFinite(x) && Number.isFinite(y)) {
      pts.push(`${x.toFixed(2)},${y.toFixed(2)}`);
    }
  }
  return pts.join(" ");
}

export interface Frame {
  width: number;
  height: number;
  margin: { top: number; right: number; bottom: number; left: number };
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 440,
  margin: { top: 28, right: 24, bottom: 52, left: 72 },
};

export function axes(
  sx: Scale,
  sy: Scale,
  frame: Frame,
  xLabel: string,
  yLabel: string,
  opts: { xTicks?: number[]; yTicks?: number[] } = {},
): string {
  const { width, height, margin } = frame;
  const x0 = margin.left;
  const x1 = width - margin.right;
  const y0 = height - margin.bottom;
  const y1 = margin.top;
  const parts: string[] = [];
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
  for (const t of opts.xTicks ?? ticks(sx.domain)) {
    const x = sx(t);
    if (x < x0 - 0.5 || x > x1 + 0.5) continue;
    parts.push(`<line x1="${x.toFixed(2)}" y1="${y0}" x2="${x.toFixed(2)}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${x.toFixed(2)}" y="${y0 + 20}" text-anchor="middle" font-size="12">${fmt(t)}</text>`,
    );
  }
  for (const t of opts.yTicks ?? ticks(sy.domain)) {
    const y = sy(t);
    if (y > y0 + 0.5 || y < y1 - 0.5) continue;
    parts.push(`<line x1="${x0 - 5}" y1="${y.toFixed(2)}" x2="${x0}" y2="${y.toFixed(2)}" stroke="black"/>`);
    parts.push(
      `<text x="${x0 - 9}" y="${(y + 4).toFixed(2)}" text-anchor="end" font-size="12">${fmt(t)}</text>`,
    );
  }
  const cx = (x0 + x1) / 2;
  const cy = (y0 + y1) / 2;
  parts.push(`<text x="${cx}" y="${height - 12}" text-anchor="middle" font-size="14">${xLabel}</text>`);
  parts.push(
    `<text x="18" y="${cy}" text-anchor="middle" font-size="14" transform="rotate(-90 18 ${cy})">${yLabel}</text>`,
  );
  return parts.join("\n");
}

export function svgDocument(frame: Frame, body: string, title: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${frame.width}" height="${frame.height}" viewBox="0 0 ${frame.width} ${frame.height}">`,
    `<rect width="${frame.width}" height="${frame.height}" fill="white"/>`,
    `<title>${title}</title>`,
    body,
    `</svg>`,
    "",
  ].join("\n");
}

/** Five-stop blue->yellow colormap over [0, 1]. */
export function heatColor(t: number): string {
  const stops: [number, number, number][] = [
    [38, 20, 120],
    [60, 90, 200],
    [42, 168, 170],
    [120, 210, 80],
    [250, 230, 50],
  ];
  const x = Math.min(1, Math.max(0, t)) * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(x));
  const f = x - i;
  const c = stops[i].map((a, j) => Math.round(a + f * (stops[i + 1][j] - a)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}
