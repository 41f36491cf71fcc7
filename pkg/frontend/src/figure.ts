/** Minimal deterministic SVG line-figure assembly: no timestamps, no
 * randomness, fixed float formatting, so byte-identical inputs yield
 * byte-identical images. */

export interface Point {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  points: Point[];
  dashed?: boolean;
}

export interface FigureSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  yScale: 'linear' | 'log';
  yDomain?: [number, number];
}

export const WIDTH = 720;
export const HEIGHT = 480;
const MARGIN = { left: 76, right: 24, top: 44, bottom: 58 };
const FONT = 'DejaVu Sans';

// Okabe-Ito palette; distinguishable in grayscale together with the markers
export const PALETTE = ['#0072b2', '#d55e00', '#009e73', '#cc79a7', '#e69f00', '#56b4e9'];

export function fmt(v: number): string {
  if (v === 0) return '0';
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(1).replace('e-', 'e-').replace('e+', 'e');
  }
  const s = v.toPrecision(4);
  return s.includes('.') ? s.replace(/\.?0+$/, '') : s;
}

const px = (v: number): string => v.toFixed(2);

/** Tick positions covering [lo, hi] at a 1/2/5 step, at most ~7 ticks. */
export function linearTicks(lo: number, hi: number): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step0 = Math.pow(10, Math.floor(Math.log10(span / 5)));
  let step = step0;
  for (const m of [1, 2, 5, 10]) {
    step = m * step0;
    if (span / step <= 7) break;
  }
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return ticks;
}

/** Decade ticks spanning [lo, hi], lo > 0. */
export function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks;
}

function markerPath(shape: number, cx: number, cy: number, r: number): string {
  switch (shape % 4) {
    case 0:
      return `<circle cx="${px(cx)}" cy="${px(cy)}" r="${px(r)}"/>`;
    case 1:
      return `<rect x="${px(cx - r)}" y="${px(cy - r)}" width="${px(2 * r)}" height="${px(2 * r)}"/>`;
    case 2:
      return `<path d="M ${px(cx)} ${px(cy - 1.2 * r)} L ${px(cx + 1.1 * r)} ${px(cy + r)} L ${px(cx - 1.1 * r)} ${px(cy + r)} Z"/>`;
    default:
      return `<path d="M ${px(cx)} ${px(cy - 1.3 * r)} L ${px(cx + 1.3 * r)} ${px(cy)} L ${px(cx)} ${px(cy + 1.3 * r)} L ${px(cx - 1.3 * r)} ${px(cy)} Z"/>`;
  }
}

function esc(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export function renderFigure(spec: FigureSpec): string {
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const innerH = HEIGHT - MARGIN.top - MARGIN.bottom;

  const pts = spec.series.flatMap((s) => s.points);
  if (pts.length === 0) {
    throw new Error(`figure "${spec.title}" has no points to draw`);
  }
  let xLo = Math.min(...pts.map((p) => p.x));
  let xHi = Math.max(...pts.map((p) => p.x));
  if (xLo === xHi) {
    xLo -= 1;
    xHi += 1;
  }
  let yLo: number;
  let yHi: number;
  if (spec.yDomain) {
    [yLo, yHi] = spec.yDomain;
  } else {
    yLo = Math.min(...pts.map((p) => p.y));
    yHi = Math.max(...pts.map((p) => p.y));
    if (spec.yScale === 'linear') {
      const pad = (yHi - yLo || 1) * 0.06;
      yLo -= pad;
      yHi += pad;
    } else {
      yLo /= 2;
      yHi *= 2;
    }
  }

  const sx = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo)) * innerW;
  const sy =
    spec.yScale === 'log'
      ? (y: number) =>
          MARGIN.top + innerH - ((Math.log10(y) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo))) * innerH
      : (y: number) => MARGIN.top + innerH - ((y - yLo) / (yHi - yLo)) * innerH;

  const xTicks = linearTicks(xLo, xHi);
  const yTicks = spec.yScale === 'log' ? logTicks(yLo, yHi) : linearTicks(yLo, yHi);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(`<g font-family="${FONT}" font-size="13" fill="#222">`);

  // grid + ticks
  for (const t of xTicks) {
    const x = sx(t);
    parts.push(`<line x1="${px(x)}" y1="${MARGIN.top}" x2="${px(x)}" y2="${MARGIN.top + innerH}" stroke="#ddd"/>`);
    parts.push(
      `<text x="${px(x)}" y="${MARGIN.top + innerH + 20}" text-anchor="middle">${esc(fmt(t))}</text>`,
    );
  }
  for (const t of yTicks) {
    if (t < yLo || t > yHi) continue;
    const y = sy(t);
    parts.push(`<line x1="${MARGIN.left}" y1="${px(y)}" x2="${MARGIN.left + innerW}" y2="${px(y)}" stroke="#ddd"/>`);
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${px(y + 4)}" text-anchor="end">${esc(fmt(t))}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" fill="none" stroke="#444"/>`,
  );

  // series
  spec.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const coords = s.points.map((p) => `${px(sx(p.x))},${px(sy(p.y))}`);
    const dash = s.dashed ? ' stroke-dasharray="7 4"' : '';
    if (coords.length > 1) {
      parts.push(
        `<polyline points="${coords.join(' ')}" fill="none" stroke="${color}" stroke-width="1.8"${dash}/>`,
      );
    }
    parts.push(`<g fill="${color}">`);
    for (const p of s.points) {
      parts.push(markerPath(i, sx(p.x), sy(p.y), 3.6));
    }
    parts.push('</g>');
  });

  // legend, top-right inside the frame
  const legendX = MARGIN.left + innerW - 8;
  spec.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const y = MARGIN.top + 16 + 19 * i;
    const dash = s.dashed ? ' stroke-dasharray="7 4"' : '';
    parts.push(
      `<line x1="${px(legendX - 150)}" y1="${px(y - 4)}" x2="${px(legendX - 118)}" y2="${px(y - 4)}" stroke="${color}" stroke-width="1.8"${dash}/>`,
    );
    parts.push(`<g fill="${color}">${markerPath(i, legendX - 134, y - 4, 3.6)}</g>`);
    parts.push(`<text x="${px(legendX - 110)}" y="${px(y)}">${esc(s.label)}</text>`);
  });

  // labels
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="24" text-anchor="middle" font-size="16">${esc(spec.title)}</text>`,
  );
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="${HEIGHT - 14}" text-anchor="middle">${esc(spec.xLabel)}</text>`,
  );
  parts.push(
    `<text x="20" y="${MARGIN.top + innerH / 2}" text-anchor="middle" transform="rotate(-90 20 ${MARGIN.top + innerH / 2})">${esc(spec.yLabel)}</text>`,
  );
  parts.push('</g></svg>');
  return parts.join('\n');
}
