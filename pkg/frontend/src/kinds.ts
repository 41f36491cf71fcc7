import { groupRows, type ResultRow } from './csv.js';
import { fmt, renderFigure, WIDTH, type Series } from './figure.js';

export const KINDS = ['per', 'exit', 'mse', 'corr'] as const;
export type Kind = (typeof KINDS)[number];

const byX = (rows: ResultRow[]) => [...rows].sort((a, b) => a.x - b.x);

/** Packet error rate vs SNR, log y.  Zero-error points cannot sit on a log
 * axis; they are floored at half of one error in the packet budget, which
 * keeps censored points visible at the bottom of the figure. */
function perFigure(rows: ResultRow[], group: (keyof ResultRow)[]): string {
  const per = rows.filter((r) => r.series === 'per');
  if (per.length === 0) throw new Error('no "per" series rows in the input');
  const series: Series[] = [];
  for (const [label, bucket] of groupRows(per, group)) {
    series.push({
      label,
      points: byX(bucket).map((r) => ({
        x: r.x,
        y: r.y > 0 ? r.y : 0.5 / Math.max(r.n_packets, 1),
      })),
    });
  }
  return renderFigure({
    title: 'Packet error rate',
    xLabel: 'SNR (dB)',
    yLabel: 'PER',
    series,
    yScale: 'log',
  });
}

function exitFigure(rows: ResultRow[], group: (keyof ResultRow)[]): string {
  const mi = rows.filter((r) => r.series === 'mi_in' || r.series === 'mi_out');
  if (mi.length === 0) throw new Error('no "mi_in"/"mi_out" series rows in the input');
  const multi = groupRows(mi, group).size > 1;
  const series: Series[] = [];
  for (const [label, bucket] of groupRows(mi, group)) {
    for (const name of ['mi_out', 'mi_in'] as const) {
      const sub = bucket.filter((r) => r.series === name);
      if (sub.length === 0) continue;
      series.push({
        label: multi ? `${label} ${name}` : name === 'mi_out' ? 'demapper out' : 'demapper in',
        points: byX(sub).map((r) => ({ x: r.x, y: r.y })),
        dashed: name === 'mi_in',
      });
    }
  }
  return renderFigure({
    title: 'Mutual information per pipeline stage',
    xLabel: 'stage',
    yLabel: 'mutual information (bits)',
    series,
    yScale: 'linear',
    yDomain: [0, 1.05],
  });
}

function mseFigure(rows: ResultRow[], _group: (keyof ResultRow)[]): string {
  const meas = rows.filter((r) => r.series === 'mse_openloop');
  const pred = rows.filter((r) => r.series === 'mse_openloop_pred');
  if (meas.length === 0) throw new Error('no "mse_openloop" series rows in the input');
  const series: Series[] = [
    { label: 'measured', points: byX(meas).map((r) => ({ x: r.x, y: r.y })) },
    { label: 'predicted', points: byX(pred).map((r) => ({ x: r.x, y: r.y })), dashed: true },
  ];
  return renderFigure({
    title: 'Channel estimate MSE, open loop',
    xLabel: 'feedback rows absorbed',
    yLabel: 'MSE',
    series: pred.length ? series : series.slice(0, 1),
    yScale: 'log',
  });
}

// viridis-like three-stop ramp, interpolated in sRGB
const RAMP: [number, number, number][] = [
  [68, 1, 84],
  [33, 145, 140],
  [253, 231, 37],
];

function rampColor(t: number): string {
  const u = Math.max(0, Math.min(1, t));
  const seg = u < 0.5 ? 0 : 1;
  const f = (u - 0.5 * seg) * 2;
  const rgb = RAMP[seg].map((a, i) => Math.round(a + (RAMP[seg + 1][i] - a) * f));
  return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
}

function heatCell(x: number, y: number, size: number, value: number, vmax: number): string {
  const t = vmax > 0 ? value / vmax : 0;
  const textColor = t > 0.6 ? '#222' : 'white';
  return (
    `<rect x="${x}" y="${y}" width="${size}" height="${size}" fill="${rampColor(t)}" stroke="white"/>` +
    `<text x="${x + size / 2}" y="${y + size / 2 + 4}" text-anchor="middle" fill="${textColor}" font-size="11">${fmt(value)}</text>`
  );
}

/** Side-by-side lag-correlation matrices before and after puncturing. */
function corrFigure(rows: ResultRow[], _group: (keyof ResultRow)[]): string {
  const pre = byX(rows.filter((r) => r.series === 'corr_pre'));
  const post = byX(rows.filter((r) => r.series === 'corr_post'));
  if (pre.length === 0 || pre.length !== post.length) {
    throw new Error('input needs matching "corr_pre" and "corr_post" series');
  }
  const n = Math.round(Math.sqrt(pre.length));
  if (n * n !== pre.length) throw new Error(`corr series length ${pre.length} is not square`);
  const meanPre = rows.find((r) => r.series === 'corr_mean_pre')?.y;
  const meanPost = rows.find((r) => r.series === 'corr_mean_post')?.y;
  const vmax = Math.max(...pre.map((r) => r.y), ...post.map((r) => r.y));

  const cell = Math.min(52, Math.floor(260 / n));
  const gridW = cell * n;
  const height = gridW + 150;
  const x0 = { pre: 70, post: 70 + gridW + 70 };
  const y0 = 64;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${height}" viewBox="0 0 ${WIDTH} ${height}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${height}" fill="white"/>`);
  parts.push('<g font-family="DejaVu Sans" font-size="13" fill="#222">');
  parts.push(
    `<text x="${WIDTH / 2}" y="26" text-anchor="middle" font-size="16">Lag-2 innovation correlation, window slot pairs</text>`,
  );
  for (const [name, mat, ox, mean] of [
    ['before puncturing', pre, x0.pre, meanPre],
    ['after puncturing', post, x0.post, meanPost],
  ] as const) {
    parts.push(`<text x="${ox + gridW / 2}" y="${y0 - 10}" text-anchor="middle">${name}</text>`);
    for (const r of mat) {
      const i = Math.floor(r.x / n);
      const j = r.x % n;
      parts.push(heatCell(ox + j * cell, y0 + i * cell, cell, r.y, vmax));
    }
    if (mean !== undefined) {
      parts.push(
        `<text x="${ox + gridW / 2}" y="${y0 + gridW + 24}" text-anchor="middle">mean ${fmt(mean)}</text>`,
      );
    }
  }
  // shared color scale
  const barY = y0 + gridW + 46;
  for (let k = 0; k < 200; k++) {
    parts.push(
      `<rect x="${70 + k * 2}" y="${barY}" width="2" height="12" fill="${rampColor(k / 199)}"/>`,
    );
  }
  parts.push(`<text x="70" y="${barY + 28}">0</text>`);
  parts.push(`<text x="${70 + 400}" y="${barY + 28}" text-anchor="end">${fmt(vmax)}</text>`);
  parts.push('</g></svg>');
  return parts.join('\n');
}

export function buildFigure(kind: Kind, rows: ResultRow[], group: (keyof ResultRow)[]): string {
  switch (kind) {
    case 'per':
      return perFigure(rows, group);
    case 'exit':
      return exitFigure(rows, group);
    case 'mse':
      return mseFigure(rows, group);
    case 'corr':
      return corrFigure(rows, group);
  }
}
