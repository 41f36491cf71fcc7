import { readFileSync } from 'node:fs';
import { parse } from 'csv-parse/sync';

/** One row of a results.csv file produced by the simulator. */
export interface ResultRow {
  experiment: string;
  estimator: string;
  c: number;
  snr_db: number;
  series: string;
  x: number;
  y: number;
  n_packets: number;
  n_errors: number;
  seed: number;
}

export const COLUMNS = [
  'experiment',
  'estimator',
  'c',
  'snr_db',
  'series',
  'x',
  'y',
  'n_packets',
  'n_errors',
  'seed',
] as const;

const NUMERIC = new Set(['c', 'snr_db', 'x', 'y', 'n_packets', 'n_errors', 'seed']);

export function parseResults(text: string): ResultRow[] {
  const records: Record<string, string>[] = parse(text, {
    columns: true,
    skip_empty_lines: true,
    trim: true,
  });
  if (records.length === 0) {
    throw new Error('results file has no data rows');
  }
  for (const col of COLUMNS) {
    if (!(col in records[0])) {
      throw new Error(`results file is missing column "${col}"`);
    }
  }
  return records.map((rec) => {
    const row: Record<string, string | number> = {};
    for (const col of COLUMNS) {
      if (NUMERIC.has(col)) {
        const v = Number(rec[col]);
        if (Number.isNaN(v)) {
          throw new Error(`non-numeric value "${rec[col]}" in column "${col}"`);
        }
        row[col] = v;
      } else {
        row[col] = rec[col];
      }
    }
    return row as unknown as ResultRow;
  });
}

export function loadResults(path: string): ResultRow[] {
  return parseResults(readFileSync(path, 'utf8'));
}

/**
 * Group rows by the given label fields, preserving first-seen order.
 * The label joins field values, prefixing non-estimator fields with the
 * field name so "proposed c=2.5" stays readable.
 */
export function groupRows(
  rows: ResultRow[],
  fields: (keyof ResultRow)[],
): Map<string, ResultRow[]> {
  const out = new Map<string, ResultRow[]>();
  for (const row of rows) {
    const label = fields
      .map((f) => (f === 'estimator' ? String(row[f]) : `${f}=${row[f]}`))
      .join(' ');
    const bucket = out.get(label);
    if (bucket) {
      bucket.push(row);
    } else {
      out.set(label, [row]);
    }
  }
  return out;
}
