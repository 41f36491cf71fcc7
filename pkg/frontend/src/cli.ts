#!/usr/bin/env node
import { writeFileSync } from 'node:fs';
import { pathToFileURL } from 'node:url';
import { Command } from 'commander';

import { loadResults, type ResultRow } from './csv.js';
import { buildFigure, KINDS, type Kind } from './kinds.js';
import { svgToPng } from './render.js';

export function runCli(argv: string[]): number {
  const program = new Command();
  let code = 0;
  program
    .name('plot')
    .description('Render a figure from a simulator results.csv')
    .requiredOption('--kind <kind>', `figure kind: ${KINDS.join(' | ')}`)
    .requiredOption('--in <file>', 'results.csv to read')
    .requiredOption('--out <file>', 'output image (.svg or .png)')
    .option('--group <fields>', 'comma-separated row fields labelling the curves', 'estimator')
    .exitOverride()
    .configureOutput({ writeErr: (s) => process.stderr.write(s) });

  try {
    program.parse(argv, { from: 'user' });
    const opts = program.opts<{ kind: string; in: string; out: string; group: string }>();
    if (!(KINDS as readonly string[]).includes(opts.kind)) {
      throw new Error(`unknown kind "${opts.kind}"; expected one of ${KINDS.join(', ')}`);
    }
    const group = opts.group.split(',').map((s) => s.trim()) as (keyof ResultRow)[];
    const svg = buildFigure(opts.kind as Kind, loadResults(opts.in), group);
    if (opts.out.endsWith('.png')) {
      writeFileSync(opts.out, svgToPng(svg));
    } else {
      writeFileSync(opts.out, svg + '\n');
    }
    console.log(`wrote ${opts.out}`);
  } catch (err) {
    if (err instanceof Error && 'exitCode' in err) {
      // commander already printed usage or help text
      code = (err as { exitCode: number }).exitCode === 0 ? 0 : 2;
    } else {
      console.error(`plot: ${err instanceof Error ? err.message : err}`);
      code = 2;
    }
  }
  return code;
}

if (import.meta.url === pathToFileURL(process.argv[1] ?? '').href) {
  process.exit(runCli(process.argv.slice(2)));
}
