import { createRequire } from 'node:module';
import { Resvg } from '@resvg/resvg-js';

const require = createRequire(import.meta.url);

// Bundled face only: system fonts vary by host and would break byte-stable
// rendering.
let fontFile: string | undefined;
for (const candidate of [
  'dejavu-fonts-ttf/ttf/DejaVuSans.ttf',
  'dejavu-fonts-ttf/fonts/DejaVuSans.ttf',
]) {
  try {
    fontFile = require.resolve(candidate);
    break;
  } catch {
    // try the next layout
  }
}

export function svgToPng(svg: string): Buffer {
  if (!fontFile) {
    throw new Error('bundled DejaVuSans.ttf not found; reinstall dependencies');
  }
  const resvg = new Resvg(svg, {
    background: 'white',
    font: {
      loadSystemFonts: false,
      fontFiles: [fontFile],
      defaultFontFamily: 'DejaVu Sans',
    },
  });
  return Buffer.from(resvg.render().asPng());
}
