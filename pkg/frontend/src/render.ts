import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, join, resolve } from "node:path";
import * as echarts from "echarts";

import {
  buildLossBars,
  buildMiddev,
  buildOverlay,
  buildSpread,
  buildSpreadBars,
  type BuiltChart,
  type ChartShape,
} from "./charts.js";
import { loadRunCsv, loadStatsCsv } from "./csv.js";
import type { FigureSpec } from "./schema.js";

export const WIDTH = 900;
export const HEIGHT = 540;

export function buildFigure(spec: FigureSpec, baseDir: string): BuiltChart {
  const input = resolve(baseDir, spec.inputs[0]);
  const window = spec.smoothing ?? 100;
  switch (spec.kind) {
    case "overlay":
      return buildOverlay(loadRunCsv(input));
    case "middev":
      return buildMiddev(loadRunCsv(input), window);
    case "spread":
      return buildSpread(loadRunCsv(input), window);
    case "loss_bars":
      return buildLossBars(spec.inputs.flatMap((p) => loadStatsCsv(resolve(baseDir, p))));
    case "spread_bars":
      return buildSpreadBars(spec.inputs.flatMap((p) => loadStatsCsv(resolve(baseDir, p))));
  }
}

/** Server-side SVG render: fixed size, no animation, no timestamps. */
export function renderSvg(chart: BuiltChart): string {
  const instance = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: WIDTH,
    height: HEIGHT,
  });
  instance.setOption(chart.option);
  const svg = instance.renderToSVGString();
  instance.dispose();
  return svg;
}

export function renderFigures(
  specs: FigureSpec[],
  baseDir: string,
  outDir: string,
): ChartShape[] {
  mkdirSync(outDir, { recursive: true });
  const shapes: ChartShape[] = [];
  for (const spec of specs) {
    const built = buildFigure(spec, baseDir);
    const path = join(outDir, spec.out);
    mkdirSync(dirname(path), { recursive: true });
    writeFileSync(path, renderSvg(built), "utf-8");
    shapes.push(built.shape);
  }
  return shapes;
}
