// Builds echarts options (and a shape summary for tests) for each figure kind.
import type { EChartsOption } from "echarts";

import { smooth, type RunRow, type StatsRow } from "./csv.js";
import type { FigureKind } from "./schema.js";

export interface ChartShape {
  kind: FigureKind;
  series: number;
  points: number;
  groups?: number;
  barsPerGroup?: number;
}

export interface BuiltChart {
  option: EChartsOption;
  shape: ChartShape;
}

const BASE: EChartsOption = {
  animation: false,
  backgroundColor: "#ffffff",
  grid: { left: 70, right: 24, top: 48, bottom: 48 },
};

function lineOption(
  title: string,
  xName: string,
  yName: string,
  series: { name: string; points: [number, number][] }[],
): EChartsOption {
  return {
    ...BASE,
    title: { text: title, left: "center" },
    legend: { top: 24 },
    xAxis: { type: "value", name: xName, nameLocation: "middle", nameGap: 28 },
    yAxis: { type: "value", name: yName, nameLocation: "middle", nameGap: 48 },
    series: series.map((s) => ({
      name: s.name,
      type: "line",
      showSymbol: false,
      data: s.points,
    })),
  };
}

export function buildOverlay(rows: RunRow[]): BuiltChart {
  const pick = (f: (r: RunRow) => number): [number, number][] =>
    rows.map((r) => [r.t, f(r)]);
  const series = [
    { name: "ask", points: pick((r) => r.ask) },
    { name: "bid", points: pick((r) => r.bid) },
    { name: "external price", points: pick((r) => r.p_ext) },
  ];
  return {
    option: lineOption("Quotes and hidden price", "slot", "price (ticks)", series),
    shape: { kind: "overlay", series: 3, points: rows.length },
  };
}

export function buildMiddev(rows: RunRow[], window = 100): BuiltChart {
  const dev = rows.map((r) => Math.abs((r.ask + r.bid) / 2 - r.p_ext));
  const sm = smooth(dev, window);
  const points: [number, number][] = rows.map((r, i) => [r.t, sm[i]]);
  return {
    option: lineOption(
      "Mid-price deviation",
      "slot",
      `|mid - external| (ticks, ${window}-slot moving average)`,
      [{ name: "mid deviation", points }],
    ),
    shape: { kind: "middev", series: 1, points: rows.length },
  };
}

export function buildSpread(rows: RunRow[], window = 100): BuiltChart {
  const spread = rows.map((r) => r.ask - r.bid);
  const sm = smooth(spread, window);
  const points: [number, number][] = rows.map((r, i) => [r.t, sm[i]]);
  return {
    option: lineOption(
      "Bid-ask spread",
      "slot",
      `ask - bid (ticks, ${window}-slot moving average)`,
      [{ name: "spread", points }],
    ),
    shape: { kind: "spread", series: 1, points: rows.length },
  };
}

function barOption(
  kind: "loss_bars" | "spread_bars",
  rows: StatsRow[],
  value: (r: StatsRow) => number,
  title: string,
  yName: string,
): BuiltChart {
  const sigmas = [...new Set(rows.map((r) => r.sigma))].sort((a, b) => a - b);
  const policies = [...new Set(rows.map((r) => r.policy))].sort();
  const series = policies.map((policy) => ({
    name: policy,
    type: "bar" as const,
    data: sigmas.map((sigma) => {
      const cell = rows.filter((r) => r.sigma === sigma && r.policy === policy);
      if (cell.length === 0) {
        return null;
      }
      // several alpha cells may share a sigma: average them
      return cell.reduce((acc, r) => acc + value(r), 0) / cell.length;
    }),
  }));
  return {
    option: {
      ...BASE,
      title: { text: title, left: "center" },
      legend: { top: 24 },
      xAxis: {
        type: "category",
        data: sigmas.map((s) => `sigma=${s}`),
        name: "jump probability",
        nameLocation: "middle",
        nameGap: 28,
      },
      yAxis: { type: "value", name: yName, nameLocation: "middle", nameGap: 48 },
      series,
    },
    shape: {
      kind,
      series: policies.length,
      points: rows.length,
      groups: sigmas.length,
      barsPerGroup: policies.length,
    },
  };
}

export function buildLossBars(rows: StatsRow[]): BuiltChart {
  return barOption(
    "loss_bars",
    rows,
    (r) => r.pct_loss_mean,
    "Percent monetary loss per trade",
    "mean % loss per trade",
  );
}

export function buildSpreadBars(rows: StatsRow[]): BuiltChart {
  return barOption(
    "spread_bars",
    rows,
    (r) => r.spread_mean,
    "Mean bid-ask spread",
    "mean spread (ticks)",
  );
}
