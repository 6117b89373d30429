import { readFileSync } from "node:fs";
import Papa from "papaparse";

import { RUN_COLUMNS, STATS_COLUMNS, checkColumns } from "./schema.js";

export interface RunRow {
  t: number;
  p_ext: number;
  ask: number;
  bid: number;
  event: string;
  d: number;
  loss: number;
  reward: number;
}

export interface StatsRow {
  alpha: number;
  sigma: number;
  lambda: number;
  policy: string;
  pct_loss_mean: number;
  pct_loss_std: number;
  spread_mean: number;
  middev_mean: number;
  seeds: number;
}

function parseCsv(path: string): { header: string[]; rows: string[][] } {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new Error(`${path}: ${parsed.errors[0].message}`);
  }
  const [header, ...rows] = parsed.data;
  if (!header) {
    throw new Error(`${path}: empty file`);
  }
  return { header, rows };
}

export function loadRunCsv(path: string): RunRow[] {
  const { header, rows } = parseCsv(path);
  checkColumns(header, RUN_COLUMNS);
  const idx = Object.fromEntries(header.map((h, i) => [h, i]));
  return rows.map((r) => ({
    t: Number(r[idx.t]),
    p_ext: Number(r[idx.p_ext]),
    ask: Number(r[idx.ask]),
    bid: Number(r[idx.bid]),
    event: r[idx.event],
    d: Number(r[idx.d]),
    loss: Number(r[idx.loss]),
    reward: Number(r[idx.reward]),
  }));
}

export function loadStatsCsv(path: string): StatsRow[] {
  const { header, rows } = parseCsv(path);
  checkColumns(header, STATS_COLUMNS);
  const idx = Object.fromEntries(header.map((h, i) => [h, i]));
  return rows.map((r) => ({
    alpha: Number(r[idx.alpha]),
    sigma: Number(r[idx.sigma]),
    lambda: Number(r[idx.lambda]),
    policy: r[idx.policy],
    pct_loss_mean: Number(r[idx.pct_loss_mean]),
    pct_loss_std: Number(r[idx.pct_loss_std]),
    spread_mean: Number(r[idx.spread_mean]),
    middev_mean: Number(r[idx.middev_mean]),
    seeds: Number(r[idx.seeds]),
  }));
}

/** Centered moving average; window is clipped to the series length. */
export function smooth(values: number[], window: number): number[] {
  if (window <= 1 || values.length === 0) {
    return values.slice();
  }
  const w = Math.min(window, values.length);
  const half = Math.floor(w / 2);
  const prefix = [0];
  for (const v of values) {
    prefix.push(prefix[prefix.length - 1] + v);
  }
  return values.map((_, i) => {
    const lo = Math.max(0, i - half);
    const hi = Math.min(values.length, i + half + 1);
    return (prefix[hi] - prefix[lo]) / (hi - lo);
  });
}
