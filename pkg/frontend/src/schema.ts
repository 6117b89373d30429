// CSV schemas emitted by the simulation CLI, and the figure spec format.

export const RUN_COLUMNS = [
  "t",
  "p_ext",
  "ask",
  "bid",
  "event",
  "d",
  "loss",
  "reward",
] as const;

export const STATS_COLUMNS = [
  "alpha",
  "sigma",
  "lambda",
  "policy",
  "pct_loss_mean",
  "pct_loss_std",
  "spread_mean",
  "middev_mean",
  "seeds",
] as const;

export const FIGURE_KINDS = [
  "overlay",
  "middev",
  "spread",
  "loss_bars",
  "spread_bars",
] as const;

export type FigureKind = (typeof FIGURE_KINDS)[number];

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[]; // CSV paths, resolved relative to the spec file
  out: string; // output image name (.svg), resolved against --out
  smoothing?: number; // centered moving-average window in slots
}

export class SchemaError extends Error {
  constructor(public column: string, detail: string) {
    super(`${detail}: ${column}`);
    this.name = "SchemaError";
  }
}

export class SpecError extends Error {
  constructor(detail: string) {
    super(detail);
    this.name = "SpecError";
  }
}

export function checkColumns(
  found: string[],
  expected: readonly string[],
): void {
  for (const col of expected) {
    if (!found.includes(col)) {
      throw new SchemaError(col, "missing column");
    }
  }
  for (const col of found) {
    if (!expected.includes(col)) {
      throw new SchemaError(col, "unexpected column");
    }
  }
}

export function parseFigureSpecs(raw: unknown): FigureSpec[] {
  if (typeof raw !== "object" || raw === null || !("figures" in raw)) {
    throw new SpecError("spec must be an object with a 'figures' array");
  }
  const figures = (raw as { figures: unknown }).figures;
  if (!Array.isArray(figures) || figures.length === 0) {
    throw new SpecError("'figures' must be a nonempty array");
  }
  return figures.map((f, i) => {
    const fig = f as Partial<FigureSpec>;
    if (!fig.kind || !(FIGURE_KINDS as readonly string[]).includes(fig.kind)) {
      throw new SpecError(`figure ${i}: kind must be one of ${FIGURE_KINDS.join(", ")}`);
    }
    if (!Array.isArray(fig.inputs) || fig.inputs.length === 0) {
      throw new SpecError(`figure ${i}: inputs must be a nonempty array of CSV paths`);
    }
    if (typeof fig.out !== "string" || !fig.out) {
      throw new SpecError(`figure ${i}: out must be an image file name`);
    }
    if (fig.smoothing !== undefined && (!Number.isInteger(fig.smoothing) || fig.smoothing < 1)) {
      throw new SpecError(`figure ${i}: smoothing must be a positive integer`);
    }
    return {
      kind: fig.kind as FigureKind,
      inputs: fig.inputs,
      out: fig.out,
      smoothing: fig.smoothing,
    };
  });
}
