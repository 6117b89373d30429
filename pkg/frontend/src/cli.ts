#!/usr/bin/env node
import { readFileSync } from "node:fs";
import { dirname, resolve } from "node:path";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { renderFigures } from "./render.js";
import { SchemaError, SpecError, parseFigureSpecs } from "./schema.js";

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .option("spec", {
      type: "string",
      demandOption: true,
      describe: "JSON figure spec ({figures: [{kind, inputs, out, smoothing?}]})",
    })
    .option("out", {
      type: "string",
      demandOption: true,
      describe: "output directory for rendered SVGs",
    })
    .strict()
    .parse();

  try {
    const specPath = resolve(args.spec);
    const specs = parseFigureSpecs(JSON.parse(readFileSync(specPath, "utf-8")));
    const shapes = renderFigures(specs, dirname(specPath), resolve(args.out));
    for (const [i, s] of shapes.entries()) {
      const extra =
        s.groups !== undefined ? ` groups=${s.groups} bars=${s.barsPerGroup}` : "";
      console.log(`${specs[i].out}: kind=${s.kind} series=${s.series} points=${s.points}${extra}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof SpecError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    console.error(`runtime error: ${(err as Error).message}`);
    return 2;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isDirectRun) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
