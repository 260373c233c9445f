#!/usr/bin/env node
/** CLI: chamsim-figures --csv <in.csv> --kind <figure kind> --out <out.svg> */
import { parseArgs } from "node:util";
import { FIGURE_KINDS } from "./charts.js";
import { SchemaError } from "./csv.js";
import { render } from "./render.js";

export function main(argv: string[]): number {
  let values: { csv?: string; kind?: string; out?: string; help?: boolean };
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        csv: { type: "string" },
        kind: { type: "string" },
        out: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
    }));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  if (values.help || !values.csv || !values.kind || !values.out) {
    console.error(
      `usage: chamsim-figures --csv <experiment.csv> --kind <${FIGURE_KINDS.join("|")}> --out <figure.svg>`,
    );
    return values.help ? 0 : 2;
  }
  try {
    render({ csvPath: values.csv, figureKind: values.kind as never, outputPath: values.out });
    console.log(`wrote ${values.out}`);
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return err instanceof SchemaError ? 2 : 3;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
