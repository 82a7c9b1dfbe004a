#!/usr/bin/env node
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { SpecError, loadSpec } from "./figure.js";
import { SchemaError } from "./schema.js";
import { renderToFile } from "./render.js";

export function runRender(specPath: string): number {
  try {
    const spec = loadSpec(specPath);
    const out = renderToFile(spec);
    console.log(`wrote ${out}`);
    return 0;
  } catch (e) {
    if (e instanceof SpecError || e instanceof SchemaError) {
      console.error(e.message);
      return 1;
    }
    if (e instanceof Error && "code" in e && e.code === "ENOENT") {
      console.error(e.message);
      return 1;
    }
    throw e;
  }
}

yargs(hideBin(process.argv))
  .scriptName("render")
  .command(
    ["render", "$0"],
    "render a figure from harness CSV output",
    (y) =>
      y.option("spec", {
        type: "string",
        demandOption: true,
        describe: "JSON figure spec (input, kind, output, labels, fit)",
      }),
    (argv) => {
      process.exitCode = runRender(argv.spec);
    },
  )
  .strict()
  .help()
  .parse();
