#!/usr/bin/env node
import { mkdirSync, readFileSync, realpathSync, writeFileSync } from "fs";
import { join } from "path";
import { fileURLToPath } from "url";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { EmptyInputError, SchemaMismatchError } from "./csv.js";
import { PANELS, PANEL_NAMES } from "./panels.js";
import { renderPanel } from "./svg.js";

export const EXIT_SCHEMA = 2;
export const EXIT_EMPTY = 3;
export const EXIT_IO = 4;

interface Options {
  in: string;
  out: string;
  panel?: string;
}

export function main(argv: string[]): number {
  const args = yargs(argv)
    .usage("$0 --in [dir] --out [dir] [--panel name]")
    .string("in")
    .describe("in", "Directory holding one CSV bundle per panel")
    .demandOption("in")
    .string("out")
    .describe("out", "Directory the SVG panels are written to")
    .demandOption("out")
    .string("panel")
    .describe("panel", `Render a single panel (${PANEL_NAMES.join(", ")})`)
    .exitProcess(false)
    .fail((msg) => {
      throw new SchemaMismatchError(`usage: ${msg}`);
    })
    .help("help")
    .parseSync() as Options;

  const names = args.panel === undefined ? PANEL_NAMES : [args.panel];
  for (const name of names) {
    if (!(name in PANELS)) {
      throw new SchemaMismatchError(
        `usage: unknown panel '${name}' (expected one of ${PANEL_NAMES.join(", ")})`,
      );
    }
  }

  for (const name of names) {
    const spec = PANELS[name];
    const csvPath = join(args.in, spec.inputCsv);
    let csvText: string;
    try {
      csvText = readFileSync(csvPath, "utf8");
    } catch (exc) {
      throw new Error(`io-error: cannot read ${csvPath}: ${(exc as Error).message}`);
    }
    const svg = renderPanel(spec, csvText);
    const outPath = join(args.out, `${name}.svg`);
    try {
      mkdirSync(args.out, { recursive: true });
      writeFileSync(outPath, svg, "utf8");
    } catch (exc) {
      throw new Error(`io-error: cannot write ${outPath}: ${(exc as Error).message}`);
    }
    console.log(outPath);
  }
  return 0;
}

export function run(argv: string[]): number {
  try {
    return main(argv);
  } catch (exc) {
    const message = (exc as Error).message;
    console.error(`error: ${message}`);
    if (exc instanceof SchemaMismatchError) {
      return EXIT_SCHEMA;
    }
    if (exc instanceof EmptyInputError) {
      return EXIT_EMPTY;
    }
    return EXIT_IO;
  }
}

function invokedDirectly(): boolean {
  if (process.argv[1] === undefined) {
    return false;
  }
  try {
    return realpathSync(process.argv[1]) === fileURLToPath(import.meta.url);
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  process.exit(run(hideBin(process.argv)));
}
