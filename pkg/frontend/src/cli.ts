/** Command line: fnodisc-figures <kind> --input report.json [--input more]
 * --out figure.svg [--guides -0.5,-1,-1.5,-2] */

import { render } from "./render.js";
import { FigureKind, FigureSpec, SchemaError } from "./types.js";

function parseArgs(argv: string[]): FigureSpec {
  const [kind, ...rest] = argv;
  if (!kind || !["convergence", "training", "state_norms"].includes(kind)) {
    throw new Error(
      "usage: fnodisc-figures <convergence|training|state_norms> --input report.json --out figure.svg [--guides s1,s2,...]",
    );
  }
  const inputPaths: string[] = [];
  let outputPath = "";
  let guideSlopes: number[] | undefined;
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i];
    if (arg === "--input") inputPaths.push(rest[++i]);
    else if (arg === "--out") outputPath = rest[++i];
    else if (arg === "--guides") guideSlopes = rest[++i].split(",").map(Number);
    else throw new Error(`unknown argument ${arg}`);
  }
  if (inputPaths.length === 0 || !outputPath) {
    throw new Error("--input and --out are required");
  }
  return { kind: kind as FigureKind, inputPaths, outputPath, guideSlopes };
}

export function main(argv: string[]): number {
  try {
    const spec = parseArgs(argv);
    const sidecar = render(spec);
    console.log(`wrote ${spec.outputPath} and ${sidecar.inputs.length} input hash(es)`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema mismatch: ${(err as Error).message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
