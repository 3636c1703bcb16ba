/** Figure dispatch: load a report, render SVG, and write the sidecar.
 *
 * Rendering never modifies its inputs; the sidecar records a sha256 of every
 * input file so figure provenance is checkable without image diffing.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";

import { renderConvergence } from "./convergence.js";
import { renderStateNorms } from "./stateNorms.js";
import { renderTraining } from "./training.js";
import { FigureSpec } from "./types.js";

export interface SidecarEnvelope {
  schema_version: number;
  kind: string;
  inputs: { path: string; sha256: string }[];
  figure: string;
  [key: string]: unknown;
}

function sha256(path: string): string {
  return createHash("sha256").update(readFileSync(path)).digest("hex");
}

export function render(spec: FigureSpec): SidecarEnvelope {
  const primary = spec.inputPaths[0];
  const report = JSON.parse(readFileSync(primary, "utf-8"));
  let svg: string;
  let details: Record<string, unknown>;
  if (spec.kind === "convergence") {
    ({ svg, sidecar: details } = renderConvergence(report, spec.guideSlopes) as unknown as {
      svg: string;
      sidecar: Record<string, unknown>;
    });
  } else if (spec.kind === "training") {
    ({ svg, sidecar: details } = renderTraining(report) as unknown as {
      svg: string;
      sidecar: Record<string, unknown>;
    });
  } else if (spec.kind === "state_norms") {
    ({ svg, sidecar: details } = renderStateNorms(report) as unknown as {
      svg: string;
      sidecar: Record<string, unknown>;
    });
  } else {
    throw new Error(`unknown figure kind ${spec.kind}`);
  }
  writeFileSync(spec.outputPath, svg);
  const envelope: SidecarEnvelope = {
    schema_version: 1,
    kind: spec.kind,
    inputs: spec.inputPaths.map((p) => ({ path: p, sha256: sha256(p) })),
    figure: spec.outputPath,
    ...details,
  };
  writeFileSync(sidecarPath(spec.outputPath), JSON.stringify(envelope, null, 1) + "\n");
  return envelope;
}

export function sidecarPath(outputPath: string): string {
  return outputPath.replace(/\.svg$/, "") + ".sidecar.json";
}
