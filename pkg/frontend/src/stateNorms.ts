/** State-norm profiles: layer index against the L2 norm of each state for
 * every initialization scheme, one line per seed. */

import { StateNormsReport, checkSchema } from "./types.js";
import { PALETTE, Panel, Scale, axes, document, el, extent, polylinePath } from "./svg.js";

export interface StateNormsSidecar {
  growth_ratios: Record<string, number[]>;
  schemes: string[];
}

const PANEL: Panel = { x: 64, y: 28, width: 360, height: 260 };

export function renderStateNorms(report: StateNormsReport): {
  svg: string;
  sidecar: StateNormsSidecar;
} {
  checkSchema(report, "state_norms");
  const schemes = Object.keys(report.schemes);
  const all: number[] = [];
  let nLayers = 0;
  for (const scheme of schemes) {
    for (const profile of report.schemes[scheme].profiles) {
      all.push(...profile.filter((v) => v > 0));
      nLayers = Math.max(nLayers, profile.length);
    }
  }
  const xScale = new Scale({ min: 0, max: nLayers - 1 }, { min: PANEL.x, max: PANEL.x + PANEL.width }, false);
  const yScale = new Scale(extent(all, 0.1, true), { min: PANEL.y + PANEL.height, max: PANEL.y }, true);
  const body: string[] = [];
  schemes.forEach((scheme, iS) => {
    const color = PALETTE[iS % PALETTE.length];
    for (const profile of report.schemes[scheme].profiles) {
      body.push(
        el("path", {
          d: polylinePath(
            profile.map((_, t) => xScale.pos(t)),
            profile.map((v) => yScale.pos(Math.max(v, 1e-300))),
          ),
          fill: "none",
          stroke: color,
          "stroke-width": 1.2,
          "stroke-opacity": 0.7,
        }),
      );
    }
    body.push(
      el("rect", { x: PANEL.x + iS * 110, y: 8, width: 12, height: 4, fill: color }),
      el("text", { x: PANEL.x + iS * 110 + 16, y: 13, "font-size": 10 }, [scheme]),
    );
  });
  body.push(axes(PANEL, xScale, yScale, "layer", "state norm"));
  const sidecar: StateNormsSidecar = {
    growth_ratios: Object.fromEntries(
      schemes.map((s) => [s, report.schemes[s].growth_ratio]),
    ),
    schemes,
  };
  return {
    svg: document(PANEL.x + PANEL.width + 24, PANEL.y + PANEL.height + 52, body),
    sidecar,
  };
}
