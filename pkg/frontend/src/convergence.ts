/** Convergence figure: per-regularity panels of relative error versus grid
 * size, one line per layer with a two-standard-deviation band, and a dashed
 * rate guide in each panel. */

import { ErrorReport, checkSchema } from "./types.js";
import {
  PALETTE,
  Panel,
  Scale,
  axes,
  bandPath,
  document,
  el,
  extent,
  polylinePath,
} from "./svg.js";

export interface ConvergenceSidecar {
  fitted_slopes: Record<string, number[]>;
  guide_slopes: number[];
  resolutions: number[];
  n_samples: number;
}

const PANEL_W = 240;
const PANEL_H = 220;
const MARGIN = { left: 64, right: 16, top: 40, bottom: 48, gap: 40 };

export function renderConvergence(
  report: ErrorReport,
  guideSlopes?: number[],
): { svg: string; sidecar: ConvergenceSidecar } {
  checkSchema(report, "error_report");
  const nPanels = report.s_values.length;
  const guides =
    guideSlopes && guideSlopes.length > 0 ? guideSlopes : report.s_values.map((s) => -s);
  if (guides.length !== nPanels) {
    throw new Error(`need one guide slope per panel: ${guides.length} vs ${nPanels}`);
  }
  const width = MARGIN.left + nPanels * PANEL_W + (nPanels - 1) * MARGIN.gap + MARGIN.right;
  const height = MARGIN.top + PANEL_H + MARGIN.bottom;
  const body: string[] = [];

  report.s_values.forEach((s, iS) => {
    const panel: Panel = {
      x: MARGIN.left + iS * (PANEL_W + MARGIN.gap),
      y: MARGIN.top,
      width: PANEL_W,
      height: PANEL_H,
    };
    const ns = report.resolutions;
    const mean = report.mean_rel_err[iS];
    const std = report.std_rel_err[iS];
    const nLayers = mean[0].length;
    const lows: number[] = [];
    const highs: number[] = [];
    for (let iN = 0; iN < ns.length; iN++) {
      for (let t = 0; t < nLayers; t++) {
        lows.push(Math.max(mean[iN][t] - 2 * std[iN][t], 1e-300));
        highs.push(mean[iN][t] + 2 * std[iN][t]);
      }
    }
    const xScale = new Scale(extent(ns, 0.08, true), { min: panel.x, max: panel.x + panel.width }, true);
    const yScale = new Scale(
      extent([...lows, ...highs], 0.1, true),
      { min: panel.y + panel.height, max: panel.y },
      true,
    );
    const xs = ns.map((n) => xScale.pos(n));

    for (let t = 0; t < nLayers; t++) {
      const color = PALETTE[t % PALETTE.length];
      const upper = ns.map((_, iN) => yScale.pos(mean[iN][t] + 2 * std[iN][t]));
      const lower = ns.map((_, iN) =>
        yScale.pos(Math.max(mean[iN][t] - 2 * std[iN][t], 1e-300)),
      );
      body.push(
        el("path", { d: bandPath(xs, upper, lower), fill: color, "fill-opacity": 0.15, stroke: "none" }),
      );
      body.push(
        el("path", {
          d: polylinePath(xs, ns.map((_, iN) => yScale.pos(mean[iN][t]))),
          fill: "none",
          stroke: color,
          "stroke-width": 1.5,
        }),
      );
    }

    // dashed rate guide anchored above the first-resolution errors
    const slope = guides[iS];
    const anchor = Math.max(...mean[0]) * 2.0;
    const guideYs = ns.map((n) => anchor * Math.pow(n / ns[0], slope));
    body.push(
      el("path", {
        d: polylinePath(xs, guideYs.map((y) => yScale.pos(y))),
        fill: "none",
        stroke: "#555",
        "stroke-width": 1,
        "stroke-dasharray": "6,4",
      }),
    );
    body.push(
      el(
        "text",
        { x: panel.x + panel.width / 2, y: panel.y - 8, "text-anchor": "middle", "font-size": 12 },
        [`s = ${s}`],
      ),
    );
    body.push(axes(panel, xScale, yScale, "grid size N", iS === 0 ? "relative error" : ""));
  });

  // layer legend
  const nLayers = report.mean_rel_err[0][0].length;
  for (let t = 0; t < nLayers; t++) {
    body.push(
      el("rect", { x: MARGIN.left + t * 76, y: 8, width: 12, height: 4, fill: PALETTE[t % PALETTE.length] }),
      el("text", { x: MARGIN.left + t * 76 + 16, y: 13, "font-size": 10 }, [`layer ${t}`]),
    );
  }

  const sidecar: ConvergenceSidecar = {
    fitted_slopes: Object.fromEntries(
      report.s_values.map((s, i) => [String(s), report.slopes[i]]),
    ),
    guide_slopes: guides,
    resolutions: report.resolutions,
    n_samples: report.n_samples,
  };
  return { svg: document(width, height, body), sidecar };
}
