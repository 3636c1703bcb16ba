/** Training figure: test error over the run with a vertical marker at every
 * grid doubling.  The x axis is wall time when the history carries it and
 * the epoch index otherwise (deterministic runs record zero wall times). */

import { History, checkSchema } from "./types.js";
import { Panel, Scale, axes, document, el, extent, polylinePath } from "./svg.js";

export interface TrainingSidecar {
  grid_switch_epochs: number[];
  marker_count: number;
  grids: number[];
  final_test_err: number;
  cum_gridpoint_epochs: number;
  x_axis: "wall_s" | "epoch";
}

const PANEL: Panel = { x: 64, y: 28, width: 480, height: 260 };

export function gridSwitchEpochs(history: History): number[] {
  const out: number[] = [];
  for (let i = 1; i < history.grid.length; i++) {
    if (history.grid[i] !== history.grid[i - 1]) out.push(history.epoch[i]);
  }
  return out;
}

export function renderTraining(history: History): { svg: string; sidecar: TrainingSidecar } {
  checkSchema(history, "history");
  if (history.epoch.length === 0) {
    throw new Error("history holds no epochs");
  }
  const useWall = history.wall_ms.some((w) => w > 0);
  let xsData: number[];
  if (useWall) {
    let acc = 0;
    xsData = history.wall_ms.map((w) => (acc += w / 1000));
  } else {
    xsData = history.epoch;
  }
  const xScale = new Scale(
    extent([0, ...xsData], 0.02),
    { min: PANEL.x, max: PANEL.x + PANEL.width },
    false,
  );
  const yScale = new Scale(
    extent(history.test_err, 0.1, true),
    { min: PANEL.y + PANEL.height, max: PANEL.y },
    true,
  );
  const body: string[] = [];
  const switches = gridSwitchEpochs(history);
  for (const epoch of switches) {
    const i = history.epoch.indexOf(epoch);
    const px = xScale.pos(xsData[i]);
    body.push(
      el("line", {
        x1: px,
        y1: PANEL.y,
        x2: px,
        y2: PANEL.y + PANEL.height,
        stroke: "#b22",
        "stroke-width": 1,
        "stroke-dasharray": "4,3",
        class: "grid-switch",
      }),
      el("text", { x: px + 3, y: PANEL.y + 12, "font-size": 9, fill: "#b22" }, [
        `${history.grid[i]}²`,
      ]),
    );
  }
  body.push(
    el("path", {
      d: polylinePath(
        xsData.map((x) => xScale.pos(x)),
        history.test_err.map((y) => yScale.pos(y)),
      ),
      fill: "none",
      stroke: "#4363d8",
      "stroke-width": 1.5,
    }),
  );
  body.push(axes(PANEL, xScale, yScale, useWall ? "wall time [s]" : "epoch", "test relative error"));
  const sidecar: TrainingSidecar = {
    grid_switch_epochs: switches,
    marker_count: switches.length,
    grids: [...new Set(history.grid)],
    final_test_err: history.test_err[history.test_err.length - 1],
    cum_gridpoint_epochs: history.cum_gridpoint_epochs[history.cum_gridpoint_epochs.length - 1],
    x_axis: useWall ? "wall_s" : "epoch",
  };
  return {
    svg: document(PANEL.x + PANEL.width + 24, PANEL.y + PANEL.height + 52, body),
    sidecar,
  };
}
