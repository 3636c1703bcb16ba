/** Report schemas emitted by the experiment runner, plus figure requests. */

export const SCHEMA_VERSION = 1;

export interface ErrorReport {
  schema_version: number;
  kind: "error_report";
  config: Record<string, unknown>;
  init_scheme: string;
  s_values: number[];
  resolutions: number[];
  n_ref: number;
  n_samples: number;
  seed: number;
  /** [s][sample][resolution][layer] */
  rel_err: number[][][][];
  /** [s][resolution][layer] */
  mean_rel_err: number[][][];
  std_rel_err: number[][][];
  /** [s][layer] */
  slopes: number[][];
  intercepts: number[][];
  residuals: number[][];
  fit_ns: number[][];
}

export interface History {
  schema_version: number;
  kind: "history";
  epoch: number[];
  grid: number[];
  train_loss: number[];
  val_err: number[];
  test_err: number[];
  wall_ms: number[];
  cum_gridpoint_epochs: number[];
}

export interface StateNormsReport {
  schema_version: number;
  kind: "state_norms";
  config: Record<string, unknown>;
  n_grid: number;
  s: number;
  seed: number;
  schemes: Record<string, { profiles: number[][]; growth_ratio: number[] }>;
}

export type Report = ErrorReport | History | StateNormsReport;

export type FigureKind = "convergence" | "training" | "state_norms";

export interface FigureSpec {
  kind: FigureKind;
  /** primary data source (JSON report) plus any companion files to hash */
  inputPaths: string[];
  outputPath: string;
  /** slopes of dashed guide lines; convergence defaults to -s per panel */
  guideSlopes?: number[];
}

export class SchemaError extends Error {}

export function checkSchema(report: { schema_version?: number; kind?: string }, expected: string): void {
  if (report.schema_version !== SCHEMA_VERSION) {
    throw new SchemaError(
      `report schema ${report.schema_version} does not match renderer schema ${SCHEMA_VERSION}`,
    );
  }
  if (report.kind !== expected) {
    throw new SchemaError(`expected a ${expected} report, got ${report.kind}`);
  }
}
