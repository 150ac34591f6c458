/**
 * Phase-diagram heatmap: parse the sweep CSV and map it onto a colored,
 * clickable grid.
 *
 * Input format: a single "# meta {json}" comment line, then a CSV header
 * whose leading columns are the sweep axis names, then one row per cell
 * in row-major order (last axis fastest). Metric fields may be empty
 * (no successful trials) or "Infinity".
 */

export type PhaseLabel =
  | "mill"
  | "ellipsoidal"
  | "colliding_clusters"
  | "separated_groups";

export const PHASE_LABELS: readonly PhaseLabel[] = [
  "mill",
  "ellipsoidal",
  "colliding_clusters",
  "separated_groups",
];

/** Fill colors for the grid, one per outcome label. */
export const LABEL_COLORS: Record<PhaseLabel, string> = {
  mill: "#2f9e44", // green
  ellipsoidal: "#f4c20d", // yellow
  colliding_clusters: "#d93025", // red
  separated_groups: "#8e24aa", // purple
};

/** Human color names, used in the legend and in tooltips. */
export const LABEL_COLOR_NAMES: Record<PhaseLabel, string> = {
  mill: "green",
  ellipsoidal: "yellow",
  colliding_clusters: "red",
  separated_groups: "purple",
};

/** Cells where every trial errored carry no label; render them neutral. */
export const NO_LABEL_COLOR = "#9e9e9e";

export class HeatmapError extends Error {}

export interface HeatmapCell {
  /** Row-major cell index in the CSV. */
  index: number;
  /** Axis name -> value for this cell, e.g. {v_m_s: 0.25, omega_rad_s: 0.785}. */
  coords: Record<string, number>;
  label: PhaseLabel | null;
  counts: Record<PhaseLabel, number>;
  nError: number;
  circlinessMean: number | null;
  diffusionMean: number | null;
  collisionsTotal: number;
}

export interface HeatmapGrid {
  meta: Record<string, unknown>;
  /** Axis names in CSV column order; 1 or 2 axes supported for display. */
  axisNames: string[];
  /** Axis values in row-major order: axisValues[0] indexes rows. */
  axisValues: number[][];
  /** cells[r][c]; a single-axis diagram is one row. */
  cells: HeatmapCell[][];
  nRows: number;
  nCols: number;
}

const METRIC_COLUMNS = [
  "majority_label",
  "n_mill",
  "n_ellipsoidal",
  "n_colliding_clusters",
  "n_separated_groups",
  "n_error",
  "circliness_mean",
  "diffusion_mean",
  "collisions_total",
] as const;

function fail(msg: string): never {
  throw new HeatmapError(msg);
}

function parseCount(field: string, where: string): number {
  const n = Number(field);
  if (!Number.isInteger(n) || n < 0) fail(`${where}: bad count ${JSON.stringify(field)}`);
  return n;
}

function parseMetric(field: string, where: string): number | null {
  if (field === "") return null; // no successful trials
  const x = Number(field); // handles "Infinity" / "-Infinity"
  if (Number.isNaN(x)) fail(`${where}: bad number ${JSON.stringify(field)}`);
  return x;
}

/**
 * Parse phase CSV text into a displayable grid.
 *
 * Throws HeatmapError with a human-readable reason on any malformed
 * input; callers surface that in the error panel instead of a grid.
 */
export function parsePhaseCsv(text: string): HeatmapGrid {
  let meta: Record<string, unknown> | null = null;
  const body: string[] = [];
  for (const line of text.split(/\r?\n/)) {
    if (line.startsWith("#")) {
      const stripped = line.slice(1).trim();
      if (stripped.startsWith("meta ")) {
        try {
          meta = JSON.parse(stripped.slice("meta ".length));
        } catch {
          fail("meta line is not valid JSON");
        }
      }
      continue;
    }
    if (line.trim()) body.push(line);
  }
  if (meta === null) fail("missing '# meta' line");
  if (body.length < 2) fail("no data rows");

  const axesRaw = meta.axes;
  if (!Array.isArray(axesRaw) || axesRaw.length === 0) fail("meta has no axes");
  const axisNames: string[] = [];
  const axisValues: number[][] = [];
  for (const ax of axesRaw) {
    if (
      typeof ax !== "object" ||
      ax === null ||
      typeof (ax as Record<string, unknown>).name !== "string" ||
      !Array.isArray((ax as Record<string, unknown>).values)
    ) {
      fail("meta axis entries must be {name, values}");
    }
    const name = (ax as { name: string }).name;
    const values = (ax as { values: unknown[] }).values.map((v) => {
      if (typeof v !== "number" || !Number.isFinite(v)) fail(`axis ${name}: bad value`);
      return v;
    });
    if (values.length === 0) fail(`axis ${name} has no values`);
    axisNames.push(name);
    axisValues.push(values);
  }
  if (axisNames.length > 2) fail(`cannot display ${axisNames.length}-axis diagram as a grid`);

  const header = body[0].split(",");
  const expected = [...axisNames, ...METRIC_COLUMNS];
  if (header.length !== expected.length || !expected.every((h, i) => header[i] === h)) {
    fail(`unexpected header: ${body[0]}`);
  }

  const nRows = axisValues[0].length;
  const nCols = axisNames.length === 2 ? axisValues[1].length : 1;
  const dataRows = body.slice(1);
  if (dataRows.length !== nRows * nCols) {
    fail(`expected ${nRows * nCols} cells, found ${dataRows.length}`);
  }

  const flat: HeatmapCell[] = dataRows.map((line, index) => {
    const where = `row ${index + 1}`;
    const fields = line.split(",");
    if (fields.length !== expected.length) fail(`${where}: wrong field count`);
    const coords: Record<string, number> = {};
    axisNames.forEach((name, i) => {
      const x = Number(fields[i]);
      if (Number.isNaN(x)) fail(`${where}: bad ${name} value`);
      coords[name] = x;
    });
    const k = axisNames.length;
    const labelField = fields[k];
    let label: PhaseLabel | null = null;
    if (labelField !== "") {
      if (!(PHASE_LABELS as readonly string[]).includes(labelField)) {
        fail(`${where}: unknown label ${JSON.stringify(labelField)}`);
      }
      label = labelField as PhaseLabel;
    }
    return {
      index,
      coords,
      label,
      counts: {
        mill: parseCount(fields[k + 1], where),
        ellipsoidal: parseCount(fields[k + 2], where),
        colliding_clusters: parseCount(fields[k + 3], where),
        separated_groups: parseCount(fields[k + 4], where),
      },
      nError: parseCount(fields[k + 5], where),
      circlinessMean: parseMetric(fields[k + 6], where),
      diffusionMean: parseMetric(fields[k + 7], where),
      collisionsTotal: parseCount(fields[k + 8], where),
    };
  });

  // Row-major with the last axis fastest: cell (r, c) sits at r*nCols + c.
  const cells: HeatmapCell[][] = [];
  for (let r = 0; r < nRows; r++) {
    cells.push(flat.slice(r * nCols, (r + 1) * nCols));
  }
  return { meta, axisNames, axisValues, cells, nRows, nCols };
}

/** Grid fill color for one cell. */
export function cellColor(cell: HeatmapCell): string {
  return cell.label === null ? NO_LABEL_COLOR : LABEL_COLORS[cell.label];
}

/**
 * The "launch a live session here" payload for a clicked cell: the
 * cell's axis coordinates, ready to merge into a config (all SI).
 */
export function cellSessionParams(cell: HeatmapCell): Record<string, number> {
  return { ...cell.coords };
}

/** One-line tooltip/summary for a cell. */
export function describeCell(grid: HeatmapGrid, cell: HeatmapCell): string {
  const coords = grid.axisNames
    .map((n) => `${n}=${cell.coords[n]}`)
    .join(", ");
  const label = cell.label ?? "no result";
  const counts = PHASE_LABELS.map((l) => `${l}:${cell.counts[l]}`).join(" ");
  return `${coords} -> ${label} (${counts} err:${cell.nError})`;
}
