/** File-level entry point: FigureSpec in, SVG file out. */
import { writeFileSync } from "node:fs";
import { FIGURE_KINDS, FigureKind, KIND_SCHEMAS, renderChart } from "./charts.js";
import { SchemaError, loadExperimentCsv, requireSchema } from "./csv.js";

export interface FigureSpec {
  csvPath: string;
  figureKind: FigureKind;
  outputPath: string;
}

export function isFigureKind(value: string): value is FigureKind {
  return (FIGURE_KINDS as readonly string[]).includes(value);
}

/** Render the chart described by `spec` and write it to spec.outputPath. */
export function render(spec: FigureSpec): string {
  if (!isFigureKind(spec.figureKind)) {
    throw new SchemaError(
      `unknown figure kind ${JSON.stringify(spec.figureKind)}; expected one of ${FIGURE_KINDS.join(", ")}`,
    );
  }
  const csv = loadExperimentCsv(spec.csvPath);
  requireSchema(csv, KIND_SCHEMAS[spec.figureKind], spec.csvPath);
  const svg = renderChart(spec.figureKind, csv);
  writeFileSync(spec.outputPath, svg, "utf8");
  return svg;
}
