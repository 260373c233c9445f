/**
 * Schema-checked loading of the simulator's experiment CSVs.
 *
 * Every experiment CSV starts with a versioned schema comment line,
 * e.g. "#chamsim/entropy/v1", followed by a normal header row.
 */
import { readFileSync } from "node:fs";
import Papa from "papaparse";

export type Row = Record<string, string>;

export interface ExperimentCsv {
  schema: string;
  fields: string[];
  rows: Row[];
}

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

export function parseExperimentCsv(text: string, path = "<string>"): ExperimentCsv {
  const newline = text.indexOf("\n");
  const first = (newline === -1 ? text : text.slice(0, newline)).trim();
  const match = /^#(chamsim\/[a-z_]+\/v\d+)$/.exec(first);
  if (!match) {
    throw new SchemaError(
      `${path}: missing schema comment line (expected "#chamsim/<kind>/v<N>", got ${JSON.stringify(first)})`,
    );
  }
  const schema = match[1];
  const body = newline === -1 ? "" : text.slice(newline + 1);
  const parsed = Papa.parse<Row>(body, {
    header: true,
    delimiter: ",",
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new SchemaError(`${path}: row ${e.row}: ${e.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  if (fields.length === 0 || parsed.data.length === 0) {
    throw new SchemaError(`${path}: no data rows under schema ${schema}`);
  }
  return { schema, fields, rows: parsed.data };
}

export function loadExperimentCsv(path: string): ExperimentCsv {
  return parseExperimentCsv(readFileSync(path, "utf8"), path);
}

/** Throw unless the loaded CSV carries one of the schemas a chart accepts. */
export function requireSchema(csv: ExperimentCsv, accepted: string[], path: string): void {
  if (!accepted.includes(csv.schema)) {
    throw new SchemaError(
      `${path}: schema ${csv.schema} not usable here (expected ${accepted.join(" or ")})`,
    );
  }
}

export function num(row: Row, field: string): number {
  const raw = row[field];
  const value = Number(raw);
  if (raw === undefined || raw === "" || Number.isNaN(value)) {
    throw new SchemaError(`missing or non-numeric field ${JSON.stringify(field)}: ${JSON.stringify(raw)}`);
  }
  return value;
}
