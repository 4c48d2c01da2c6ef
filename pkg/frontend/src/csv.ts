/**
 * Strict numeric CSV loading for the simulation artifacts.
 *
 * Files carry a single header row; every data cell must parse as a finite
 * or infinite decimal number. Column lookups fail loudly with the missing
 * column named, so a schema drift in the producing pipeline surfaces as a
 * clear error rather than a silent bad plot.
 */

import { readFileSync } from "fs";

export interface CsvTable {
  columns: string[];
  /** column name -> values */
  data: Map<string, number[]>;
  rows: number;
}

export class MissingColumnError extends Error {
  constructor(public readonly column: string, file: string) {
    super(`missing column '${column}' in ${file}`);
    this.name = "MissingColumnError";
  }
}

export function parseCsv(text: string, source = "<string>"): CsvTable {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length < 1) {
    throw new Error(`${source}: empty CSV`);
  }
  const columns = lines[0].split(",").map((c) => c.trim());
  const data = new Map<string, number[]>(columns.map((c) => [c, []]));
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new Error(`${source}: row ${i} has ${cells.length} cells, header has ${columns.length}`);
    }
    for (let j = 0; j < columns.length; j++) {
      const v = Number(cells[j]);
      if (Number.isNaN(v)) {
        throw new Error(`${source}: row ${i}, column '${columns[j]}' is not numeric: ${cells[j]}`);
      }
      data.get(columns[j])!.push(v);
    }
  }
  return { columns, data, rows: lines.length - 1 };
}

export function loadCsv(path: string): CsvTable {
  return parseCsv(readFileSync(path, "utf8"), path);
}

export function column(table: CsvTable, name: string, source: string): number[] {
  const values = table.data.get(name);
  if (values === undefined) {
    throw new MissingColumnError(name, source);
  }
  return values;
}

/** Columns whose names start with a prefix, with the numeric suffix parsed. */
export function prefixedColumns(
  table: CsvTable,
  prefix: string,
  source: string,
): { name: string; coordinate: number; values: number[] }[] {
  const out = table.columns
    .filter((c) => c.startsWith(prefix))
    .map((name) => ({
      name,
      coordinate: Number(name.slice(prefix.length)),
      values: table.data.get(name)!,
    }));
  if (out.length === 0) {
    throw new MissingColumnError(`${prefix}*`, source);
  }
  return out;
}
