/**
 * Reader for the experiment CSVs.
 *
 * Every file starts with a `# schema=<name>` comment line, then a header
 * row, then data rows.  Readers declare the schema and the columns they
 * need and fail loudly on anything else.
 */

import { readFileSync } from "node:fs";

export class SchemaMismatch extends Error {
  override name = "SchemaMismatch";
}

export class MissingColumn extends Error {
  override name = "MissingColumn";
}

export interface Table {
  schema: string;
  columns: string[];
  rows: Record<string, string>[];
}

/** Split one CSV line honouring double-quoted fields. */
function splitLine(line: string): string[] {
  const out: string[] = [];
  let field = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          field += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      out.push(field);
      field = "";
    } else {
      field += ch;
    }
  }
  out.push(field);
  return out;
}

export function parseTable(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  const tag = lines[0] ?? "";
  if (!tag.startsWith("# schema=")) {
    throw new SchemaMismatch("missing '# schema=' header line");
  }
  const schema = tag.slice("# schema=".length).trim();
  const header = lines[1];
  if (header === undefined) {
    throw new SchemaMismatch(`schema ${schema}: no header row`);
  }
  const columns = splitLine(header);
  const rows: Record<string, string>[] = [];
  for (const line of lines.slice(2)) {
    const parts = splitLine(line);
    const row: Record<string, string> = {};
    columns.forEach((c, i) => {
      row[c] = parts[i] ?? "";
    });
    rows.push(row);
  }
  return { schema, columns, rows };
}

export function readTable(path: string, expectedSchema: string): Table {
  const table = parseTable(readFileSync(path, "utf8"));
  if (table.schema !== expectedSchema) {
    throw new SchemaMismatch(
      `${path}: expected ${expectedSchema}, found ${table.schema}`,
    );
  }
  return table;
}

export function requireColumns(table: Table, needed: readonly string[]): void {
  for (const c of needed) {
    if (!table.columns.includes(c)) {
      throw new MissingColumn(`schema ${table.schema}: missing column ${c}`);
    }
  }
}

/** Numeric cell access; NaN cells are a data error, not a plot point. */
export function num(row: Record<string, string>, column: string): number {
  const raw = row[column];
  if (raw === undefined) {
    throw new MissingColumn(`missing column ${column}`);
  }
  const value = Number(raw);
  if (Number.isNaN(value)) {
    throw new MissingColumn(`column ${column}: ${JSON.stringify(raw)} is not a number`);
  }
  return value;
}
