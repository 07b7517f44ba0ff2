/** Minimal CSV reader for the artifact schema: a header row of plain
 * column names, comma separation, '.' decimals, no quoting. */

export interface Table {
  columns: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new Error(
        `malformed CSV row: expected ${columns.length} cells, got ${cells.length}`,
      );
    }
    return cells;
  });
  return { columns, rows };
}

export function numericColumn(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(`CSV is missing column '${name}'`);
  }
  return table.rows.map((r) => Number(r[idx]));
}

export function column(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new Error(`CSV is missing column '${name}'`);
  }
  return table.rows.map((r) => r[idx]);
}
