import Papa from "papaparse";

/** A referenced column is absent or holds something that is not a number. */
export class SchemaMismatchError extends Error {}

/** The CSV has a header but no data rows (or no content at all). */
export class EmptyInputError extends Error {}

export type Row = Record<string, unknown>;

/**
 * Parse CSV text with a header row, requiring the named columns to exist
 * and at least one data row to be present.
 */
export function parseCsv(text: string, requiredColumns: string[]): Row[] {
  if (text.trim() === "") {
    throw new EmptyInputError("empty-input: the CSV has no content");
  }
  const parsed = Papa.parse<Row>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new SchemaMismatchError(
      `schema-mismatch: ${first.message}${first.row === undefined ? "" : ` (row ${first.row})`}`,
    );
  }
  const header = parsed.meta.fields ?? [];
  for (const column of requiredColumns) {
    if (!header.includes(column)) {
      throw new SchemaMismatchError(
        `schema-mismatch: missing column '${column}' (header: ${header.join(", ")})`,
      );
    }
  }
  if (parsed.data.length === 0) {
    throw new EmptyInputError("empty-input: the CSV has a header but no data rows");
  }
  return parsed.data;
}

/** Read one numeric cell, rejecting anything papaparse did not type as a number. */
export function numericCell(row: Row, column: string): number {
  const value = row[column];
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new SchemaMismatchError(
      `schema-mismatch: column '${column}' holds non-numeric value ${JSON.stringify(value)}`,
    );
  }
  return value;
}
