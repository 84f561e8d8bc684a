/**
 * Client-side measurement validation mirroring the server's rules: mole
 * fractions inside [0, 1], finite numbers everywhere, pressures positive,
 * and the row count matching the pending batch.  Invalid input never leaves
 * the browser.
 */

import type { MeasurementRow } from "./api.js";

export interface RowIssue {
  row: number;
  field: string;
  message: string;
}

const FRACTION_FIELDS: Array<keyof MeasurementRow> = ["l_planned", "l_actual", "v"];
const POSITIVE_FIELDS: Array<keyof MeasurementRow> = ["P_planned", "P_actual"];
const NUMERIC_FIELDS: Array<keyof MeasurementRow> = [
  "l_planned",
  "l_actual",
  "P_planned",
  "P_actual",
  "v",
  "T",
];

export function validateRow(row: MeasurementRow, index = 0): RowIssue[] {
  const issues: RowIssue[] = [];
  for (const field of NUMERIC_FIELDS) {
    const value = row[field];
    if (typeof value !== "number" || !Number.isFinite(value)) {
      issues.push({ row: index, field, message: "must be a finite number" });
    }
  }
  for (const field of FRACTION_FIELDS) {
    const value = row[field];
    if (typeof value === "number" && (value < 0 || value > 1)) {
      issues.push({ row: index, field, message: "mole fraction outside [0, 1]" });
    }
  }
  for (const field of POSITIVE_FIELDS) {
    const value = row[field];
    if (typeof value === "number" && value <= 0) {
      issues.push({ row: index, field, message: "pressure must be positive" });
    }
  }
  if (typeof row.T === "number" && Number.isFinite(row.T) && row.T <= 0) {
    issues.push({ row: index, field: "T", message: "temperature must be positive" });
  }
  return issues;
}

export function validateBatch(
  rows: MeasurementRow[],
  pending: number[][],
): RowIssue[] {
  const issues: RowIssue[] = [];
  if (rows.length !== pending.length) {
    issues.push({
      row: -1,
      field: "batch",
      message: `expected ${pending.length} rows, got ${rows.length}`,
    });
  }
  rows.forEach((row, i) => issues.push(...validateRow(row, i)));
  if (issues.length > 0) return issues;
  const unmatched = [...pending];
  rows.forEach((row, i) => {
    const hit = unmatched.findIndex(
      (p) =>
        Math.abs((p[0] ?? NaN) - row.l_planned) < 1e-6 &&
        Math.abs((p[1] ?? NaN) - row.P_planned) <= 1e-3 * Math.max(p[1] ?? 1, 1),
    );
    if (hit < 0) {
      issues.push({
        row: i,
        field: "l_planned",
        message: "row does not match any pending batch point",
      });
    } else {
      unmatched.splice(hit, 1);
    }
  });
  return issues;
}

/** Scaled max-norm distance used to annotate proposed points (display only). */
export function scaledDistance(
  a: number[],
  b: number[],
  boxLengths: number[],
): number {
  let worst = 0;
  for (let j = 0; j < a.length; j += 1) {
    const length = boxLengths[j] ?? 0;
    if (length > 0) {
      worst = Math.max(worst, Math.abs((a[j] ?? 0) - (b[j] ?? 0)) / length);
    }
  }
  return worst;
}
