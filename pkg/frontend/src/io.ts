import { readFileSync } from "fs";

import Papa from "papaparse";

import {
  LayoutDoc,
  SchemaError,
  SummaryRow,
  TargetsDoc,
  TrajectoryDoc,
  parseOrSchemaError,
} from "./schemas.js";

export function loadSummaryCsv(path: string): SummaryRow[] {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<Record<string, unknown>>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`summary CSV parse error: ${parsed.errors[0].message}`);
  }
  if (parsed.data.length === 0) {
    throw new SchemaError("summary CSV has no data rows");
  }
  return parsed.data.map((row, i) =>
    parseOrSchemaError(SummaryRow, row, `summary CSV row ${i + 1}`),
  );
}

export function loadTrajectory(path: string): TrajectoryDoc {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  return parseOrSchemaError(TrajectoryDoc, doc, "trajectory JSON");
}

export function loadLayout(path: string): LayoutDoc {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  return parseOrSchemaError(LayoutDoc, doc, "layout JSON");
}

export function loadTargets(path: string): TargetsDoc {
  const doc = JSON.parse(readFileSync(path, "utf8"));
  return parseOrSchemaError(TargetsDoc, doc, "targets JSON");
}
