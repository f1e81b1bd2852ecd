/**
 * Chart builders over campaign summary rows: efficiency trend lines, and
 * box plots of efficiency or fold time per crowding level and algorithm.
 * Charts render server-side to SVG strings.
 */

import * as echarts from "echarts";

import { SummaryRow } from "./schemas.js";

function cellLabel(row: SummaryRow): string {
  return `${row.algorithm} (n=${row.n_robots}, dt=${row.step_deg})`;
}

function groups(rows: SummaryRow[]): Map<string, SummaryRow[]> {
  const out = new Map<string, SummaryRow[]>();
  for (const row of rows) {
    const key = cellLabel(row);
    const list = out.get(key) ?? [];
    list.push(row);
    out.set(key, list);
  }
  for (const list of out.values()) {
    list.sort((a, b) => a.cbuff_mm - b.cbuff_mm);
  }
  return out;
}

function renderSvg(option: echarts.EChartsCoreOption, width = 900, height = 600): string {
  const chart = echarts.init(null, null, { renderer: "svg", ssr: true, width, height });
  chart.setOption(option);
  const svg = chart.renderToSVGString();
  chart.dispose();
  return svg;
}

export function efficiencyCurvesSvg(rows: SummaryRow[]): string {
  const byCell = groups(rows);
  const series: object[] = [];
  for (const [label, cells] of byCell) {
    series.push({
      name: `${label} mean`,
      type: "line",
      symbol: "circle",
      data: cells.map((c) => [c.cbuff_mm, c.eff_mean]),
    });
    series.push({
      name: `${label} min`,
      type: "line",
      symbol: "triangle",
      lineStyle: { type: "dashed" },
      data: cells.map((c) => [c.cbuff_mm, c.eff_min]),
    });
  }
  return renderSvg({
    animation: false,
    title: { text: "Targeting efficiency vs crowding" },
    legend: { top: 28 },
    grid: { top: 90 },
    xAxis: { type: "value", name: "collision buffer (mm)" },
    yAxis: { type: "value", name: "efficiency", min: "dataMin", max: 1.0 },
    series,
  });
}

function boxSeries(byCell: Map<string, SummaryRow[]>, categories: string[],
                   pick: (c: SummaryRow) => [number, number, number, number, number]) {
  const series: object[] = [];
  for (const [label, cells] of byCell) {
    series.push({
      name: label,
      type: "boxplot",
      data: categories.map((cat) => {
        const cell = cells.find((c) => String(c.cbuff_mm) === cat);
        return cell ? pick(cell) : null;
      }),
    });
  }
  return series;
}

export function efficiencyBoxSvg(rows: SummaryRow[]): string {
  const byCell = groups(rows);
  const categories = [...new Set(rows.map((r) => r.cbuff_mm))]
    .sort((a, b) => a - b)
    .map(String);
  return renderSvg({
    animation: false,
    title: { text: "Efficiency distribution per crowding level" },
    legend: { top: 28 },
    grid: { top: 90 },
    xAxis: { type: "category", data: categories, name: "collision buffer (mm)" },
    yAxis: { type: "value", name: "efficiency", min: "dataMin" },
    series: boxSeries(byCell, categories, (c) => [
      c.eff_whisker_lo, c.eff_q1, c.eff_median, c.eff_q3, c.eff_whisker_hi,
    ]),
  });
}

export function foldTimeBoxSvg(rows: SummaryRow[]): string {
  const byCell = groups(rows);
  const categories = [...new Set(rows.map((r) => r.cbuff_mm))]
    .sort((a, b) => a - b)
    .map(String);
  return renderSvg({
    animation: false,
    title: { text: "Fold time distribution per crowding level" },
    legend: { top: 28 },
    grid: { top: 90 },
    xAxis: { type: "category", data: categories, name: "collision buffer (mm)" },
    yAxis: { type: "value", name: "fold time (s)", min: 0 },
    series: boxSeries(byCell, categories, (c) => [
      c.fold_whisker_lo_s, c.fold_q1_s, c.fold_median_s, c.fold_q3_s, c.fold_whisker_hi_s,
    ]),
  });
}

export function foldTimeCurvesSvg(rows: SummaryRow[]): string {
  const byCell = groups(rows);
  const series: object[] = [];
  for (const [label, cells] of byCell) {
    series.push({
      name: `${label} mean`,
      type: "line",
      symbol: "circle",
      data: cells.map((c) => [c.cbuff_mm, c.fold_mean_s]),
    });
  }
  return renderSvg({
    animation: false,
    title: { text: "Mean fold time vs crowding" },
    legend: { top: 28 },
    grid: { top: 90 },
    xAxis: { type: "value", name: "collision buffer (mm)" },
    yAxis: { type: "value", name: "fold time (s)", min: 0 },
    series,
  });
}
