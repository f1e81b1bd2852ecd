/**
 * Fold-time figures from a campaign summary CSV.
 *
 * usage: node dist/plot_fold_times.js --summary summary.csv --out-dir figs/
 */

import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { parseArgs } from "./args.js";
import { loadSummaryCsv } from "./io.js";
import { foldTimeBoxSvg, foldTimeCurvesSvg } from "./plots.js";

function main() {
  const args = parseArgs(process.argv.slice(2), ["summary", "out-dir"]);
  const rows = loadSummaryCsv(args.summary);
  mkdirSync(args["out-dir"], { recursive: true });
  const curves = join(args["out-dir"], "fold_time_curves.svg");
  const box = join(args["out-dir"], "fold_time_box.svg");
  writeFileSync(curves, foldTimeCurvesSvg(rows));
  writeFileSync(box, foldTimeBoxSvg(rows));
  console.log(`${rows.length} summary rows -> ${curves}, ${box}`);
}

try {
  main();
} catch (err) {
  console.error(String(err));
  process.exit(1);
}
