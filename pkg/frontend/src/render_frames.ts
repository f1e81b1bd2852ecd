/**
 * Snapshot frames of a trajectory: arms, patrol annuli, fiber trails, and
 * optional target stars.
 *
 * usage: node dist/render_frames.js --trajectory t.json --layout l.json \
 *          --steps 0,360,720 --out-dir frames/ [--targets targets.json]
 */

import { mkdirSync, writeFileSync } from "fs";
import { join } from "path";

import { parseArgs } from "./args.js";
import { loadLayout, loadTargets, loadTrajectory } from "./io.js";
import { buildFrameScene, maxStepIndex, sceneToSvg } from "./frames.js";

function main() {
  const args = parseArgs(process.argv.slice(2),
    ["trajectory", "layout", "steps", "out-dir"], ["targets"]);
  const traj = loadTrajectory(args.trajectory);
  const layout = loadLayout(args.layout);
  const targets = args.targets ? loadTargets(args.targets) : undefined;
  const steps = args.steps
    .split(",")
    .map((s) => (s === "final" ? maxStepIndex(traj) : Number(s)));
  mkdirSync(args["out-dir"], { recursive: true });
  for (const step of steps) {
    const scene = buildFrameScene(traj, layout, step, targets);
    const path = join(args["out-dir"], `frame_${String(step).padStart(6, "0")}.svg`);
    writeFileSync(path, sceneToSvg(scene));
    const parked = scene.robots.filter((r) => r.onTarget).length;
    console.log(`step ${step} (t=${scene.timeS.toFixed(2)}s) -> ${path}` +
      (targets ? ` [${parked}/${scene.robots.length} on target]` : ""));
  }
}

try {
  main();
} catch (err) {
  console.error(String(err));
  process.exit(1);
}
