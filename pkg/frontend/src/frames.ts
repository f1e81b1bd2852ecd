/**
 * Frame scenes and SVG rendering for positioner trajectories.
 *
 * The scene builder interpolates each axis waypoint list at the requested
 * step time and lays out arms, patrol annuli, fiber trails, and target
 * markers; rendering is plain hand-written SVG.
 */

import { LayoutDoc, TargetsDoc, TrajectoryDoc } from "./schemas.js";

export class ConsistencyError extends Error {}

export interface RobotSprite {
  index: number;
  base: [number, number];
  elbow: [number, number];
  fiber: [number, number];
  trail: [number, number][];
  onTarget: boolean;
}

export interface FrameScene {
  step: number;
  timeS: number;
  maxStep: number;
  robots: RobotSprite[];
  targets: [number, number][];
  innerRadius: number;
  outerRadius: number;
  armHalfWidth: number;
}

function interpolate(points: [number, number][], t: number): number {
  if (t <= points[0][0]) return points[0][1];
  const last = points[points.length - 1];
  if (t >= last[0]) return last[1];
  for (let k = 1; k < points.length; k += 1) {
    if (points[k][0] >= t) {
      const [t0, v0] = points[k - 1];
      const [t1, v1] = points[k];
      if (t1 === t0) return v1;
      return v0 + ((t - t0) / (t1 - t0)) * (v1 - v0);
    }
  }
  return last[1];
}

const DEG = Math.PI / 180;

function armPoints(
  base: [number, number],
  alphaLen: number,
  betaLen: number,
  alphaDeg: number,
  betaDeg: number,
): { elbow: [number, number]; fiber: [number, number] } {
  const a = alphaDeg * DEG;
  const ab = (alphaDeg + betaDeg) * DEG;
  const elbow: [number, number] = [
    base[0] + alphaLen * Math.cos(a),
    base[1] + alphaLen * Math.sin(a),
  ];
  const fiber: [number, number] = [
    elbow[0] + betaLen * Math.cos(ab),
    elbow[1] + betaLen * Math.sin(ab),
  ];
  return { elbow, fiber };
}

export function maxStepIndex(traj: TrajectoryDoc): number {
  let end = 0;
  for (const r of traj.robots) {
    end = Math.max(end, r.alpha[r.alpha.length - 1][0], r.beta[r.beta.length - 1][0]);
  }
  const dt = traj.step_deg / traj.axis_speed_deg_s;
  return Math.round(end / dt);
}

export function buildFrameScene(
  traj: TrajectoryDoc,
  layout: LayoutDoc,
  step: number,
  targets?: TargetsDoc,
  trailEvery = 8,
): FrameScene {
  if (traj.robots.length !== layout.robots.length) {
    throw new ConsistencyError(
      `trajectory has ${traj.robots.length} robots but layout has ${layout.robots.length}`,
    );
  }
  const maxStep = maxStepIndex(traj);
  if (!Number.isInteger(step) || step < 0 || step > maxStep) {
    throw new RangeError(`step ${step} outside [0, ${maxStep}]`);
  }
  const dt = traj.step_deg / traj.axis_speed_deg_s;
  const time = step * dt;
  const bases = new Map(layout.robots.map((r) => [r.index, [r.x, r.y] as [number, number]]));

  const robots: RobotSprite[] = traj.robots.map((robot) => {
    const base = bases.get(robot.index);
    if (!base) {
      throw new ConsistencyError(`robot ${robot.index} missing from layout`);
    }
    const alpha = interpolate(robot.alpha, time);
    const beta = interpolate(robot.beta, time);
    const { elbow, fiber } = armPoints(base, layout.alpha_len, layout.beta_len, alpha, beta);
    const trail: [number, number][] = [];
    for (let s = 0; s <= step; s += trailEvery) {
      const t = s * dt;
      const pts = armPoints(
        base,
        layout.alpha_len,
        layout.beta_len,
        interpolate(robot.alpha, t),
        interpolate(robot.beta, t),
      );
      trail.push(pts.fiber);
    }
    trail.push(fiber);
    let onTarget = false;
    if (targets) {
      const pose = targets[String(robot.index)];
      if (pose) {
        const want = armPoints(base, layout.alpha_len, layout.beta_len, pose[0], pose[1]);
        const d = Math.hypot(want.fiber[0] - fiber[0], want.fiber[1] - fiber[1]);
        onTarget = d < 1e-6;
      }
    }
    return { index: robot.index, base, elbow, fiber, trail, onTarget };
  });

  const targetPoints: [number, number][] = [];
  if (targets) {
    for (const [key, pose] of Object.entries(targets)) {
      const base = bases.get(Number(key));
      if (!base) {
        throw new ConsistencyError(`target for robot ${key} missing from layout`);
      }
      targetPoints.push(armPoints(base, layout.alpha_len, layout.beta_len, pose[0], pose[1]).fiber);
    }
  }

  return {
    step,
    timeS: time,
    maxStep,
    robots,
    targets: targetPoints,
    innerRadius: layout.beta_len - layout.alpha_len,
    outerRadius: layout.beta_len + layout.alpha_len,
    armHalfWidth: layout.cbuff,
  };
}

function fmt(v: number): string {
  return v.toFixed(3);
}

export function sceneToSvg(scene: FrameScene, sizePx = 800): string {
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const r of scene.robots) {
    minX = Math.min(minX, r.base[0] - scene.outerRadius);
    maxX = Math.max(maxX, r.base[0] + scene.outerRadius);
    minY = Math.min(minY, r.base[1] - scene.outerRadius);
    maxY = Math.max(maxY, r.base[1] + scene.outerRadius);
  }
  const pad = 2;
  const w = maxX - minX + 2 * pad;
  const h = maxY - minY + 2 * pad;
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${sizePx}" height="${sizePx}" ` +
      `viewBox="${fmt(minX - pad)} ${fmt(-maxY - pad)} ${fmt(w)} ${fmt(h)}">`,
  );
  // flip y so +y points up in the figure
  parts.push(`<g transform="scale(1,-1)">`);
  parts.push(`<rect x="${fmt(minX - pad)}" y="${fmt(minY - pad)}" width="${fmt(w)}" height="${fmt(h)}" fill="white"/>`);
  for (const r of scene.robots) {
    parts.push(
      `<circle cx="${fmt(r.base[0])}" cy="${fmt(r.base[1])}" r="${fmt(scene.outerRadius)}" ` +
        `fill="#dddddd" fill-opacity="0.35" stroke="none"/>`,
    );
    parts.push(
      `<circle cx="${fmt(r.base[0])}" cy="${fmt(r.base[1])}" r="${fmt(scene.innerRadius)}" ` +
        `fill="white" stroke="none"/>`,
    );
  }
  for (const r of scene.robots) {
    if (r.trail.length > 1) {
      const pts = r.trail.map((p) => `${fmt(p[0])},${fmt(p[1])}`).join(" ");
      parts.push(`<polyline points="${pts}" fill="none" stroke="#999999" stroke-width="0.3"/>`);
    }
  }
  for (const r of scene.robots) {
    const color = r.onTarget ? "#c8a250" : "#3a6ea5";
    parts.push(
      `<line x1="${fmt(r.base[0])}" y1="${fmt(r.base[1])}" x2="${fmt(r.elbow[0])}" ` +
        `y2="${fmt(r.elbow[1])}" stroke="#444444" stroke-width="1.2" stroke-linecap="round"/>`,
    );
    parts.push(
      `<line x1="${fmt(r.elbow[0])}" y1="${fmt(r.elbow[1])}" x2="${fmt(r.fiber[0])}" ` +
        `y2="${fmt(r.fiber[1])}" stroke="${color}" stroke-width="${fmt(2 * scene.armHalfWidth)}" ` +
        `stroke-linecap="round" stroke-opacity="0.75"/>`,
    );
    parts.push(
      `<circle cx="${fmt(r.fiber[0])}" cy="${fmt(r.fiber[1])}" r="0.9" fill="white" ` +
        `stroke="#222222" stroke-width="0.25"/>`,
    );
  }
  for (const t of scene.targets) {
    parts.push(
      `<path d="M ${fmt(t[0])} ${fmt(t[1] + 1.4)} L ${fmt(t[0] + 0.5)} ${fmt(t[1] + 0.45)} ` +
        `L ${fmt(t[0] + 1.4)} ${fmt(t[1] + 0.45)} L ${fmt(t[0] + 0.65)} ${fmt(t[1] - 0.25)} ` +
        `L ${fmt(t[0] + 0.95)} ${fmt(t[1] - 1.15)} L ${fmt(t[0])} ${fmt(t[1] - 0.55)} ` +
        `L ${fmt(t[0] - 0.95)} ${fmt(t[1] - 1.15)} L ${fmt(t[0] - 0.65)} ${fmt(t[1] - 0.25)} ` +
        `L ${fmt(t[0] - 1.4)} ${fmt(t[1] + 0.45)} L ${fmt(t[0] - 0.5)} ${fmt(t[1] + 0.45)} Z" ` +
        `fill="#b03030"/>`,
    );
  }
  parts.push("</g>");
  parts.push("</svg>");
  return parts.join("\n");
}
