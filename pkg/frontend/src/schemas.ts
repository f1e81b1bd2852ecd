/**
 * Validated shapes of the planner's file formats: the campaign summary CSV,
 * trajectory JSON, layout JSON, and the target listing emitted by `solve`.
 */

import { z } from "zod";

export const SummaryRow = z.object({
  n_robots: z.number().int().positive(),
  cbuff_mm: z.number().nonnegative(),
  step_deg: z.number().positive(),
  algorithm: z.string().min(1),
  greed: z.number().min(0).max(1),
  phobia: z.number().min(0).max(1),
  n_trials: z.number().int().positive(),
  eff_mean: z.number(),
  eff_min: z.number(),
  eff_q1: z.number(),
  eff_median: z.number(),
  eff_q3: z.number(),
  eff_whisker_lo: z.number(),
  eff_whisker_hi: z.number(),
  fold_mean_s: z.number(),
  fold_q1_s: z.number(),
  fold_median_s: z.number(),
  fold_q3_s: z.number(),
  fold_whisker_lo_s: z.number(),
  fold_whisker_hi_s: z.number(),
});
export type SummaryRow = z.infer<typeof SummaryRow>;

const waypoint = z.tuple([z.number(), z.number()]); // (time_s, angle_deg)

export const TrajectoryDoc = z.object({
  step_deg: z.number().positive(),
  axis_speed_deg_s: z.number().positive(),
  stage: z.enum(["raw", "smoothed", "simplified"]),
  robots: z.array(
    z.object({
      index: z.number().int().nonnegative(),
      alpha: z.array(waypoint).min(1),
      beta: z.array(waypoint).min(1),
    }),
  ),
});
export type TrajectoryDoc = z.infer<typeof TrajectoryDoc>;

export const LayoutDoc = z.object({
  pitch: z.number().positive(),
  alpha_len: z.number().positive(),
  beta_len: z.number().positive(),
  cbuff: z.number().nonnegative(),
  robots: z.array(
    z.object({
      index: z.number().int().nonnegative(),
      x: z.number(),
      y: z.number(),
    }),
  ),
  neighbors: z.array(z.array(z.number().int().nonnegative())),
});
export type LayoutDoc = z.infer<typeof LayoutDoc>;

/** Per-robot (alpha_deg, beta_deg) target poses keyed by robot index. */
export const TargetsDoc = z.record(z.string(), z.tuple([z.number(), z.number()]));
export type TargetsDoc = z.infer<typeof TargetsDoc>;

export class SchemaError extends Error {}

export function parseOrSchemaError<T>(schema: z.ZodType<T>, value: unknown, what: string): T {
  const result = schema.safeParse(value);
  if (!result.success) {
    const first = result.error.issues[0];
    const where = first ? ` at ${first.path.join(".") || "(root)"}: ${first.message}` : "";
    throw new SchemaError(`${what} failed validation${where}`);
  }
  return result.data;
}
