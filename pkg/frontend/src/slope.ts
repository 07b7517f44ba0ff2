/** Least-squares log-log slope fitting, bit-for-bit the same recipe as
 * the producer: drop nonpositive values, optionally drop the single
 * coarsest (largest-parameter) point, then ordinary least squares on
 * (log p, log v). */

export function fitSlope(
  params: number[],
  values: number[],
  discardCoarsest = true,
): number {
  let p = params.slice();
  let v = values.slice();
  const keep = v.map((x) => x > 0);
  p = p.filter((_, i) => keep[i]);
  v = v.filter((_, i) => keep[i]);
  if (discardCoarsest && p.length > 2) {
    let drop = 0;
    for (let i = 1; i < p.length; i++) {
      if (p[i] > p[drop]) drop = i;
    }
    p = p.filter((_, i) => i !== drop);
    v = v.filter((_, i) => i !== drop);
  }
  if (p.length < 2) {
    return NaN;
  }
  const x = p.map(Math.log);
  const y = v.map(Math.log);
  const xm = mean(x);
  const ym = mean(y);
  let num = 0;
  let den = 0;
  for (let i = 0; i < x.length; i++) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  return num / den;
}

function mean(a: number[]): number {
  let s = 0;
  for (const v of a) s += v;
  return s / a.length;
}

/** Which column feeds the slope fit, per diagnostic kind. */
export const SLOPE_RECIPES: Record<
  string,
  { x: string; y: string; discardCoarsest: boolean }
> = {
  limit: { x: "s", y: "distance", discardCoarsest: true },
  commutation: { x: "t", y: "distance", discardCoarsest: true },
  tangent: { x: "t", y: "distance", discardCoarsest: true },
  sensitivity: { x: "s", y: "distance", discardCoarsest: false },
};
