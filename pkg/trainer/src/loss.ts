/** Angular-error loss between regressed and ground-truth normals.
 *
 * The raw network output o is renormalized to p = o/|o| and the loss is
 * the mean of atan2(|t x p|, t . p) over the batch (radians; callers
 * report degrees).  atan2 keeps the loss well-behaved near zero error,
 * where arccos of the dot product loses precision.
 */

const EPS = 1e-12;

export interface LossResult {
  /** mean angle in radians */
  loss: number;
  /** d(loss)/d(o), same layout as the (n,3) output buffer */
  grad: Float32Array;
  /** per-sample angles in degrees */
  degrees: Float32Array;
}

export function angularLoss(output: Float32Array, targets: Float32Array,
                            n: number): LossResult {
  const grad = new Float32Array(n * 3);
  const degrees = new Float32Array(n);
  let total = 0;
  for (let i = 0; i < n; i++) {
    const o = i * 3;
    const ox = output[o], oy = output[o + 1], oz = output[o + 2];
    const tx = targets[o], ty = targets[o + 1], tz = targets[o + 2];
    const r = Math.max(Math.sqrt(ox * ox + oy * oy + oz * oz), EPS);
    const px = ox / r, py = oy / r, pz = oz / r;

    const c = tx * px + ty * py + tz * pz;
    const wx = ty * pz - tz * py;
    const wy = tz * px - tx * pz;
    const wz = tx * py - ty * px;
    const s = Math.sqrt(wx * wx + wy * wy + wz * wz);
    const theta = Math.atan2(s, c);
    total += theta;
    degrees[i] = theta * (180 / Math.PI);

    // d(theta)/dp = c * (w_hat x t) - s * t   (unit t, p)
    const si = 1 / Math.max(s, 1e-8);
    const hx = wx * si, hy = wy * si, hz = wz * si;
    let gx = c * (hy * tz - hz * ty) - s * tx;
    let gy = c * (hz * tx - hx * tz) - s * ty;
    let gz = c * (hx * ty - hy * tx) - s * tz;

    // through the normalization: dL/do = (g - (g.p) p) / r
    const gp = gx * px + gy * py + gz * pz;
    gx = (gx - gp * px) / r;
    gy = (gy - gp * py) / r;
    gz = (gz - gp * pz) / r;

    grad[o] = gx / n;
    grad[o + 1] = gy / n;
    grad[o + 2] = gz / n;
  }
  return { loss: total / n, grad, degrees };
}

/** Angle in degrees between two stored unit normals. */
export function angleDegrees(a: Float32Array, ai: number,
                             b: Float32Array, bi: number): number {
  const ax = a[ai], ay = a[ai + 1], az = a[ai + 2];
  const bx = b[bi], by = b[bi + 1], bz = b[bi + 2];
  const c = ax * bx + ay * by + az * bz;
  const wx = ay * bz - az * by;
  const wy = az * bx - ax * bz;
  const wz = ax * by - ay * bx;
  const s = Math.sqrt(wx * wx + wy * wy + wz * wz);
  return Math.atan2(s, c) * (180 / Math.PI);
}
