import { describe, expect, it } from "vitest";

import { angleDegrees, angularLoss } from "../src/loss";
import { Rng } from "../src/rng";

function unit(v: [number, number, number]): [number, number, number] {
  const r = Math.hypot(v[0], v[1], v[2]);
  return [v[0] / r, v[1] / r, v[2] / r];
}

describe("angularLoss", () => {
  it("is zero for a perfect prediction", () => {
    const t = new Float32Array([0, 0, 1]);
    const { loss } = angularLoss(new Float32Array([0, 0, 2]), t, 1);
    expect(loss).toBeCloseTo(0, 6);
  });

  it("matches known angles", () => {
    const t = new Float32Array([0, 0, 1]);
    const o = new Float32Array([1, 0, 0]);
    expect(angularLoss(o, t, 1).loss).toBeCloseTo(Math.PI / 2, 10);
    const diag = new Float32Array(unit([1, 0, 1]));
    expect(angularLoss(diag, t, 1).loss).toBeCloseTo(Math.PI / 4, 10);
  });

  it("gradient matches central finite differences", () => {
    // 10 random points away from the 0/180 degree singularities
    const rng = new Rng(3);
    let checked = 0;
    while (checked < 10) {
      const t = new Float32Array(unit([rng.normal(), rng.normal(), rng.normal()]));
      const o = new Float32Array([rng.uniform(-1, 1) * 2,
                                  rng.uniform(-1, 1) * 2,
                                  rng.uniform(-1, 1) * 2]);
      const base = angularLoss(o, t, 1);
      const deg = base.degrees[0];
      if (deg < 5 || deg > 175) continue;
      for (let k = 0; k < 3; k++) {
        const eps = 1e-4;
        const plus = Float32Array.from(o);
        plus[k] += eps;
        const minus = Float32Array.from(o);
        minus[k] -= eps;
        const fd = (angularLoss(plus, t, 1).loss - angularLoss(minus, t, 1).loss)
          / (2 * eps);
        const scale = Math.max(Math.abs(fd), Math.abs(base.grad[k]), 1e-8);
        expect(Math.abs(base.grad[k] - fd) / scale).toBeLessThan(1e-3);
      }
      checked++;
    }
  });

  it("stays finite at the zero-error singularity", () => {
    const t = new Float32Array([0, 0, 1]);
    const { loss, grad } = angularLoss(new Float32Array([0, 0, 1]), t, 1);
    expect(Number.isFinite(loss)).toBe(true);
    for (const g of grad) expect(Number.isFinite(g)).toBe(true);
  });

  it("averages over the batch", () => {
    const t = new Float32Array([0, 0, 1, 0, 0, 1]);
    const o = new Float32Array([1, 0, 0, 0, 0, 1]);
    expect(angularLoss(o, t, 2).loss).toBeCloseTo(Math.PI / 4, 10);
  });
});

describe("angleDegrees", () => {
  it("agrees with the loss on stored vectors", () => {
    const a = new Float32Array([0, 0, 1]);
    const b = new Float32Array(unit([0, 1, 1]));
    expect(angleDegrees(a, 0, b, 0)).toBeCloseTo(45, 5);
  });
});
