import { describe, expect, it } from "vitest";

import { angularLoss } from "../src/loss";
import { loadModel, Net, NetConfig, saveModel } from "../src/net";
import { Rng } from "../src/rng";

const TINY: NetConfig = {
  d: 8, channels: 4, blocks: 1, convsPerBlock: 1, growth: 2,
  hidden: 4, dropout: 0, seed: 3,
};

describe("Net", () => {
  it("reports the parameter count of its architecture", () => {
    const net = new Net(TINY);
    // conv: 9*4*2 + 2; fc1: (4*4*(4+2))*4 + 4; fc2: 4*3 + 3
    const conv = 9 * 4 * 2 + 2;
    const fc1 = 4 * 4 * 6 * 4 + 4;
    const fc2 = 4 * 3 + 3;
    expect(net.paramCount()).toBe(conv + fc1 + fc2);
  });

  it("forward is deterministic at inference", () => {
    const net = new Net(TINY);
    const rng = new Rng(9);
    const x = new Float32Array(2 * 8 * 8 * 4).map(() => rng.float());
    const a = net.forward(x, 2).slice();
    const b = net.forward(x, 2).slice();
    expect(Array.from(a)).toEqual(Array.from(b));
  });

  it("same seed builds identical nets", () => {
    const a = new Net(TINY);
    const b = new Net(TINY);
    expect(Array.from(a.params()[0].data)).toEqual(Array.from(b.params()[0].data));
  });

  it("end-to-end loss gradient matches finite differences", () => {
    const net = new Net(TINY);
    const rng = new Rng(11);
    const n = 2;
    const x = new Float32Array(n * 8 * 8 * 4).map(() => rng.float());
    const targets = new Float32Array(n * 3);
    for (let i = 0; i < n; i++) {
      const v = [rng.normal(), rng.normal(), Math.abs(rng.normal()) + 0.5];
      const r = Math.hypot(v[0], v[1], v[2]);
      targets.set([v[0] / r, v[1] / r, v[2] / r], i * 3);
    }

    const lossOf = () => angularLoss(net.forward(x, n), targets, n).loss;

    for (const p of net.params()) p.grad.fill(0);
    const out = net.forward(x, n);
    const { grad } = angularLoss(out, targets, n);
    net.backward(grad);

    const params = net.params();
    const picks: [number, number][] = [];
    const pickRng = new Rng(13);
    while (picks.length < 8) {
      const t = pickRng.int(params.length);
      picks.push([t, pickRng.int(params[t].data.length)]);
    }
    for (const [t, i] of picks) {
      const analytic = params[t].grad[i];
      const orig = params[t].data[i];
      const eps = 5e-3;
      params[t].data[i] = orig + eps;
      const up = lossOf();
      params[t].data[i] = orig - eps;
      const down = lossOf();
      params[t].data[i] = orig;
      const fd = (up - down) / (2 * eps);
      const scale = Math.max(Math.abs(fd), Math.abs(analytic), 1e-4);
      expect(Math.abs(fd - analytic) / scale).toBeLessThan(5e-2);
    }
  });

  it("save/load round-trips weights and config", () => {
    const net = new Net(TINY);
    const rng = new Rng(15);
    for (const p of net.params()) {
      for (let i = 0; i < p.data.length; i++) p.data[i] = rng.uniform(-1, 1);
    }
    const file = saveModel(net);
    const clone = loadModel(JSON.parse(JSON.stringify(file)));
    const x = new Float32Array(8 * 8 * 4).map(() => rng.float());
    expect(Array.from(clone.forward(x, 1))).toEqual(Array.from(net.forward(x, 1)));
  });

  it("rejects architecture mismatches on load", () => {
    const net = new Net(TINY);
    const file = saveModel(net);
    file.config = { ...file.config, growth: 4 };
    expect(() => loadModel(file)).toThrow(/incompatible|mismatch/);
  });
});
