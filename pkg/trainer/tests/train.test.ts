import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { describe, expect, it } from "vitest";

import { Dataset, trainValSplit } from "../src/data";
import { Net, DEFAULT_CONFIG } from "../src/net";
import { evaluateMae, train } from "../src/train";
import { makeLambertianDataset } from "./helpers";

const SLOW = process.env.TRAINER_SLOW === "1";

function tmp(name: string): string {
  return path.join(os.tmpdir(), `trainer-${process.pid}-${name}`);
}

describe("training", () => {
  it("learns Lambertian map inversion far beyond the untrained net", () => {
    const data = makeLambertianDataset({ n: 2000, d: 16, seed: 21 });
    const ds = new Dataset(data);
    const { val } = trainValSplit(ds.count, 0.15, 7);
    const untrained = new Net({ ...DEFAULT_CONFIG, d: 16, channels: 4,
                                blocks: 2, convsPerBlock: 2, growth: 6,
                                hidden: 48, dropout: 0, seed: 7 });
    const before = evaluateMae(untrained, ds, val, 64);
    ds.close();

    const result = train({
      data, out: tmp("lamb.json"), curve: tmp("lamb.csv"),
      epochs: 4, batch: 64, lr: 2e-3, seed: 7, valFrac: 0.15, grayOnly: false,
      net: { blocks: 2, convsPerBlock: 2, growth: 6, hidden: 48, dropout: 0 },
      log: () => {},
    });
    const last = result.history[result.history.length - 1];
    expect(before).toBeGreaterThan(30);
    expect(last.valDeg).toBeLessThan(10);
    expect(last.valDeg).toBeLessThan(before / 3);
    // loss curve recorded, strictly finite
    const curve = fs.readFileSync(tmp("lamb.csv"), "utf8").trim().split("\n");
    expect(curve.length).toBe(1 + result.history.length);
    for (const h of result.history) {
      expect(Number.isFinite(h.trainDeg)).toBe(true);
      expect(Number.isFinite(h.valDeg)).toBe(true);
    }
    fs.unlinkSync(data);
  }, 120_000);

  it("is seed-reproducible", () => {
    const data = makeLambertianDataset({ n: 300, d: 16, seed: 22 });
    const opts = {
      data, epochs: 1, batch: 32, lr: 1e-3, seed: 5, valFrac: 0.2,
      grayOnly: false,
      net: { blocks: 1, convsPerBlock: 1, growth: 4, hidden: 16, dropout: 0.05 },
      log: () => {},
    };
    const a = train({ ...opts, out: tmp("a.json") });
    const b = train({ ...opts, out: tmp("b.json") });
    expect(a.history).toEqual(b.history);
    expect(fs.readFileSync(tmp("a.json"))).toEqual(fs.readFileSync(tmp("b.json")));
    fs.unlinkSync(data);
  }, 60_000);

  it("supports the gray-only input toggle", () => {
    const data = makeLambertianDataset({ n: 200, d: 16, seed: 23 });
    const result = train({
      data, out: tmp("gray.json"), epochs: 1, batch: 32, lr: 1e-3, seed: 1,
      valFrac: 0.2, grayOnly: true,
      net: { blocks: 1, convsPerBlock: 1, growth: 4, hidden: 16, dropout: 0 },
      log: () => {},
    });
    expect(result.net.cfg.channels).toBe(1);
    expect(Number.isFinite(result.history[0].valDeg)).toBe(true);
    fs.unlinkSync(data);
  }, 60_000);

  it.runIf(SLOW)("reaches < 3 degrees on clean Lambertian maps (slow)", () => {
    const data = makeLambertianDataset({ n: 8000, d: 16, seed: 24 });
    const result = train({
      data, out: tmp("slow.json"), epochs: 10, batch: 64, lr: 2e-3, seed: 0,
      valFrac: 0.1, grayOnly: false,
      net: { blocks: 2, convsPerBlock: 2, growth: 8, hidden: 64, dropout: 0 },
    });
    const last = result.history[result.history.length - 1];
    expect(last.valDeg).toBeLessThan(3);
    fs.unlinkSync(data);
  }, 900_000);
});
