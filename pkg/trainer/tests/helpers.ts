/** Shared test utilities: a tiny in-test observation-map generator for
 * Lambertian pixels, mirroring the dataset contract the toolkit emits. */

import * as os from "os";
import * as path from "path";

import { writePxom } from "../src/formats";
import { Rng } from "../src/rng";

export function hemisphereDir(rng: Rng, maxElevRad: number): [number, number, number] {
  const z = rng.uniform(Math.cos(maxElevRad), 1);
  const az = rng.uniform(0, 2 * Math.PI);
  const s = Math.sqrt(Math.max(0, 1 - z * z));
  return [s * Math.cos(az), s * Math.sin(az), z];
}

export function lambertianMap(d: number, normal: [number, number, number],
                              albedo: [number, number, number],
                              lights: [number, number, number][]): Float32Array {
  const map = new Float32Array(d * d * 4);
  const grays: { cell: number; gray: number }[] = [];
  for (const l of lights) {
    const nl = Math.max(0, normal[0] * l[0] + normal[1] * l[1] + normal[2] * l[2]);
    const u = Math.min(Math.floor(d * (l[0] + 1) / 2), d - 1);
    const v = Math.min(Math.floor(d * (l[1] + 1) / 2), d - 1);
    const cell = (u * d + v) * 4;
    let gray = 0;
    for (let c = 0; c < 3; c++) {
      const val = albedo[c] * nl;
      map[cell + c] = val;
      gray += val;
    }
    map[cell + 3] = gray;
    grays.push({ cell, gray });
  }
  const gmax = Math.max(...grays.map((g) => g.gray));
  if (gmax > 0) {
    for (const { cell } of grays) map[cell + 3] = map[cell + 3] / gmax;
  }
  return map;
}

export interface SynthOptions {
  n: number;
  d: number;
  lightsPerRecord?: number;
  seed?: number;
}

export function makeLambertianDataset(opts: SynthOptions): string {
  const rng = new Rng(opts.seed ?? 1);
  const j = opts.lightsPerRecord ?? 40;
  const maps: Float32Array[] = [];
  const normals: Float32Array[] = [];
  for (let i = 0; i < opts.n; i++) {
    const normal = hemisphereDir(rng, Math.PI / 2);
    const albedo: [number, number, number] = [
      rng.uniform(0.2, 1), rng.uniform(0.2, 1), rng.uniform(0.2, 1)];
    const lights: [number, number, number][] = [];
    for (let k = 0; k < j; k++) lights.push(hemisphereDir(rng, (70 * Math.PI) / 180));
    maps.push(lambertianMap(opts.d, normal, albedo, lights));
    normals.push(new Float32Array(normal));
  }
  const file = path.join(os.tmpdir(),
    `synth-${process.pid}-${opts.seed ?? 1}-${opts.n}-${opts.d}.pxom`);
  writePxom(file, opts.d, 4, maps, normals);
  return file;
}
