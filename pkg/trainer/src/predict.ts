/** Predictor-exchange entry point:
 *
 *   node dist/predict.js model.json input.pxom output.pxnm
 *
 * Reads every map of the input file, regresses normals, renormalizes
 * them, and writes a 1 x P normal map in record order.  Inference is
 * deterministic (dropout inactive).
 */

import * as fs from "fs";

import { Dataset } from "./data";
import { writePxnm } from "./formats";
import { loadModel, ModelFile, Net } from "./net";

export function predictFile(net: Net, inputPath: string, outputPath: string,
                            batch = 256): number {
  const grayOnly = net.cfg.channels === 1;
  const ds = new Dataset(inputPath, { grayOnly });
  if (ds.d !== net.cfg.d || ds.channels !== net.cfg.channels) {
    throw new Error(
      `model incompatible: expects d=${net.cfg.d} channels=${net.cfg.channels}, ` +
      `dataset has d=${ds.d} channels=${ds.channels}`);
  }
  net.training = false;
  const p = ds.count;
  const normals = new Float32Array(p * 3);
  const indices = new Int32Array(batch);
  for (let start = 0; start < p; start += batch) {
    const n = Math.min(batch, p - start);
    for (let i = 0; i < n; i++) indices[i] = start + i;
    const { x } = ds.batch(indices.slice(0, n));
    const out = net.forward(x, n);
    for (let i = 0; i < n; i++) {
      const o = i * 3;
      const r = Math.hypot(out[o], out[o + 1], out[o + 2]);
      if (r > 1e-12) {
        normals[(start + i) * 3] = out[o] / r;
        normals[(start + i) * 3 + 1] = out[o + 1] / r;
        normals[(start + i) * 3 + 2] = out[o + 2] / r;
      } else {
        normals[(start + i) * 3 + 2] = 1.0;   // defined even for degenerate output
      }
    }
  }
  ds.close();
  writePxnm(outputPath, 1, p, normals);
  return p;
}

if (require.main === module) {
  const args = process.argv.slice(2);
  if (args.length !== 3) {
    console.error("usage: predict.js model.json input.pxom output.pxnm");
    process.exit(2);
  }
  try {
    const model = JSON.parse(fs.readFileSync(args[0], "utf8")) as ModelFile;
    const net = loadModel(model);
    const count = predictFile(net, args[1], args[2]);
    console.log(`predicted ${count} normals -> ${args[2]}`);
  } catch (err) {
    console.error(`predict: ${(err as Error).message}`);
    process.exit(1);
  }
}
