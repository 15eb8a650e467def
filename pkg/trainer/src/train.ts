/** Training entry point.
 *
 *   node dist/train.js --data maps.pxom --out model.json [options]
 *
 * Options: --epochs N, --batch N, --lr F, --seed N, --val-frac F,
 * --gray-only, --blocks N, --convs N, --growth N, --hidden N,
 * --dropout F, --limit N, --curve path.csv
 */

import * as fs from "fs";

import { Adam } from "./adam";
import { Dataset, trainValSplit } from "./data";
import { angularLoss, angleDegrees } from "./loss";
import { DEFAULT_CONFIG, Net, NetConfig, saveModel } from "./net";
import { Rng } from "./rng";

export interface TrainOptions {
  data: string;
  out: string;
  curve?: string;
  epochs: number;
  batch: number;
  lr: number;
  seed: number;
  valFrac: number;
  grayOnly: boolean;
  limit?: number;
  net: Partial<NetConfig>;
  log?: (line: string) => void;
}

export interface TrainResult {
  net: Net;
  history: { epoch: number; trainDeg: number; valDeg: number }[];
  paramCount: number;
}

export function evaluateMae(net: Net, ds: Dataset, indices: Int32Array,
                            batch: number): number {
  net.training = false;
  let total = 0;
  for (let start = 0; start < indices.length; start += batch) {
    const idx = indices.slice(start, Math.min(start + batch, indices.length));
    const { x, y } = ds.batch(idx);
    const out = net.forward(x, idx.length);
    // renormalize predictions before scoring
    for (let i = 0; i < idx.length; i++) {
      const o = i * 3;
      const r = Math.max(Math.hypot(out[o], out[o + 1], out[o + 2]), 1e-12);
      out[o] /= r; out[o + 1] /= r; out[o + 2] /= r;
      total += angleDegrees(out, o, y, o);
    }
  }
  return total / indices.length;
}

export function train(opts: TrainOptions): TrainResult {
  const log = opts.log ?? ((line: string) => console.log(line));
  const ds = new Dataset(opts.data, { grayOnly: opts.grayOnly, limit: opts.limit });
  const cfg: NetConfig = {
    ...DEFAULT_CONFIG,
    ...opts.net,
    d: ds.d,
    channels: ds.channels,
    seed: opts.seed,
  };
  const net = new Net(cfg);
  const paramCount = net.paramCount();
  log(`records=${ds.count} d=${ds.d} channels=${ds.channels} params=${paramCount}`);

  const { train: trainIdx, val: valIdx } = trainValSplit(ds.count, opts.valFrac,
                                                         opts.seed);
  const optimizer = new Adam(net.params(), opts.lr);
  const shuffler = new Rng(opts.seed ^ 0x77aa11);
  const history: TrainResult["history"] = [];

  for (let epoch = 1; epoch <= opts.epochs; epoch++) {
    const t0 = Date.now();
    net.training = true;
    const order = trainIdx.slice();
    shuffler.shuffle(order);
    let lossSum = 0;
    let batches = 0;
    for (let start = 0; start < order.length; start += opts.batch) {
      const idx = order.slice(start, Math.min(start + opts.batch, order.length));
      const { x, y } = ds.batch(idx);
      optimizer.zeroGrad();
      const out = net.forward(x, idx.length);
      const { loss, grad } = angularLoss(out, y, idx.length);
      net.backward(grad);
      optimizer.step();
      lossSum += loss * (180 / Math.PI);
      batches += 1;
    }
    const trainDeg = lossSum / Math.max(batches, 1);
    const valDeg = evaluateMae(net, ds, valIdx, opts.batch);
    history.push({ epoch, trainDeg, valDeg });
    log(`epoch ${epoch}: train ${trainDeg.toFixed(3)} deg, ` +
        `val ${valDeg.toFixed(3)} deg, ${(Date.now() - t0) / 1000}s`);
  }

  fs.writeFileSync(opts.out, JSON.stringify(saveModel(net)));
  if (opts.curve) {
    const rows = ["epoch,train_deg,val_deg"];
    for (const h of history) {
      rows.push(`${h.epoch},${h.trainDeg.toFixed(5)},${h.valDeg.toFixed(5)}`);
    }
    fs.writeFileSync(opts.curve, rows.join("\n") + "\n");
  }
  ds.close();
  return { net, history, paramCount };
}

function parseArgs(argv: string[]): TrainOptions {
  const opts: TrainOptions = {
    data: "", out: "model.json", epochs: 5, batch: 128, lr: 1e-3,
    seed: 0, valFrac: 0.1, grayOnly: false, net: {},
  };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    const next = () => argv[++i];
    switch (a) {
      case "--data": opts.data = next(); break;
      case "--out": opts.out = next(); break;
      case "--curve": opts.curve = next(); break;
      case "--epochs": opts.epochs = parseInt(next(), 10); break;
      case "--batch": opts.batch = parseInt(next(), 10); break;
      case "--lr": opts.lr = parseFloat(next()); break;
      case "--seed": opts.seed = parseInt(next(), 10); break;
      case "--val-frac": opts.valFrac = parseFloat(next()); break;
      case "--gray-only": opts.grayOnly = true; break;
      case "--limit": opts.limit = parseInt(next(), 10); break;
      case "--blocks": opts.net.blocks = parseInt(next(), 10); break;
      case "--convs": opts.net.convsPerBlock = parseInt(next(), 10); break;
      case "--growth": opts.net.growth = parseInt(next(), 10); break;
      case "--hidden": opts.net.hidden = parseInt(next(), 10); break;
      case "--dropout": opts.net.dropout = parseFloat(next()); break;
      default:
        throw new Error(`unknown flag ${a}`);
    }
  }
  if (!opts.data) throw new Error("--data is required");
  return opts;
}

if (require.main === module) {
  try {
    train(parseArgs(process.argv.slice(2)));
  } catch (err) {
    console.error(`train: ${(err as Error).message}`);
    process.exit(1);
  }
}
