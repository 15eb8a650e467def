/** Batched access to PXOM datasets with an optional gray-only view and a
 * seeded train/validation split. */

import { PxomReader } from "./formats";
import { Rng } from "./rng";

export class Dataset {
  readonly reader: PxomReader;
  readonly d: number;
  readonly channels: number;     // channels presented to the network
  readonly count: number;
  private grayOnly: boolean;

  constructor(path: string, opts: { grayOnly?: boolean; limit?: number } = {}) {
    this.reader = new PxomReader(path);
    this.d = this.reader.info.d;
    this.grayOnly = opts.grayOnly ?? false;
    this.channels = this.grayOnly ? 1 : this.reader.info.channels;
    this.count = opts.limit
      ? Math.min(opts.limit, this.reader.info.count)
      : this.reader.info.count;
  }

  /** Gather records into NHWC input and (n,3) target buffers. */
  batch(indices: Int32Array | number[]): { x: Float32Array; y: Float32Array } {
    const n = indices.length;
    const src = this.reader.info.channels;
    const pix = this.d * this.d;
    const x = new Float32Array(n * pix * this.channels);
    const y = new Float32Array(n * 3);
    for (let i = 0; i < n; i++) {
      const rec = this.reader.read(indices[i]);
      if (this.grayOnly) {
        for (let p = 0; p < pix; p++) {
          x[i * pix + p] = rec.map[p * src + (src - 1)];
        }
      } else {
        x.set(rec.map, i * pix * src);
      }
      y.set(rec.normal, i * 3);
    }
    return { x, y };
  }

  close(): void {
    this.reader.close();
  }
}

export function trainValSplit(count: number, valFrac: number,
                              seed: number): { train: Int32Array; val: Int32Array } {
  const order = new Int32Array(count);
  for (let i = 0; i < count; i++) order[i] = i;
  new Rng(seed ^ 0xdeadbee).shuffle(order);
  const nVal = Math.max(1, Math.floor(count * valFrac));
  return { train: order.slice(nVal), val: order.slice(0, nVal) };
}
