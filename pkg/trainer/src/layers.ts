/** Minimal NHWC neural-net layers with explicit forward/backward passes.
 *
 * Activations are flat Float32Arrays in [n][h][w][c] order; convolutions
 * run as im2col plus a small hand-rolled GEMM, which is plenty for the
 * desk-scale networks this trainer targets.
 */

import { Rng } from "./rng";

export interface Param {
  name: string;
  data: Float32Array;
  grad: Float32Array;
}

export function makeParam(name: string, size: number): Param {
  return { name, data: new Float32Array(size), grad: new Float32Array(size) };
}

/** c[m,n] = a[m,k] @ b[k,n] */
export function matmul(a: Float32Array, b: Float32Array,
                       m: number, k: number, n: number): Float32Array {
  const out = new Float32Array(m * n);
  for (let i = 0; i < m; i++) {
    const arow = i * k;
    const orow = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[arow + p];
      if (av === 0) continue;
      const brow = p * n;
      for (let j = 0; j < n; j++) {
        out[orow + j] += av * b[brow + j];
      }
    }
  }
  return out;
}

/** c[k,n] += a^T[k,m] @ b[m,n]  (a stored as [m,k]) */
export function matmulTA(a: Float32Array, b: Float32Array,
                         m: number, k: number, n: number,
                         out: Float32Array): void {
  for (let i = 0; i < m; i++) {
    const arow = i * k;
    const brow = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[arow + p];
      if (av === 0) continue;
      const orow = p * n;
      for (let j = 0; j < n; j++) {
        out[orow + j] += av * b[brow + j];
      }
    }
  }
}

/** c[m,k] = a[m,n] @ b^T[n,k]  (b stored as [k,n]) */
export function matmulTB(a: Float32Array, b: Float32Array,
                         m: number, n: number, k: number): Float32Array {
  const out = new Float32Array(m * k);
  for (let i = 0; i < m; i++) {
    const arow = i * n;
    const orow = i * k;
    for (let p = 0; p < k; p++) {
      const brow = p * n;
      let acc = 0;
      for (let j = 0; j < n; j++) {
        acc += a[arow + j] * b[brow + j];
      }
      out[orow + p] = acc;
    }
  }
  return out;
}

/** 3x3 same-padding convolution, stride 1. */
export class Conv3x3 {
  readonly weight: Param;   // (9*cin, cout)
  readonly bias: Param;     // (cout)
  private cols: Float32Array | null = null;
  private lastN = 0;

  constructor(public cin: number, public cout: number, rng: Rng, name: string) {
    this.weight = makeParam(`${name}.w`, 9 * cin * cout);
    this.bias = makeParam(`${name}.b`, cout);
    const std = Math.sqrt(2 / (9 * cin));
    for (let i = 0; i < this.weight.data.length; i++) {
      this.weight.data[i] = rng.normal() * std;
    }
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }

  private im2col(x: Float32Array, n: number, h: number, w: number): Float32Array {
    const { cin } = this;
    const cols = new Float32Array(n * h * w * 9 * cin);
    let idx = 0;
    for (let img = 0; img < n; img++) {
      const base = img * h * w * cin;
      for (let y = 0; y < h; y++) {
        for (let x0 = 0; x0 < w; x0++) {
          for (let ky = -1; ky <= 1; ky++) {
            const yy = y + ky;
            const inRow = yy >= 0 && yy < h;
            for (let kx = -1; kx <= 1; kx++) {
              const xx = x0 + kx;
              if (inRow && xx >= 0 && xx < w) {
                const src = base + (yy * w + xx) * cin;
                for (let c = 0; c < cin; c++) cols[idx++] = x[src + c];
              } else {
                idx += cin;
              }
            }
          }
        }
      }
    }
    return cols;
  }

  forward(x: Float32Array, n: number, h: number, w: number): Float32Array {
    this.cols = this.im2col(x, n, h, w);
    this.lastN = n;
    const rows = n * h * w;
    const out = matmul(this.cols, this.weight.data, rows, 9 * this.cin, this.cout);
    for (let r = 0; r < rows; r++) {
      const off = r * this.cout;
      for (let c = 0; c < this.cout; c++) out[off + c] += this.bias.data[c];
    }
    return out;
  }

  backward(dOut: Float32Array, n: number, h: number, w: number): Float32Array {
    const rows = n * h * w;
    const kdim = 9 * this.cin;
    matmulTA(this.cols!, dOut, rows, kdim, this.cout, this.weight.grad);
    for (let r = 0; r < rows; r++) {
      const off = r * this.cout;
      for (let c = 0; c < this.cout; c++) this.bias.grad[c] += dOut[off + c];
    }
    const dCols = matmulTB(dOut, this.weight.data, rows, this.cout, kdim);
    // col2im: scatter-add the column gradients back onto the input grid
    const dx = new Float32Array(n * h * w * this.cin);
    let idx = 0;
    for (let img = 0; img < n; img++) {
      const base = img * h * w * this.cin;
      for (let y = 0; y < h; y++) {
        for (let x0 = 0; x0 < w; x0++) {
          for (let ky = -1; ky <= 1; ky++) {
            const yy = y + ky;
            const inRow = yy >= 0 && yy < h;
            for (let kx = -1; kx <= 1; kx++) {
              const xx = x0 + kx;
              if (inRow && xx >= 0 && xx < w) {
                const dst = base + (yy * w + xx) * this.cin;
                for (let c = 0; c < this.cin; c++) dx[dst + c] += dCols[idx++];
              } else {
                idx += this.cin;
              }
            }
          }
        }
      }
    }
    this.cols = null;
    return dx;
  }
}

export class Relu {
  private mask: Uint8Array | null = null;

  forward(x: Float32Array): Float32Array {
    const out = new Float32Array(x.length);
    const mask = new Uint8Array(x.length);
    for (let i = 0; i < x.length; i++) {
      if (x[i] > 0) {
        out[i] = x[i];
        mask[i] = 1;
      }
    }
    this.mask = mask;
    return out;
  }

  backward(dOut: Float32Array): Float32Array {
    const dx = new Float32Array(dOut.length);
    const mask = this.mask!;
    for (let i = 0; i < dOut.length; i++) if (mask[i]) dx[i] = dOut[i];
    return dx;
  }
}

/** 2x2 max pooling, stride 2 (even inputs). */
export class MaxPool2 {
  private argmax: Int32Array | null = null;
  private inLen = 0;

  forward(x: Float32Array, n: number, h: number, w: number, c: number): Float32Array {
    const oh = h >> 1;
    const ow = w >> 1;
    const out = new Float32Array(n * oh * ow * c);
    const argmax = new Int32Array(out.length);
    for (let img = 0; img < n; img++) {
      for (let y = 0; y < oh; y++) {
        for (let x0 = 0; x0 < ow; x0++) {
          for (let ch = 0; ch < c; ch++) {
            let best = -Infinity;
            let bestIdx = -1;
            for (let dy = 0; dy < 2; dy++) {
              for (let dx = 0; dx < 2; dx++) {
                const src = ((img * h + 2 * y + dy) * w + 2 * x0 + dx) * c + ch;
                if (x[src] > best) {
                  best = x[src];
                  bestIdx = src;
                }
              }
            }
            const dst = ((img * oh + y) * ow + x0) * c + ch;
            out[dst] = best;
            argmax[dst] = bestIdx;
          }
        }
      }
    }
    this.argmax = argmax;
    this.inLen = x.length;
    return out;
  }

  backward(dOut: Float32Array): Float32Array {
    const dx = new Float32Array(this.inLen);
    const argmax = this.argmax!;
    for (let i = 0; i < dOut.length; i++) dx[argmax[i]] += dOut[i];
    return dx;
  }
}

/** Inverted dropout; identity when not training. */
export class Dropout {
  private mask: Float32Array | null = null;

  constructor(public p: number, private rng: Rng) {}

  forward(x: Float32Array, training: boolean): Float32Array {
    if (!training || this.p <= 0) {
      this.mask = null;
      return x;
    }
    const keep = 1 - this.p;
    const out = new Float32Array(x.length);
    const mask = new Float32Array(x.length);
    for (let i = 0; i < x.length; i++) {
      if (this.rng.float() < keep) {
        mask[i] = 1 / keep;
        out[i] = x[i] * mask[i];
      }
    }
    this.mask = mask;
    return out;
  }

  backward(dOut: Float32Array): Float32Array {
    if (!this.mask) return dOut;
    const dx = new Float32Array(dOut.length);
    for (let i = 0; i < dOut.length; i++) dx[i] = dOut[i] * this.mask[i];
    return dx;
  }
}

export class Dense {
  readonly weight: Param;   // (cin, cout)
  readonly bias: Param;
  private x: Float32Array | null = null;
  private lastN = 0;

  constructor(public cin: number, public cout: number, rng: Rng, name: string) {
    this.weight = makeParam(`${name}.w`, cin * cout);
    this.bias = makeParam(`${name}.b`, cout);
    const std = Math.sqrt(2 / cin);
    for (let i = 0; i < this.weight.data.length; i++) {
      this.weight.data[i] = rng.normal() * std;
    }
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }

  forward(x: Float32Array, n: number): Float32Array {
    this.x = x;
    this.lastN = n;
    const out = matmul(x, this.weight.data, n, this.cin, this.cout);
    for (let r = 0; r < n; r++) {
      const off = r * this.cout;
      for (let c = 0; c < this.cout; c++) out[off + c] += this.bias.data[c];
    }
    return out;
  }

  backward(dOut: Float32Array): Float32Array {
    const n = this.lastN;
    matmulTA(this.x!, dOut, n, this.cin, this.cout, this.weight.grad);
    for (let r = 0; r < n; r++) {
      const off = r * this.cout;
      for (let c = 0; c < this.cout; c++) this.bias.grad[c] += dOut[off + c];
    }
    return matmulTB(dOut, this.weight.data, n, this.cout, this.cin);
  }
}

/** Channel-axis concatenation of NHWC chunk lists. */
export function concatChannels(chunks: Float32Array[], channels: number[],
                               pixels: number): Float32Array {
  const total = channels.reduce((a, b) => a + b, 0);
  const out = new Float32Array(pixels * total);
  let coff = 0;
  for (let k = 0; k < chunks.length; k++) {
    const c = channels[k];
    const src = chunks[k];
    for (let p = 0; p < pixels; p++) {
      const dst = p * total + coff;
      const s = p * c;
      for (let i = 0; i < c; i++) out[dst + i] = src[s + i];
    }
    coff += c;
  }
  return out;
}

/** Split a concatenated gradient back into per-chunk gradients, adding
 * into the provided accumulators. */
export function splitChannelsInto(dCat: Float32Array, channels: number[],
                                  pixels: number, accs: Float32Array[]): void {
  const total = channels.reduce((a, b) => a + b, 0);
  let coff = 0;
  for (let k = 0; k < channels.length; k++) {
    const c = channels[k];
    const acc = accs[k];
    for (let p = 0; p < pixels; p++) {
      const src = p * total + coff;
      const d = p * c;
      for (let i = 0; i < c; i++) acc[d + i] += dCat[src + i];
    }
    coff += c;
  }
}
