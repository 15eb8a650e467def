/** Dense-block convolutional regressor from observation maps to normals.
 *
 * Each block stacks 3x3 convolutions whose inputs are the channel
 * concatenation of everything produced so far in the block (DenseNet
 * style); blocks are separated by 2x2 max pooling and dropout, and two
 * fully connected layers regress the 3-vector, which consumers
 * renormalize.  The default configuration is deliberately small; the
 * published-scale regime (4 blocks / 16 convolutions / millions of
 * parameters) is reachable through the same knobs.
 */

import { Adam } from "./adam";
import { Conv3x3, Dense, Dropout, MaxPool2, Param, Relu,
         concatChannels, splitChannelsInto } from "./layers";
import { Rng } from "./rng";

export interface NetConfig {
  d: number;               // map side
  channels: number;        // input channels (4, or 1 for gray-only)
  blocks: number;          // dense-block count
  convsPerBlock: number;
  growth: number;          // filters added per convolution
  hidden: number;          // width of the first fully connected layer
  dropout: number;
  seed: number;
}

export const DEFAULT_CONFIG: NetConfig = {
  d: 32,
  channels: 4,
  blocks: 2,
  convsPerBlock: 2,
  growth: 8,
  hidden: 64,
  dropout: 0.05,
  seed: 0,
};

interface BlockState {
  convs: Conv3x3[];
  relus: Relu[];
  chunks: Float32Array[];
  channels: number[];
  h: number;
  w: number;
}

export class Net {
  readonly cfg: NetConfig;
  readonly convs: Conv3x3[][] = [];
  readonly pools: MaxPool2[] = [];
  readonly drops: Dropout[] = [];
  readonly fc1: Dense;
  readonly fc2: Dense;
  readonly fcRelu = new Relu();
  private blockStates: BlockState[] = [];
  private lastN = 0;
  private flatDim: number;
  training = false;

  constructor(cfg: NetConfig) {
    this.cfg = { ...cfg };
    const rng = new Rng(cfg.seed ^ 0x5eed);
    let c = cfg.channels;
    let side = cfg.d;
    for (let b = 0; b < cfg.blocks; b++) {
      const blockConvs: Conv3x3[] = [];
      let cin = c;
      for (let i = 0; i < cfg.convsPerBlock; i++) {
        blockConvs.push(new Conv3x3(cin, cfg.growth, rng, `b${b}.conv${i}`));
        cin += cfg.growth;
      }
      this.convs.push(blockConvs);
      c = cin;
      this.pools.push(new MaxPool2());
      this.drops.push(new Dropout(cfg.dropout, new Rng(cfg.seed ^ (b * 7919 + 13))));
      side = side >> 1;
    }
    this.flatDim = side * side * c;
    this.fc1 = new Dense(this.flatDim, cfg.hidden, rng, "fc1");
    this.fc2 = new Dense(cfg.hidden, 3, rng, "fc2");
    // start the raw output near the apex so the renormalized prediction
    // is well-defined from the first step
    this.fc2.bias.data[2] = 1.0;
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const block of this.convs) {
      for (const conv of block) out.push(...conv.params());
    }
    out.push(...this.fc1.params(), ...this.fc2.params());
    return out;
  }

  paramCount(): number {
    return this.params().reduce((acc, p) => acc + p.data.length, 0);
  }

  forward(x: Float32Array, n: number): Float32Array {
    const cfg = this.cfg;
    this.lastN = n;
    this.blockStates = [];
    let cur = x;
    let c = cfg.channels;
    let h = cfg.d;
    let w = cfg.d;
    for (let b = 0; b < cfg.blocks; b++) {
      const pixels = n * h * w;
      const chunks = [cur];
      const channels = [c];
      const relus: Relu[] = [];
      for (let i = 0; i < cfg.convsPerBlock; i++) {
        const cat = chunks.length === 1 ? chunks[0]
          : concatChannels(chunks, channels, pixels);
        const conv = this.convs[b][i];
        const relu = new Relu();
        const y = relu.forward(conv.forward(cat, n, h, w));
        relus.push(relu);
        chunks.push(y);
        channels.push(cfg.growth);
      }
      this.blockStates.push({ convs: this.convs[b], relus, chunks,
                              channels: [...channels], h, w });
      const catAll = concatChannels(chunks, channels, pixels);
      c = channels.reduce((a2, b2) => a2 + b2, 0);
      cur = this.pools[b].forward(catAll, n, h, w, c);
      h >>= 1;
      w >>= 1;
      cur = this.drops[b].forward(cur, this.training);
    }
    const hid = this.fcRelu.forward(this.fc1.forward(cur, n));
    return this.fc2.forward(hid, n);
  }

  backward(dOut: Float32Array): void {
    const cfg = this.cfg;
    const n = this.lastN;
    let grad = this.fc1.backward(this.fcRelu.backward(this.fc2.backward(dOut)));
    for (let b = cfg.blocks - 1; b >= 0; b--) {
      grad = this.drops[b].backward(grad);
      grad = this.pools[b].backward(grad);
      const state = this.blockStates[b];
      const pixels = n * state.h * state.w;
      const accs = state.chunks.map((chunk) => new Float32Array(chunk.length));
      splitChannelsInto(grad, state.channels, pixels, accs);
      for (let i = cfg.convsPerBlock - 1; i >= 0; i--) {
        const dy = state.relus[i].backward(accs[i + 1]);
        const dCat = state.convs[i].backward(dy, n, state.h, state.w);
        if (i === 0) {
          for (let j = 0; j < dCat.length; j++) accs[0][j] += dCat[j];
        } else {
          splitChannelsInto(dCat, state.channels.slice(0, i + 1), pixels, accs);
        }
      }
      grad = accs[0];
    }
  }
}

export interface ModelFile {
  format: "obsmap-trainer-model";
  version: 1;
  config: NetConfig;
  params: { name: string; length: number; b64: string }[];
}

export function saveModel(net: Net): ModelFile {
  return {
    format: "obsmap-trainer-model",
    version: 1,
    config: net.cfg,
    params: net.params().map((p) => ({
      name: p.name,
      length: p.data.length,
      b64: Buffer.from(p.data.buffer, p.data.byteOffset,
                       p.data.byteLength).toString("base64"),
    })),
  };
}

export function loadModel(file: ModelFile): Net {
  if (file.format !== "obsmap-trainer-model" || file.version !== 1) {
    throw new Error("unrecognized model file");
  }
  const net = new Net(file.config);
  const params = net.params();
  if (params.length !== file.params.length) {
    throw new Error("model parameter list mismatch");
  }
  for (let i = 0; i < params.length; i++) {
    const stored = file.params[i];
    if (stored.name !== params[i].name || stored.length !== params[i].data.length) {
      throw new Error(`parameter ${stored.name} incompatible with architecture`);
    }
    const raw = Buffer.from(stored.b64, "base64");
    params[i].data.set(new Float32Array(raw.buffer, raw.byteOffset,
                                        stored.length));
  }
  return net;
}
