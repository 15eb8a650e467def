/** Adam with the usual defaults (lr 1e-3, betas 0.9/0.999, eps 1e-8). */

import { Param } from "./layers";

export class Adam {
  private m: Float32Array[];
  private v: Float32Array[];
  private t = 0;

  constructor(private params: Param[], public lr = 1e-3,
              public beta1 = 0.9, public beta2 = 0.999, public eps = 1e-8) {
    this.m = params.map((p) => new Float32Array(p.data.length));
    this.v = params.map((p) => new Float32Array(p.data.length));
  }

  zeroGrad(): void {
    for (const p of this.params) p.grad.fill(0);
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (let k = 0; k < this.params.length; k++) {
      const { data, grad } = this.params[k];
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < data.length; i++) {
        const g = grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        data[i] -= this.lr * (m[i] / c1) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}
