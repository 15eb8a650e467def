/** Binary dataset contracts shared with the map-generation toolkit.
 *
 * PXOM: "PXOM", u32 version (1), u32 d, u32 channels, u64 record count,
 * then per record d*d*channels f32 map values (row-major, channel
 * interleaved) followed by 3 f32 normal components.  Little-endian.
 *
 * PXNM: "PXNM", u32 version (1), u32 H, u32 W, then H*W*3 f32 with NaN
 * triplets for masked-out pixels.
 */

import * as fs from "fs";

export const PXOM_HEADER_BYTES = 24;
export const PXNM_HEADER_BYTES = 16;

export interface PxomInfo {
  d: number;
  channels: number;
  count: number;
  recordFloats: number;
}

export function readPxomHeader(fd: number): PxomInfo {
  const head = Buffer.alloc(PXOM_HEADER_BYTES);
  const got = fs.readSync(fd, head, 0, PXOM_HEADER_BYTES, 0);
  if (got < PXOM_HEADER_BYTES) throw new Error("truncated PXOM header");
  if (head.toString("latin1", 0, 4) !== "PXOM") {
    throw new Error("bad PXOM magic");
  }
  const version = head.readUInt32LE(4);
  if (version !== 1) throw new Error(`unsupported PXOM version ${version}`);
  const d = head.readUInt32LE(8);
  const channels = head.readUInt32LE(12);
  const count = Number(head.readBigUInt64LE(16));
  return { d, channels, count, recordFloats: d * d * channels + 3 };
}

/** Random-access PXOM reader; records are fetched by index so datasets
 * far larger than memory stream through training. */
export class PxomReader {
  readonly info: PxomInfo;
  private fd: number;

  constructor(path: string) {
    this.fd = fs.openSync(path, "r");
    this.info = readPxomHeader(this.fd);
    const expected = PXOM_HEADER_BYTES + this.info.count * this.info.recordFloats * 4;
    const actual = fs.fstatSync(this.fd).size;
    if (actual < expected) {
      throw new Error(`PXOM payload short: ${actual} bytes, need ${expected}`);
    }
  }

  /** Map values and normal of one record. */
  read(index: number): { map: Float32Array; normal: Float32Array } {
    const { recordFloats } = this.info;
    if (index < 0 || index >= this.info.count) {
      throw new Error(`record ${index} out of range`);
    }
    const buf = Buffer.alloc(recordFloats * 4);
    fs.readSync(this.fd, buf, 0, buf.length,
      PXOM_HEADER_BYTES + index * recordFloats * 4);
    const all = new Float32Array(buf.buffer, buf.byteOffset, recordFloats);
    const mapFloats = recordFloats - 3;
    return {
      map: all.slice(0, mapFloats),
      normal: all.slice(mapFloats),
    };
  }

  close(): void {
    fs.closeSync(this.fd);
  }
}

export function writePxom(path: string, d: number, channels: number,
                          maps: Float32Array[], normals: Float32Array[]): void {
  const recordFloats = d * d * channels + 3;
  const buf = Buffer.alloc(PXOM_HEADER_BYTES + maps.length * recordFloats * 4);
  buf.write("PXOM", 0, "latin1");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt32LE(d, 8);
  buf.writeUInt32LE(channels, 12);
  buf.writeBigUInt64LE(BigInt(maps.length), 16);
  let off = PXOM_HEADER_BYTES;
  for (let i = 0; i < maps.length; i++) {
    if (maps[i].length !== d * d * channels || normals[i].length !== 3) {
      throw new Error(`record ${i} has wrong size`);
    }
    for (const v of maps[i]) {
      buf.writeFloatLE(v, off);
      off += 4;
    }
    for (const v of normals[i]) {
      buf.writeFloatLE(v, off);
      off += 4;
    }
  }
  fs.writeFileSync(path, buf);
}

/** One row per prediction: the exchange convention for predictor output
 * is a 1 x P normal map in record order. */
export function writePxnm(path: string, h: number, w: number,
                          normals: Float32Array): void {
  if (normals.length !== h * w * 3) {
    throw new Error(`normal buffer length ${normals.length} != ${h * w * 3}`);
  }
  const buf = Buffer.alloc(PXNM_HEADER_BYTES + normals.length * 4);
  buf.write("PXNM", 0, "latin1");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt32LE(h, 8);
  buf.writeUInt32LE(w, 12);
  for (let i = 0; i < normals.length; i++) {
    buf.writeFloatLE(normals[i], PXNM_HEADER_BYTES + i * 4);
  }
  fs.writeFileSync(path, buf);
}

export function readPxnm(path: string): { h: number; w: number; normals: Float32Array } {
  const buf = fs.readFileSync(path);
  if (buf.length < PXNM_HEADER_BYTES) throw new Error("truncated PXNM header");
  if (buf.toString("latin1", 0, 4) !== "PXNM") throw new Error("bad PXNM magic");
  const version = buf.readUInt32LE(4);
  if (version !== 1) throw new Error(`unsupported PXNM version ${version}`);
  const h = buf.readUInt32LE(8);
  const w = buf.readUInt32LE(12);
  const need = h * w * 3;
  if (buf.length < PXNM_HEADER_BYTES + need * 4) {
    throw new Error("PXNM payload short");
  }
  const normals = new Float32Array(need);
  for (let i = 0; i < need; i++) {
    normals[i] = buf.readFloatLE(PXNM_HEADER_BYTES + i * 4);
  }
  return { h, w, normals };
}
