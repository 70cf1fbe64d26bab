import {
  LabelVector,
  Matrix,
  matrix,
  matrixBytes,
  readF32Block,
  readU32Block,
} from "./arrays.js";
import { FormatError } from "./errors.js";

const EMB_MAGIC = "NUQE";
const MODEL_MAGIC = "NUQM";
const VERSION = 1;
const EMB_HEADER_BYTES = 18;

function magicOf(bytes: Uint8Array): string {
  return String.fromCharCode(...bytes.subarray(0, 4));
}

/** Encode points (+ optional labels) into the binary embedding layout. */
export function encodeEmbeddings(
  points: Matrix,
  labels: LabelVector | null = null,
  numClasses = 0,
): Uint8Array {
  if (labels !== null && labels.length !== points.rows) {
    throw new FormatError(`labels length ${labels.length} != rows ${points.rows}`);
  }
  if (labels !== null) {
    for (const value of labels.data) {
      if (value >= numClasses) {
        throw new FormatError(`label ${value} >= class count ${numClasses}`);
      }
    }
  }
  const payload = matrixBytes(points);
  const total = EMB_HEADER_BYTES + payload.byteLength + (labels ? 4 * labels.length : 0);
  const out = new Uint8Array(total);
  const view = new DataView(out.buffer);
  out.set([0x4e, 0x55, 0x51, 0x45], 0); // "NUQE"
  view.setUint8(4, VERSION);
  view.setUint8(5, labels ? 1 : 0);
  view.setUint32(6, points.rows, true);
  view.setUint32(10, points.cols, true);
  view.setUint32(14, labels ? numClasses : 0, true);
  out.set(payload, EMB_HEADER_BYTES);
  if (labels) {
    const base = EMB_HEADER_BYTES + payload.byteLength;
    for (let i = 0; i < labels.length; i++) {
      view.setUint32(base + 4 * i, labels.data[i], true);
    }
  }
  return out;
}

export interface DecodedEmbeddings {
  points: Matrix;
  labels: Int32Array | null;
  numClasses: number;
}

export function decodeEmbeddings(bytes: Uint8Array): DecodedEmbeddings {
  if (bytes.byteLength < EMB_HEADER_BYTES) {
    throw new FormatError("truncated embedding header", bytes.byteLength);
  }
  if (magicOf(bytes) !== EMB_MAGIC) {
    throw new FormatError(`bad magic ${magicOf(bytes)}, expected ${EMB_MAGIC}`, 0);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (view.getUint8(4) !== VERSION) {
    throw new FormatError(`unsupported version ${view.getUint8(4)}`, 4);
  }
  const labeled = (view.getUint8(5) & 1) === 1;
  const rows = view.getUint32(6, true);
  const cols = view.getUint32(10, true);
  const numClasses = view.getUint32(14, true);
  const pointBytes = 4 * rows * cols;
  const expected = EMB_HEADER_BYTES + pointBytes + (labeled ? 4 * rows : 0);
  if (bytes.byteLength !== expected) {
    throw new FormatError(
      `payload is ${bytes.byteLength} bytes, layout needs ${expected}`,
      Math.min(bytes.byteLength, expected),
    );
  }
  const points = matrix(readF32Block(bytes, EMB_HEADER_BYTES, rows * cols), rows, cols);
  const labels = labeled ? readU32Block(bytes, EMB_HEADER_BYTES + pointBytes, rows) : null;
  return { points, labels, numClasses: labeled ? numClasses : 0 };
}

export interface ModelInfo {
  kernelKind: "gaussian" | "sigmoid" | "logistic";
  bandwidth: number;
  dim: number;
  n: number;
  numClasses: number;
  densityMode: "kde" | "gmm";
  backend: "exact" | "hnsw";
  neighbors: number;
}

const KERNEL_KINDS = ["gaussian", "sigmoid", "logistic"] as const;
const DENSITY_MODES = ["kde", "gmm"] as const;
const BACKENDS = ["exact", "hnsw"] as const;

/** Parse the fixed model header; the trailing training blob is left alone. */
export function readModelInfo(bytes: Uint8Array): ModelInfo {
  if (bytes.byteLength < 55) {
    throw new FormatError("truncated model header", bytes.byteLength);
  }
  if (magicOf(bytes) !== MODEL_MAGIC) {
    throw new FormatError(`bad magic ${magicOf(bytes)}, expected ${MODEL_MAGIC}`, 0);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (view.getUint8(4) !== VERSION) {
    throw new FormatError(`unsupported version ${view.getUint8(4)}`, 4);
  }
  // layout: magic 0, version 4, kind 5, bandwidth 6, d 14, N 18, C 22,
  // density mode 26, ridge 27, then five u32 starting at 35
  const kind = KERNEL_KINDS[view.getUint8(5)];
  const densityMode = DENSITY_MODES[view.getUint8(26)];
  const backend = BACKENDS[view.getUint32(35, true)];
  if (kind === undefined || densityMode === undefined || backend === undefined) {
    throw new FormatError("unknown enum code in model header", 5);
  }
  return {
    kernelKind: kind,
    bandwidth: view.getFloat64(6, true),
    dim: view.getUint32(14, true),
    n: view.getUint32(18, true),
    numClasses: view.getUint32(22, true),
    densityMode,
    backend,
    neighbors: view.getUint32(39, true),
  };
}
