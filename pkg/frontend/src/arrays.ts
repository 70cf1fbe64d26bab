import { ArrayContractError } from "./errors.js";

/**
 * Row-major float32 matrix handle. The buffer is used as-is when it
 * crosses the file boundary, so conforming inputs are never copied.
 */
export interface Matrix {
  readonly data: Float32Array;
  readonly rows: number;
  readonly cols: number;
}

export interface LabelVector {
  readonly data: Int32Array;
  readonly length: number;
}

export function matrix(data: Float32Array, rows: number, cols: number): Matrix {
  if (!(data instanceof Float32Array)) {
    throw new ArrayContractError("matrix data must be a Float32Array");
  }
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 0 || cols < 1) {
    throw new ArrayContractError(`bad matrix shape (${rows}, ${cols})`);
  }
  if (data.length !== rows * cols) {
    throw new ArrayContractError(
      `matrix buffer holds ${data.length} values, shape (${rows}, ${cols}) needs ${rows * cols}`,
    );
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) {
      throw new ArrayContractError(`non-finite value at flat index ${i}`);
    }
  }
  return { data, rows, cols };
}

export function labelVector(data: Int32Array, length: number): LabelVector {
  if (!(data instanceof Int32Array)) {
    throw new ArrayContractError("labels must be an Int32Array");
  }
  if (data.length !== length) {
    throw new ArrayContractError(`label buffer holds ${data.length} values, expected ${length}`);
  }
  for (let i = 0; i < data.length; i++) {
    if (data[i] < 0) {
      throw new ArrayContractError(`negative label at index ${i}`);
    }
  }
  return { data, length };
}

const HOST_LITTLE_ENDIAN = new Uint8Array(new Uint32Array([1]).buffer)[0] === 1;

/** View a matrix's payload as little-endian bytes (zero-copy on LE hosts). */
export function matrixBytes(m: Matrix): Uint8Array {
  if (HOST_LITTLE_ENDIAN) {
    return new Uint8Array(m.data.buffer, m.data.byteOffset, m.data.byteLength);
  }
  const out = new Uint8Array(m.data.byteLength);
  const view = new DataView(out.buffer);
  for (let i = 0; i < m.data.length; i++) {
    view.setFloat32(4 * i, m.data[i], true);
  }
  return out;
}

/** Decode a little-endian float32 block into a fresh Float32Array. */
export function readF32Block(bytes: Uint8Array, offset: number, count: number): Float32Array {
  const copy = bytes.slice(offset, offset + 4 * count);
  if (HOST_LITTLE_ENDIAN) {
    return new Float32Array(copy.buffer, 0, count);
  }
  const view = new DataView(copy.buffer);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = view.getFloat32(4 * i, true);
  }
  return out;
}

/** Decode a little-endian uint32 block into an Int32Array of labels. */
export function readU32Block(bytes: Uint8Array, offset: number, count: number): Int32Array {
  const view = new DataView(bytes.buffer, bytes.byteOffset + offset, 4 * count);
  const out = new Int32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = view.getUint32(4 * i, true);
  }
  return out;
}
