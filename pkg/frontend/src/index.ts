/**
 * Bindings over the nuq core: fit / tune / score / abstain / save / load.
 *
 * Host arrays cross the boundary through the binary embedding format and
 * results come back columnar (one typed array per field), parsed from the
 * CLI's documented CSV outputs. Model handles are opaque paths owned by
 * the handle; dispose() releases fitted temporaries.
 */

import { mkdtempSync, copyFileSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { LabelVector, Matrix, labelVector, matrix } from "./arrays.js";
import { ArrayContractError, FormatError, NuqCliError } from "./errors.js";
import {
  DecodedEmbeddings,
  ModelInfo,
  decodeEmbeddings,
  encodeEmbeddings,
  readModelInfo,
} from "./formats.js";
import { runCli } from "./runner.js";

export { ArrayContractError, FormatError, NuqCliError } from "./errors.js";
export { labelVector, matrix } from "./arrays.js";
export type { LabelVector, Matrix } from "./arrays.js";
export { decodeEmbeddings, encodeEmbeddings, readModelInfo } from "./formats.js";
export type { DecodedEmbeddings, ModelInfo } from "./formats.js";

export type KernelKind = "gaussian" | "sigmoid" | "logistic";
export type DensityMode = "kde" | "gmm";
export type Backend = "exact" | "hnsw";

export interface KnnOptions {
  backend?: Backend;
  k?: number;
  m?: number;
  efConstruction?: number;
  efSearch?: number;
  seed?: number;
}

export interface FitOptions {
  bandwidth: number;
  kernel?: KernelKind;
  density?: DensityMode;
  ridge?: number;
  knn?: KnnOptions;
}

export interface TuneOptions {
  kernel?: KernelKind;
  folds?: number;
  neighbors?: number;
  gridMin?: number;
  gridMax?: number;
  gridSize?: number;
  seed?: number;
}

export interface ScoreColumns {
  pred: Int32Array;
  pMax: Float64Array;
  aleatoric: Float64Array;
  epistemic: Float64Array;
  total: Float64Array;
  tau: Float64Array;
  density: Float64Array;
  outOfSupport: Uint8Array;
}

export interface AbstainColumns {
  accepted: Uint8Array;
  uBeta: Float64Array;
  predictedClass: Int32Array; // -1 for rejected rows
}

export interface AbstainOptions {
  lambda: number;
  beta?: number;
  perClassCorrection?: boolean;
}

export interface TuneResult {
  bestBandwidth: number;
  table: { bandwidth: number; accuracy: number }[];
}

/** Opaque fitted-model handle: a model file plus owned scratch space. */
export class ModelHandle {
  readonly path: string;
  readonly info: ModelInfo;
  private readonly scratch: string;
  private disposed = false;

  constructor(path: string, scratch: string) {
    this.path = path;
    this.scratch = scratch;
    this.info = readModelInfo(new Uint8Array(readFileSync(path)));
  }

  tempFile(name: string): string {
    if (this.disposed) {
      throw new ArrayContractError("model handle already disposed");
    }
    return join(this.scratch, name);
  }

  dispose(): void {
    if (!this.disposed) {
      rmSync(this.scratch, { recursive: true, force: true });
      this.disposed = true;
    }
  }
}

function newScratch(): string {
  return mkdtempSync(join(tmpdir(), "nuq-bindings-"));
}

function parseFloatCell(cell: string): number {
  if (cell === "inf") return Infinity;
  if (cell === "-inf") return -Infinity;
  const value = Number(cell);
  if (Number.isNaN(value) && cell !== "nan") {
    throw new FormatError(`unparseable numeric cell ${JSON.stringify(cell)}`);
  }
  return value;
}

function knnArgs(knn: KnnOptions | undefined): string[] {
  if (!knn) return [];
  const args: string[] = [];
  if (knn.backend !== undefined) args.push("--knn-backend", knn.backend);
  if (knn.k !== undefined) args.push("--knn-k", String(knn.k));
  if (knn.m !== undefined) args.push("--knn-m", String(knn.m));
  if (knn.efConstruction !== undefined) args.push("--knn-ef-construction", String(knn.efConstruction));
  if (knn.efSearch !== undefined) args.push("--knn-ef-search", String(knn.efSearch));
  if (knn.seed !== undefined) args.push("--knn-seed", String(knn.seed));
  return args;
}

function inferClasses(labels: LabelVector): number {
  let top = 0;
  for (const value of labels.data) {
    if (value > top) top = value;
  }
  return top + 1;
}

/** Fit a model over host arrays; the returned handle owns its files. */
export function fit(points: Matrix, labels: LabelVector, opts: FitOptions): ModelHandle {
  const scratch = newScratch();
  const trainPath = join(scratch, "train.nuqe");
  const modelPath = join(scratch, "model.nuqm");
  writeFileSync(trainPath, encodeEmbeddings(points, labels, inferClasses(labels)));
  const args = [
    "fit",
    "--train", trainPath,
    "--bandwidth", String(opts.bandwidth),
    "--kernel", opts.kernel ?? "gaussian",
    "--density", opts.density ?? "kde",
    "--out", modelPath,
    ...knnArgs(opts.knn),
  ];
  if (opts.ridge !== undefined) args.push("--ridge", String(opts.ridge));
  runCli(args);
  return new ModelHandle(modelPath, scratch);
}

/** Cross-validated bandwidth sweep; returns the winner and the table. */
export function tune(points: Matrix, labels: LabelVector, opts: TuneOptions = {}): TuneResult {
  const scratch = newScratch();
  try {
    const trainPath = join(scratch, "train.nuqe");
    writeFileSync(trainPath, encodeEmbeddings(points, labels, inferClasses(labels)));
    const args = ["tune", "--train", trainPath, "--kernel", opts.kernel ?? "gaussian"];
    if (opts.folds !== undefined) args.push("--folds", String(opts.folds));
    if (opts.neighbors !== undefined) args.push("--knn", String(opts.neighbors));
    if (opts.gridMin !== undefined) args.push("--grid-min", String(opts.gridMin));
    if (opts.gridMax !== undefined) args.push("--grid-max", String(opts.gridMax));
    if (opts.gridSize !== undefined) args.push("--grid-size", String(opts.gridSize));
    if (opts.seed !== undefined) args.push("--seed", String(opts.seed));
    const stdout = runCli(args);
    const table: { bandwidth: number; accuracy: number }[] = [];
    let best: number | null = null;
    for (const line of stdout.split("\n")) {
      const sweep = line.match(/^h=(\S+) accuracy=(\S+)$/);
      if (sweep) {
        table.push({ bandwidth: Number(sweep[1]), accuracy: Number(sweep[2]) });
      }
      const winner = line.match(/^best_h=(\S+)$/);
      if (winner) best = Number(winner[1]);
    }
    if (best === null || table.length === 0) {
      throw new FormatError("tune output missing the sweep table or best_h line");
    }
    return { bestBandwidth: best, table };
  } finally {
    rmSync(scratch, { recursive: true, force: true });
  }
}

const SCORE_HEADER = "index,pred,p_max,U_a,U_e,U_t,tau,density,out_of_support";

/** Score query rows; columns come back as typed arrays in input order. */
export function score(model: ModelHandle, queries: Matrix): ScoreColumns {
  const queryPath = model.tempFile("queries.nuqe");
  const scorePath = model.tempFile("scores.csv");
  writeFileSync(queryPath, encodeEmbeddings(queries));
  runCli(["score", "--model", model.path, "--input", queryPath, "--out", scorePath]);
  const lines = readFileSync(scorePath, "utf8").trim().split("\n");
  if (lines[0] !== SCORE_HEADER) {
    throw new FormatError(`unexpected score header ${JSON.stringify(lines[0])}`);
  }
  const n = lines.length - 1;
  if (n !== queries.rows) {
    throw new FormatError(`score table has ${n} rows, expected ${queries.rows}`);
  }
  const out: ScoreColumns = {
    pred: new Int32Array(n),
    pMax: new Float64Array(n),
    aleatoric: new Float64Array(n),
    epistemic: new Float64Array(n),
    total: new Float64Array(n),
    tau: new Float64Array(n),
    density: new Float64Array(n),
    outOfSupport: new Uint8Array(n),
  };
  for (let i = 0; i < n; i++) {
    const cells = lines[i + 1].split(",");
    if (cells.length !== 9 || Number(cells[0]) !== i) {
      throw new FormatError(`malformed score row ${i}`);
    }
    out.pred[i] = Number(cells[1]);
    out.pMax[i] = parseFloatCell(cells[2]);
    out.aleatoric[i] = parseFloatCell(cells[3]);
    out.epistemic[i] = parseFloatCell(cells[4]);
    out.total[i] = parseFloatCell(cells[5]);
    out.tau[i] = parseFloatCell(cells[6]);
    out.density[i] = parseFloatCell(cells[7]);
    out.outOfSupport[i] = Number(cells[8]);
  }
  return out;
}

/** Accept-or-reject decisions for query rows under the confidence rule. */
export function abstain(model: ModelHandle, queries: Matrix, opts: AbstainOptions): AbstainColumns {
  const queryPath = model.tempFile("abstain_queries.nuqe");
  const decisionPath = model.tempFile("decisions.csv");
  writeFileSync(queryPath, encodeEmbeddings(queries));
  const args = [
    "reject-eval",
    "--model", model.path,
    "--test", queryPath,
    "--lambda", String(opts.lambda),
    "--beta", String(opts.beta ?? 0.05),
    "--out", decisionPath,
  ];
  if (opts.perClassCorrection === true) args.push("--per-class-correction");
  if (opts.perClassCorrection === false) args.push("--no-per-class-correction");
  runCli(args);
  const lines = readFileSync(decisionPath, "utf8").trim().split("\n");
  if (lines[0] !== "index,action,u_beta,predicted_class") {
    throw new FormatError(`unexpected decision header ${JSON.stringify(lines[0])}`);
  }
  const n = lines.length - 1;
  const out: AbstainColumns = {
    accepted: new Uint8Array(n),
    uBeta: new Float64Array(n),
    predictedClass: new Int32Array(n).fill(-1),
  };
  for (let i = 0; i < n; i++) {
    const cells = lines[i + 1].split(",");
    if (cells.length !== 4 || Number(cells[0]) !== i) {
      throw new FormatError(`malformed decision row ${i}`);
    }
    out.accepted[i] = cells[1] === "predict" ? 1 : 0;
    out.uBeta[i] = parseFloatCell(cells[2]);
    if (cells[3] !== "") out.predictedClass[i] = Number(cells[3]);
  }
  return out;
}

/** Copy the model file to a caller-owned path. */
export function save(model: ModelHandle, path: string): void {
  copyFileSync(model.path, path);
}

/** Open a model file; the handle gets fresh scratch space for queries. */
export function load(path: string): ModelHandle {
  const scratch = newScratch();
  const owned = join(scratch, "model.nuqm");
  copyFileSync(path, owned);
  return new ModelHandle(owned, scratch);
}

/** Version string of the core library backing these bindings. */
export function coreVersion(): string {
  return runCli(["--version"]).trim().replace(/^nuq\s+/, "");
}
