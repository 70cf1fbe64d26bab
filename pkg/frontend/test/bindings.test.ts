import assert from "node:assert/strict";
import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { after, test } from "node:test";

import {
  ArrayContractError,
  FormatError,
  NuqCliError,
  abstain,
  coreVersion,
  decodeEmbeddings,
  encodeEmbeddings,
  fit,
  labelVector,
  load,
  matrix,
  readModelInfo,
  save,
  score,
  tune,
} from "../src/index.js";

const CLI = process.env.NUQ_CLI ? process.env.NUQ_CLI.split(/\s+/) : ["nuq"];

function runCliRaw(args: string[]): string {
  const [cmd, ...prefix] = CLI;
  return execFileSync(cmd, [...prefix, ...args], { encoding: "utf8" });
}

const work = mkdtempSync(join(tmpdir(), "nuq-bindings-test-"));
after(() => rmSync(work, { recursive: true, force: true }));

function makeToy(name: string, n: number, seed: number, extra: string[] = []): string {
  const out = join(work, `${name}-${n}-${seed}.nuqe`);
  runCliRaw(["toy", "--name", name, "--n", String(n), "--seed", String(seed), "--out", out, ...extra]);
  return out;
}

interface CsvTable {
  header: string[];
  rows: string[][];
}

function readCsv(path: string): CsvTable {
  const lines = readFileSync(path, "utf8").trim().split("\n");
  return { header: lines[0].split(","), rows: lines.slice(1).map((l) => l.split(",")) };
}

function parseCell(cell: string): number {
  return cell === "inf" ? Infinity : Number(cell);
}

function relClose(a: number, b: number, tol: number): boolean {
  if (a === b) return true; // covers infinities and exact zeros
  return Math.abs(a - b) <= tol * Math.max(Math.abs(a), Math.abs(b));
}

test("embedding codec round-trips the CLI file bit for bit", () => {
  const path = makeToy("two_moons", 400, 1, ["--noise", "0.1"]);
  const original = new Uint8Array(readFileSync(path));
  const decoded = decodeEmbeddings(original);
  assert.equal(decoded.points.rows, 400);
  assert.equal(decoded.points.cols, 2);
  assert.ok(decoded.labels);
  const reencoded = encodeEmbeddings(
    decoded.points,
    labelVector(decoded.labels!, 400),
    decoded.numClasses,
  );
  assert.deepEqual(reencoded, original);
});

test("scores match the CLI output for every column", () => {
  const trainPath = makeToy("two_moons", 400, 1, ["--noise", "0.1"]);
  const queryPath = makeToy("two_moons", 200, 2, ["--noise", "0.1"]);
  const train = decodeEmbeddings(new Uint8Array(readFileSync(trainPath)));
  const queries = decodeEmbeddings(new Uint8Array(readFileSync(queryPath)));

  const model = fit(train.points, labelVector(train.labels!, train.points.rows), {
    bandwidth: 0.25,
    kernel: "gaussian",
    density: "kde",
    knn: { backend: "exact", k: 32 },
  });
  try {
    const columns = score(model, queries.points);

    const oraclePath = join(work, "oracle_scores.csv");
    runCliRaw(["score", "--model", model.path, "--input", queryPath, "--out", oraclePath]);
    const oracle = readCsv(oraclePath);
    assert.equal(oracle.rows.length, 200);

    const fields: [keyof typeof columns, number][] = [
      ["pred", 1], ["pMax", 2], ["aleatoric", 3], ["epistemic", 4],
      ["total", 5], ["tau", 6], ["density", 7], ["outOfSupport", 8],
    ];
    for (let i = 0; i < 200; i++) {
      for (const [field, col] of fields) {
        const ours = Number(columns[field][i]);
        const expected = parseCell(oracle.rows[i][col]);
        assert.ok(
          relClose(ours, expected, 1e-6),
          `row ${i} column ${String(field)}: ${ours} vs ${expected}`,
        );
      }
      // aleatoric parity is exact: both sides parse the same serialization
      assert.equal(columns.aleatoric[i], parseCell(oracle.rows[i][3]));
    }
  } finally {
    model.dispose();
  }
});

test("save/load round-trip scores identically", () => {
  const trainPath = makeToy("two_moons", 300, 3, ["--noise", "0.1"]);
  const train = decodeEmbeddings(new Uint8Array(readFileSync(trainPath)));
  const labels = labelVector(train.labels!, train.points.rows);
  const model = fit(train.points, labels, { bandwidth: 0.2, density: "gmm" });
  const savedPath = join(work, "saved.nuqm");
  try {
    save(model, savedPath);
    const reloaded = load(savedPath);
    try {
      assert.deepEqual(reloaded.info, model.info);
      const before = score(model, train.points);
      const afterReload = score(reloaded, train.points);
      assert.deepEqual(afterReload.pred, before.pred);
      assert.deepEqual(afterReload.total, before.total);
      assert.deepEqual(afterReload.density, before.density);
      assert.deepEqual(afterReload.tau, before.tau);
    } finally {
      reloaded.dispose();
    }
  } finally {
    model.dispose();
  }
});

test("abstain returns columnar decisions with rejects marked", () => {
  const trainPath = makeToy("two_moons", 300, 4, ["--noise", "0.1"]);
  const train = decodeEmbeddings(new Uint8Array(readFileSync(trainPath)));
  const model = fit(train.points, labelVector(train.labels!, 300), { bandwidth: 0.15 });
  try {
    const farPath = makeToy("ring_ood", 40, 5, ["--r-min", "50", "--r-max", "60"]);
    const far = decodeEmbeddings(new Uint8Array(readFileSync(farPath)));
    const decisions = abstain(model, far.points, { lambda: 0.3, beta: 0.05 });
    for (let i = 0; i < 40; i++) {
      assert.equal(decisions.accepted[i], 0); // far probes fail the density gate
      assert.equal(decisions.predictedClass[i], -1);
      assert.equal(decisions.uBeta[i], Infinity);
    }
    const near = abstain(model, train.points, { lambda: 0.3, beta: 0.05 });
    let accepted = 0;
    for (let i = 0; i < 300; i++) {
      accepted += near.accepted[i];
      if (near.accepted[i] === 1) assert.ok(near.predictedClass[i] >= 0);
    }
    assert.ok(accepted > 200, `expected most training points accepted, got ${accepted}`);
  } finally {
    model.dispose();
  }
});

test("tune returns the sweep table and winner", () => {
  const trainPath = makeToy("two_moons", 200, 6, ["--noise", "0.1"]);
  const train = decodeEmbeddings(new Uint8Array(readFileSync(trainPath)));
  const result = tune(train.points, labelVector(train.labels!, 200), {
    folds: 4,
    gridMin: 0.05,
    gridMax: 1.0,
    gridSize: 4,
    seed: 0,
  });
  assert.equal(result.table.length, 4);
  assert.ok(result.table.some((row) => row.bandwidth === result.bestBandwidth));
});

test("array contract violations raise typed errors without crashing", () => {
  assert.throws(() => matrix(new Float64Array(4) as unknown as Float32Array, 2, 2),
    ArrayContractError);
  assert.throws(() => matrix(new Float32Array(3), 2, 2), ArrayContractError);
  assert.throws(() => matrix(Float32Array.from([1, NaN]), 1, 2), ArrayContractError);
  assert.throws(() => labelVector(new Int32Array([0, -1]), 2), ArrayContractError);
  assert.throws(
    () => labelVector(new Uint32Array(2) as unknown as Int32Array, 2),
    ArrayContractError,
  );
});

test("format and CLI errors carry structured information", () => {
  assert.throws(() => decodeEmbeddings(new Uint8Array([1, 2, 3])), FormatError);
  const junk = join(work, "junk.nuqm");
  writeFileSync(junk, Buffer.from("XXXX" + "\0".repeat(60), "latin1"));
  assert.throws(() => readModelInfo(new Uint8Array(readFileSync(junk))), (err: unknown) => {
    return err instanceof FormatError && err.offset === 0;
  });

  // a parse failure inside the core surfaces as exit code 2
  const trainPath = makeToy("two_moons", 60, 7, ["--noise", "0.1"]);
  const train = decodeEmbeddings(new Uint8Array(readFileSync(trainPath)));
  const model = fit(train.points, labelVector(train.labels!, 60), { bandwidth: 0.3 });
  try {
    writeFileSync(model.path, readFileSync(junk));
    assert.throws(() => score(model, train.points), (err: unknown) => {
      return err instanceof NuqCliError && err.exitCode === 2;
    });
  } finally {
    model.dispose();
  }
});

test("core version string is exposed", () => {
  assert.match(coreVersion(), /^\d+\.\d+\.\d+$/);
});
