import { spawnSync } from "node:child_process";

import { NuqCliError } from "./errors.js";

/**
 * Resolve the core CLI. Defaults to the `nuq` console script on PATH;
 * override with NUQ_CLI (whitespace-separated, e.g. "python3 -m nuq.cli").
 */
function cliCommand(): string[] {
  const override = process.env.NUQ_CLI;
  return override ? override.split(/\s+/) : ["nuq"];
}

export function runCli(args: string[]): string {
  const [command, ...prefix] = cliCommand();
  const full = [...prefix, ...args];
  const result = spawnSync(command, full, { encoding: "utf8", maxBuffer: 1 << 28 });
  if (result.error) {
    throw new NuqCliError(-1, String(result.error), `${command} ${args.join(" ")}`);
  }
  if (result.status !== 0) {
    throw new NuqCliError(result.status ?? -1, result.stderr ?? "", `${command} ${args.join(" ")}`);
  }
  return result.stdout ?? "";
}
