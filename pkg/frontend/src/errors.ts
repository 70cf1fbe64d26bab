/** Raised when a host array does not satisfy the boundary contract. */
export class ArrayContractError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ArrayContractError";
  }
}

/** Raised when a file payload cannot be decoded. */
export class FormatError extends Error {
  readonly offset: number | null;

  constructor(message: string, offset: number | null = null) {
    super(offset === null ? message : `${message} (at byte offset ${offset})`);
    this.name = "FormatError";
    this.offset = offset;
  }
}

/**
 * Raised when the core CLI exits nonzero. Carries the core exit code
 * (2 input/parse, 3 numerical, 4 config) and its stderr text.
 */
export class NuqCliError extends Error {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(exitCode: number, stderr: string, command: string) {
    super(`nuq exited with code ${exitCode} for ${command}: ${stderr.trim()}`);
    this.name = "NuqCliError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}
