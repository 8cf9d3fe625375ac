import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

/** A primary-side failure, carrying the originating exception class name. */
export class OpServerError extends Error {
  readonly kind: string;

  constructor(kind: string, message: string) {
    super(message);
    this.name = kind;
    this.kind = kind;
  }
}

interface Pending {
  resolve(value: unknown): void;
  reject(error: Error): void;
}

interface Response {
  id: number;
  ok: boolean;
  result?: unknown;
  kind?: string;
  error?: string;
}

export interface KernelOptions {
  /** Interpreter to launch; PARETOGEN_PYTHON or "python3" by default. */
  python?: string;
}

/**
 * One op server subprocess speaking line-delimited JSON.
 *
 * Requests may be issued concurrently; the server answers in order and
 * responses are matched back by id. A dead or unlaunchable server rejects
 * every in-flight and future call.
 */
export class Kernel {
  private readonly proc: ChildProcessWithoutNullStreams;
  private readonly lines: Interface;
  private readonly pending = new Map<number, Pending>();
  private nextId = 1;
  private fatal: Error | null = null;
  private stderrTail = "";
  private readonly exited: Promise<void>;

  constructor(options: KernelOptions = {}) {
    const python = options.python ?? process.env.PARETOGEN_PYTHON ?? "python3";
    this.proc = spawn(python, ["-m", "paretogen.opserver"], {
      stdio: ["pipe", "pipe", "pipe"],
    });
    this.proc.stderr.setEncoding("utf8");
    this.proc.stderr.on("data", (chunk: string) => {
      this.stderrTail = (this.stderrTail + chunk).slice(-4096);
    });
    this.lines = createInterface({ input: this.proc.stdout });
    this.lines.on("line", (line) => this.dispatch(line));
    this.proc.on("error", (err) => {
      this.fail(new Error(`failed to launch ${python}: ${err.message}`));
    });
    this.exited = new Promise((resolve) => {
      this.proc.on("close", (code) => {
        if (code !== 0 && code !== null) {
          this.fail(
            new Error(
              `op server exited with code ${code}${
                this.stderrTail ? `: ${this.stderrTail.trim()}` : ""
              }`,
            ),
          );
        } else {
          this.fail(new Error("op server closed"));
        }
        resolve();
      });
    });
  }

  /** Send one op and await its result. */
  call<T>(op: string, args: Record<string, unknown> = {}): Promise<T> {
    if (this.fatal) {
      return Promise.reject(this.fatal);
    }
    const id = this.nextId++;
    const line = JSON.stringify({ id, op, args }) + "\n";
    return new Promise<T>((resolve, reject) => {
      this.pending.set(id, { resolve: resolve as (v: unknown) => void, reject });
      this.proc.stdin.write(line, (err) => {
        if (err && this.pending.delete(id)) {
          reject(err);
        }
      });
    });
  }

  /** Close stdin and wait for the server to exit. */
  async close(): Promise<void> {
    this.proc.stdin.end();
    await this.exited;
  }

  private dispatch(line: string): void {
    let response: Response;
    try {
      response = JSON.parse(line) as Response;
    } catch {
      this.fail(new Error(`unparseable response line: ${line.slice(0, 200)}`));
      return;
    }
    const entry = this.pending.get(response.id);
    if (!entry) {
      return; // late line for a caller that already failed
    }
    this.pending.delete(response.id);
    if (response.ok) {
      entry.resolve(response.result);
    } else {
      entry.reject(
        new OpServerError(response.kind ?? "Error", response.error ?? "unknown error"),
      );
    }
  }

  private fail(error: Error): void {
    if (this.fatal) {
      return;
    }
    this.fatal = error;
    for (const entry of this.pending.values()) {
      entry.reject(error);
    }
    this.pending.clear();
  }
}
