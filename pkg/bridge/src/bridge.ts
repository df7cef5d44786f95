/**
 * Gym-style adapter over the skyfleet core's line-JSON stdio protocol.
 *
 * One SkyfleetEnv owns one `skyfleet serve` subprocess. The protocol is
 * strictly request-response, so requests are serialized through a FIFO
 * of pending resolvers. The bridge adds no semantics of its own: action
 * bounds are validated client-side against the core's `spec` reply, and
 * everything else is forwarded verbatim.
 */

import { ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";

export interface EnvSpec {
  n_states: number;
  n_actions: number;
  valid_actions: number[][];
}

export interface StepResult {
  obs: number[];
  rewards: number[];
  done: boolean;
  info: { qoe3: number; crashes: number };
}

export interface BridgeOptions {
  /** Executable and leading args; `serve` and scenario flags are appended. */
  command?: string[];
  caseId?: number;
  configPath?: string;
  seed?: number;
}

/** The core replied with an error object. */
export class ProtocolError extends Error {}

/** The subprocess died or was closed while a request was in flight. */
export class ConnectionError extends Error {}

const DEFAULT_COMMAND = ["python3", "-m", "skyfleet"];

export class SkyfleetEnv {
  private proc: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private pending: Array<{
    resolve: (reply: Record<string, unknown>) => void;
    reject: (err: Error) => void;
  }> = [];
  private stderrTail: string[] = [];
  private closed = false;
  private cachedSpec: EnvSpec | null = null;
  private wasReset = false;
  readonly seed: number | undefined;

  constructor(options: BridgeOptions = {}) {
    if (options.caseId === undefined && options.configPath === undefined) {
      throw new Error("one of caseId or configPath is required");
    }
    this.seed = options.seed;
    const argv = [...(options.command ?? DEFAULT_COMMAND), "serve"];
    if (options.caseId !== undefined) {
      argv.push("--case", String(options.caseId));
    } else {
      argv.push("--config", String(options.configPath));
    }
    this.proc = spawn(argv[0], argv.slice(1), { stdio: ["pipe", "pipe", "pipe"] });
    this.lines = createInterface({ input: this.proc.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.proc.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail.push(chunk.toString());
      if (this.stderrTail.length > 50) this.stderrTail.shift();
    });
    this.proc.on("error", (err) => this.failAll(new ConnectionError(err.message)));
    this.proc.on("exit", (code) => {
      if (this.pending.length > 0) {
        this.failAll(
          new ConnectionError(
            `core exited with code ${code}; stderr:\n${this.stderrTail.join("")}`
          )
        );
      }
    });
  }

  private onLine(line: string) {
    const waiter = this.pending.shift();
    if (!waiter) return; // unsolicited output; protocol never pipelines
    try {
      waiter.resolve(JSON.parse(line));
    } catch (err) {
      waiter.reject(new ConnectionError(`unparseable reply: ${line}`));
    }
  }

  private failAll(err: Error) {
    const waiters = this.pending;
    this.pending = [];
    for (const w of waiters) w.reject(err);
  }

  /**
   * Send one raw line and await one reply. Error replies come back as
   * objects, not rejections; tests use this to poke the protocol directly.
   */
  raw(message: object | string): Promise<Record<string, unknown>> {
    if (this.closed) {
      return Promise.reject(new ConnectionError("session is closed"));
    }
    const line = typeof message === "string" ? message : JSON.stringify(message);
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.proc.stdin.write(line + "\n");
    });
  }

  private async request(message: object): Promise<Record<string, unknown>> {
    const reply = await this.raw(message);
    if (typeof reply.error === "string") {
      throw new ProtocolError(reply.error);
    }
    return reply;
  }

  /** Table dimensions and per-agent valid action indices; cached. */
  async spec(): Promise<EnvSpec> {
    if (!this.cachedSpec) {
      this.cachedSpec = (await this.request({ cmd: "spec" })) as unknown as EnvSpec;
    }
    return this.cachedSpec;
  }

  get nAgents(): number | null {
    return this.cachedSpec ? this.cachedSpec.valid_actions.length : null;
  }

  async reset(seed?: number): Promise<number[]> {
    const msg: Record<string, unknown> = { cmd: "reset" };
    const effective = seed ?? this.seed;
    if (effective !== undefined) msg.seed = effective;
    const reply = await this.request(msg);
    this.wasReset = true;
    return reply.obs as number[];
  }

  async step(actions: number[]): Promise<StepResult> {
    if (!this.wasReset) {
      throw new ProtocolError("step before reset");
    }
    const spec = await this.spec();
    if (actions.length !== spec.valid_actions.length) {
      throw new RangeError(
        `expected ${spec.valid_actions.length} actions, got ${actions.length}`
      );
    }
    actions.forEach((a, i) => {
      if (!Number.isInteger(a) || !spec.valid_actions[i].includes(a)) {
        throw new RangeError(`action ${a} invalid for agent ${i}`);
      }
    });
    return (await this.request({ cmd: "step", actions })) as unknown as StepResult;
  }

  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    try {
      await Promise.race([
        this.request({ cmd: "close" }),
        new Promise((resolve) => setTimeout(resolve, 1000)),
      ]);
    } catch {
      // the process may already be gone; killing below is enough
    }
    this.proc.kill();
  }
}
