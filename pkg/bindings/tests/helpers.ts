import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { Paretogen } from "../src/index.js";

const here = dirname(fileURLToPath(import.meta.url));

export const TOL = 1e-12;

export interface Case {
  args: Record<string, any>;
  expect: any;
}

export function loadCases(op: string): Case[] {
  const raw = readFileSync(join(here, "fixtures", `${op}.json`), "utf8");
  const data = JSON.parse(raw) as { op: string; cases: Case[] };
  if (data.op !== op) {
    throw new Error(`fixture file mismatch: wanted ${op}, got ${data.op}`);
  }
  return data.cases;
}

/** Numbers to 1e-12, everything else exactly, recursing through containers. */
export function assertClose(got: unknown, want: unknown, path: string): void {
  if (typeof want === "number") {
    if (typeof got !== "number" || !(Math.abs(got - want) <= TOL)) {
      throw new Error(`${path}: got ${String(got)}, want ${want}`);
    }
    return;
  }
  if (want === null || typeof want === "string" || typeof want === "boolean") {
    if (got !== want) {
      throw new Error(
        `${path}: got ${JSON.stringify(got)?.slice(0, 120)}, want ${JSON.stringify(
          want,
        )?.slice(0, 120)}`,
      );
    }
    return;
  }
  if (Array.isArray(want)) {
    if (!Array.isArray(got) || got.length !== want.length) {
      throw new Error(`${path}: array length ${(got as any[])?.length} != ${want.length}`);
    }
    for (let i = 0; i < want.length; i++) {
      assertClose(got[i], want[i], `${path}[${i}]`);
    }
    return;
  }
  const wantObj = want as Record<string, unknown>;
  const gotObj = got as Record<string, unknown>;
  if (typeof gotObj !== "object" || gotObj === null) {
    throw new Error(`${path}: got ${typeof got}, want object`);
  }
  for (const key of Object.keys(wantObj)) {
    assertClose(gotObj[key], wantObj[key], `${path}.${key}`);
  }
}

/** Route one fixture case through the matching typed client method. */
export function invoke(client: Paretogen, op: string, args: any): Promise<unknown> {
  switch (op) {
    case "encode":
      return client.encode(args.value);
    case "decode":
      return client.decode(args.text);
    case "encode_sequence":
      return client.encode_sequence(args.values);
    case "decode_sequence":
      return client.decode_sequence(args.text, args.count ?? undefined);
    case "schedule":
      return client.schedule(args.r, args.config ?? undefined);
    case "coarse_loss":
      return client.coarse_loss(args.batch, args.table ?? undefined);
    case "fine_loss":
      return client.fine_loss(args.batch, args.table ?? undefined);
    case "total_loss":
      return client.total_loss(
        args.ce,
        args.batch,
        args.r,
        args.config ?? undefined,
        args.table ?? undefined,
      );
    case "init_embeddings":
      return client.init_embeddings(args.base, {
        seed: args.seed,
        weights: args.weights ?? undefined,
        eps: args.eps,
        normalize: args.normalize,
      });
    case "serialize":
      return client.serialize(args.instance, args.anchors, args.frontier, args.k);
    case "parse_solutions":
      return client.parse_solutions(args.text, args.n, args.k);
    case "fuse":
      return client.fuse(args.instance, args.passes, args.config ?? undefined);
    default:
      throw new Error(`no dispatcher for op ${op}`);
  }
}

/** Replay every fixture case for an op and compare against the primary. */
export async function replay(
  client: Paretogen,
  op: string,
  chunk = 100,
): Promise<number> {
  const cases = loadCases(op);
  for (let start = 0; start < cases.length; start += chunk) {
    const slice = cases.slice(start, start + chunk);
    const results = await Promise.all(slice.map((c) => invoke(client, op, c.args)));
    results.forEach((got, j) => {
      assertClose(got, slice[j].expect, `${op}[${start + j}]`);
    });
  }
  return cases.length;
}
