import { Kernel, type KernelOptions, OpServerError } from "./kernel.js";

export { Kernel, OpServerError, type KernelOptions };

/** Loss multipliers (cross-entropy, coarse alignment, fine alignment). */
export interface PhaseWeights {
  ce: number;
  coarse: number;
  fine: number;
}

/** Milestones and weight ceilings of the three-phase schedule. */
export interface ScheduleConfig {
  r1?: number;
  r2?: number;
  lambda_min?: number;
  beta_max?: number;
  gamma_max?: number;
}

/** Token-value maps for a custom vocabulary; omit to use the codec's own. */
export interface ValueTable {
  coarse_values: number[];
  fine_values: number[];
}

/**
 * Per-position probability rows with targets and a role mask.
 * Mask entries: 0 ignore, 1 integer-prefix row, 2 fraction row.
 */
export interface PositionBatch {
  distributions: number[][];
  targets: number[];
  mask: number[];
}

/** Pretrained embeddings of the 13 basic numeric symbols. */
export interface BaseSymbolTable {
  embedding: Record<string, number[]>;
  dim: number;
  sigma: number;
}

/** Position weights by digit significance: 5 integer-side, 4 fraction-side. */
export interface WeightScheme {
  int_weights: number[];
  frac_weights: number[];
}

export interface InitEmbeddingsOptions {
  seed?: number;
  weights?: WeightScheme;
  eps?: number;
  normalize?: boolean;
}

/** Initialized rows per integer-prefix and fraction token. */
export interface NumericEmbeddingTable {
  int_vectors: number[][];
  frac_vectors: number[][];
  seed: number;
}

/** A problem instance as the pipeline's instance/1 JSONL record. */
export interface InstanceRecord {
  schema: "instance/1";
  family: string;
  n: number;
  lower: number[];
  upper: number[];
  cons_matrix: number[][];
  cons_rhs: number[];
  params: Record<string, unknown>;
  instance_id: string;
  provenance?: Record<string, unknown>;
}

/** System, user, and assistant texts for one instance. */
export interface PromptBundle {
  system: string;
  user: string;
  assistant: string;
}

export interface SlotStatus {
  slot: number;
  ok: boolean;
  reason: string;
}

/** Parser result: salvaged vectors plus per-slot diagnostics. */
export interface ParsedSolutions {
  vectors: number[][];
  slots: SlotStatus[];
  structural_failure: boolean;
}

export interface FusionConfig {
  k?: number;
  tol?: number;
  obj_tol?: number;
  decimals?: number;
  selection_mode?: "front_by_front" | "union";
}

/** Fused frontier; shortfall marks fewer than K feasible survivors. */
export interface FusedFrontier {
  decisions: number[][];
  objectives: number[][];
  shortfall: boolean;
}

/**
 * Typed client for the paretogen op server.
 *
 * Each method mirrors the primary operation of the same name; failures
 * reject with OpServerError carrying the primary exception class and text.
 */
export class Paretogen {
  readonly kernel: Kernel;

  constructor(options: KernelOptions = {}) {
    this.kernel = new Kernel(options);
  }

  /** Primary package version, and a liveness check. */
  ping(): Promise<{ version: string }> {
    return this.kernel.call("ping");
  }

  /** Render one scalar as its two-token text form (grid-rounded). */
  encode(value: number): Promise<string> {
    return this.kernel.call("encode", { value });
  }

  /** Decode exactly one two-token scalar. */
  decode(text: string): Promise<number> {
    return this.kernel.call("decode", { text });
  }

  /** Concatenate the token pairs of the values in order, no separators. */
  encode_sequence(values: number[]): Promise<string> {
    return this.kernel.call("encode_sequence", { values });
  }

  /** Decode every token pair in the text, optionally enforcing a count. */
  decode_sequence(text: string, count?: number): Promise<number[]> {
    return this.kernel.call("decode_sequence", { text, count: count ?? null });
  }

  /** Loss weights at training progress r in [0, 1]. */
  schedule(r: number, config?: ScheduleConfig): Promise<PhaseWeights> {
    return this.kernel.call("schedule", { r, config: config ?? null });
  }

  /** Mean expected coarse-value gap over integer-prefix rows. */
  coarse_loss(batch: PositionBatch, table?: ValueTable): Promise<number> {
    return this.kernel.call("coarse_loss", { batch, table: table ?? null });
  }

  /** Fractional-suffix analogue of coarse_loss using fine values. */
  fine_loss(batch: PositionBatch, table?: ValueTable): Promise<number> {
    return this.kernel.call("fine_loss", { batch, table: table ?? null });
  }

  /** Schedule-weighted sum of cross-entropy and both alignment losses. */
  total_loss(
    ce: number,
    batch: PositionBatch,
    r: number,
    config?: ScheduleConfig,
    table?: ValueTable,
  ): Promise<number> {
    return this.kernel.call("total_loss", {
      ce,
      batch,
      r,
      config: config ?? null,
      table: table ?? null,
    });
  }

  /** Compose, perturb, and optionally rescale embeddings for every token. */
  init_embeddings(
    base: BaseSymbolTable,
    options: InitEmbeddingsOptions = {},
  ): Promise<NumericEmbeddingTable> {
    return this.kernel.call("init_embeddings", {
      base,
      seed: options.seed ?? 0,
      weights: options.weights ?? null,
      eps: options.eps ?? 0.02,
      normalize: options.normalize ?? true,
    });
  }

  /**
   * Render one instance (and optionally its frontier) as prompt text.
   * Frontier rows are reordered by ascending (f1, f2) before rendering.
   */
  serialize(
    instance: InstanceRecord,
    anchors: [number[], number[]],
    frontier?: number[][] | null,
    k?: number,
  ): Promise<PromptBundle> {
    return this.kernel.call("serialize", {
      instance,
      anchors,
      frontier: frontier ?? null,
      k: k ?? 20,
    });
  }

  /** Extract up to k decision vectors from arbitrary model output. */
  parse_solutions(text: string, n: number, k: number): Promise<ParsedSolutions> {
    return this.kernel.call("parse_solutions", { text, n, k });
  }

  /** Filter pooled candidate passes and select K frontier points. */
  fuse(
    instance: InstanceRecord,
    passes: number[][][],
    config?: FusionConfig,
    instance_id?: string,
  ): Promise<FusedFrontier> {
    return this.kernel.call("fuse", {
      instance,
      passes,
      config: config ?? null,
      instance_id: instance_id ?? "",
    });
  }

  /** Close the underlying server process. */
  close(): Promise<void> {
    return this.kernel.close();
  }
}
