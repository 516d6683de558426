/** Frozen text encoders used as stand-ins for a pretrained contextual model.
 *
 * Every token maps to a fixed pseudo-random unit vector derived from its
 * hash, so encodings are deterministic across runs and machines and the
 * encoder has no trainable state. Named presets act as "checkpoints";
 * classifier heads train on top of the frozen output.
 */

import { gaussian, hashString, mulberry32 } from "./rng.js";

export const SEP_TOKEN = "[SEP]";

const TOKEN_RE = /[a-z0-9']+|\[sep\]/g;

export function tokenizeForEncoder(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

export interface EncoderPreset {
  name: string;
  dim: number;
  seed: number;
}

export const ENCODER_PRESETS: Record<string, EncoderPreset> = {
  "hash-32": { name: "hash-32", dim: 32, seed: 1337 },
  "hash-64": { name: "hash-64", dim: 64, seed: 1337 },
  "hash-8": { name: "hash-8", dim: 8, seed: 1337 },
};

export const DEFAULT_ENCODER = "hash-32";

export class FrozenHashEncoder {
  readonly name: string;
  readonly dim: number;
  private readonly seed: number;
  private readonly cache = new Map<string, Float64Array>();

  constructor(preset: EncoderPreset = ENCODER_PRESETS[DEFAULT_ENCODER]) {
    this.name = preset.name;
    this.dim = preset.dim;
    this.seed = preset.seed;
  }

  static byName(name: string): FrozenHashEncoder {
    const preset = ENCODER_PRESETS[name];
    if (!preset) {
      throw new Error(
        `unknown encoder checkpoint ${name}; available: ${Object.keys(ENCODER_PRESETS).join(", ")}`,
      );
    }
    return new FrozenHashEncoder(preset);
  }

  tokenVector(token: string): Float64Array {
    const cached = this.cache.get(token);
    if (cached) return cached;
    const rand = mulberry32(hashString(token) ^ this.seed);
    const v = new Float64Array(this.dim);
    let norm = 0;
    for (let i = 0; i < this.dim; i++) {
      v[i] = gaussian(rand);
      norm += v[i] * v[i];
    }
    norm = Math.sqrt(norm) || 1;
    for (let i = 0; i < this.dim; i++) v[i] /= norm;
    this.cache.set(token, v);
    return v;
  }

  /** Token-level states for attention keys/values. */
  tokenStates(text: string): Float64Array[] {
    return tokenizeForEncoder(text).map((t) => this.tokenVector(t));
  }

  /** Mean-pooled sequence representation for linear heads. */
  pooled(text: string): Float64Array {
    const states = this.tokenStates(text);
    const out = new Float64Array(this.dim);
    if (states.length === 0) return out;
    for (const s of states) for (let i = 0; i < this.dim; i++) out[i] += s[i];
    for (let i = 0; i < this.dim; i++) out[i] /= states.length;
    return out;
  }
}
