/* tslint:disable */
/* eslint-disable */

export class HedgeDemo {
    free(): void;
    [Symbol.dispose](): void;
    evaluate(bins: number): string;
    experiment(): string;
    /**
     * Validation loss of the initial network.
     */
    initial_loss(): number;
    constructor(dynamics: string, instruments: string, penalty: string, train_paths: number, seed: number);
    train_epoch(): string;
}

export function price_curves(strike_lo: number, strike_hi: number, points: number, tau: number, jump_intensity: number): string;

export function simulate(dynamics: string, n_paths: number, steps_per_year: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_hedgedemo_free: (a: number, b: number) => void;
    readonly hedgedemo_evaluate: (a: number, b: number) => [number, number, number, number];
    readonly hedgedemo_experiment: (a: number) => [number, number];
    readonly hedgedemo_initial_loss: (a: number) => number;
    readonly hedgedemo_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly hedgedemo_train_epoch: (a: number) => [number, number, number, number];
    readonly price_curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
