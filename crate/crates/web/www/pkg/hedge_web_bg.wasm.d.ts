/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_hedgedemo_free: (a: number, b: number) => void;
export const hedgedemo_evaluate: (a: number, b: number) => [number, number, number, number];
export const hedgedemo_experiment: (a: number) => [number, number];
export const hedgedemo_initial_loss: (a: number) => number;
export const hedgedemo_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const hedgedemo_train_epoch: (a: number) => [number, number, number, number];
export const price_curves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const simulate: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
