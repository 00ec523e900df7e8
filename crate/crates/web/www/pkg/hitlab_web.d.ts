/* tslint:disable */
/* eslint-disable */

/**
 * Survival split into leading term and remainder for a chain-spec document.
 * The analysis runs to its automatic horizon; `horizon` only limits the
 * returned series.
 */
export function chain_decomposition(spec_json: string, alpha: string, horizon: number): string;

/**
 * Chain-spec document of the ring model.
 */
export function rim_chain(n: number, lambda: number): string;

/**
 * The same decomposition for the ring model.
 */
export function rim_decomposition(n: number, lambda: number, alpha: string, horizon: number): string;

/**
 * Empirical law of the state at the hitting-sequence stopping time,
 * against `μ*`, from ring state `start`.
 */
export function rim_halting_law(n: number, lambda: number, start: number, trajectories: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly chain_decomposition: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly rim_chain: (a: number, b: number) => [number, number, number, number];
    readonly rim_decomposition: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly rim_halting_law: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
