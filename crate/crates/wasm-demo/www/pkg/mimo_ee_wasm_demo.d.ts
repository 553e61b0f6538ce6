/* tslint:disable */
/* eslint-disable */

/**
 * `[K, M]` of the default scenario.
 */
export function antenna_range(): Float64Array;

/**
 * EE in Mb/J for every antenna count from `K` to `M`.
 */
export function ee_vs_antennas(pilot_length: number, p_db: number): Float64Array;

/**
 * EE in Mb/J on the fixed transmit-power grid.
 */
export function ee_vs_power(pilot_length: number, n: number): Float64Array;

export function optimize(pilot_length: number, budget_w: number, rate_floor_mbps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly antenna_range: () => [number, number];
    readonly ee_vs_antennas: (a: number, b: number) => [number, number, number, number];
    readonly ee_vs_power: (a: number, b: number) => [number, number, number, number];
    readonly optimize: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
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
