/* tslint:disable */
/* eslint-disable */

/**
 * Critical exponents and regime for one parameter set.
 */
export function exponent_table(dim: number, s: number, m: number, gamma: number): string;

/**
 * Norm curves of the flow from one of the built-in data.
 */
export function flow_curves(kind: string, s: number, n: number, m: number, datum: string, t_max: number): string;

/**
 * Ground state, first eigenvalues and fitted boundary exponent of an operator.
 */
export function operator_profile(kind: string, s: number, n: number): string;

/**
 * Predicted critical curves over `m ∈ (0, 1)`.
 */
export function phase_lines(dim: number, s: number, gamma: number, samples: number): string;

/**
 * Empirical smoothing constants from point-mass data on a small `(m, p, n)` grid.
 */
export function smoothing_cells(kind: string, s: number, ms: Float64Array, ps: Float64Array, ns: Uint32Array): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly exponent_table: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly flow_curves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly operator_profile: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly phase_lines: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly smoothing_cells: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
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
