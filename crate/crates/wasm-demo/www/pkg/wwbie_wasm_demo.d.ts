/* tslint:disable */
/* eslint-disable */

/**
 * Free-surface trace of a wavemaker solve next to the exact modal solution.
 */
export class WavemakerTrace {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Interleaved real and imaginary parts of the computed density.
     */
    readonly computed: Float64Array;
    /**
     * Max-norm error over all nodes.
     */
    readonly error: number;
    /**
     * Interleaved real and imaginary parts of the stretched exact solution.
     */
    readonly exact: Float64Array;
    readonly iterations: number;
    readonly nodes: number;
    /**
     * Free-surface abscissae, increasing.
     */
    readonly x1: Float64Array;
}

/**
 * Flat `(nu, k, gamma_1)` triples for `samples` frequencies log-spaced on `[nu_lo, nu_hi]`.
 */
export function dispersion_curve(nu_lo: number, nu_hi: number, samples: number): Float64Array;

/**
 * Flat `(x1, Re tau, Im tau, Re tau')` samples of the stretching path on
 * `[0, extent]`. With `two_layer`, the real stretch starts at `b` and
 * scales by `nu`.
 */
export function stretching_path(a: number, c: number, two_layer: boolean, b: number, nu: number, extent: number, samples: number): Float64Array;

/**
 * Wall-driven strip with `a = 2 lambda` and `M = a + ell lambda`.
 */
export function wavemaker(nu: number, ell: number, ppw: number, order: number, two_layer: boolean): WavemakerTrace;

/**
 * `[k, wavelength, gamma_1, .., gamma_count]` for one frequency.
 */
export function wavenumbers(nu: number, count: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_wavemakertrace_free: (a: number, b: number) => void;
    readonly dispersion_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly stretching_path: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly wavemaker: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly wavemakertrace_computed: (a: number) => [number, number];
    readonly wavemakertrace_error: (a: number) => number;
    readonly wavemakertrace_exact: (a: number) => [number, number];
    readonly wavemakertrace_iterations: (a: number) => number;
    readonly wavemakertrace_nodes: (a: number) => number;
    readonly wavemakertrace_x1: (a: number) => [number, number];
    readonly wavenumbers: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
