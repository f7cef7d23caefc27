/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_wavemakertrace_free: (a: number, b: number) => void;
export const dispersion_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const stretching_path: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const wavemaker: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const wavemakertrace_computed: (a: number) => [number, number];
export const wavemakertrace_error: (a: number) => number;
export const wavemakertrace_exact: (a: number) => [number, number];
export const wavemakertrace_iterations: (a: number) => number;
export const wavemakertrace_nodes: (a: number) => number;
export const wavemakertrace_x1: (a: number) => [number, number];
export const wavenumbers: (a: number, b: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
