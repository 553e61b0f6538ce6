/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const antenna_range: () => [number, number];
export const ee_vs_antennas: (a: number, b: number) => [number, number, number, number];
export const ee_vs_power: (a: number, b: number) => [number, number, number, number];
export const optimize: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
