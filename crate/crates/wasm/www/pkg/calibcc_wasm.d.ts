/* tslint:disable */
/* eslint-disable */

/**
 * Generates data from a known map, fits a calibrator and returns
 * before/after metrics and reliability diagrams.
 */
export function calibrate(slope: number, intercept: number, records: number, bins: number, seed: bigint): string;

/**
 * Edit distance, preserved ratio and binary label for a suggestion pair.
 */
export function label(expected: string, generated: string): string;

/**
 * Replays one stream whose map changes a third of the way through and
 * returns per-window ECE of a frozen and an adaptive calibrator.
 */
export function replay_shift(slope: number, intercept: number, window: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly calibrate: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly label: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly replay_shift: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
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
