/** Slider-friendly debounce: a burst of calls collapses to one, fired
 * DEBOUNCE_MS after the burst goes quiet. */

export const DEBOUNCE_MS = 150;

export interface Debounced {
  (): void;
  cancel(): void;
  /** Fire immediately if a call is pending (used on blur/Enter). */
  flush(): void;
}

export function debounce(fn: () => void, ms: number = DEBOUNCE_MS): Debounced {
  let timer: ReturnType<typeof setTimeout> | undefined;
  const run = () => {
    timer = undefined;
    fn();
  };
  const debounced = (() => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(run, ms);
  }) as Debounced;
  debounced.cancel = () => {
    if (timer !== undefined) clearTimeout(timer);
    timer = undefined;
  };
  debounced.flush = () => {
    if (timer === undefined) return;
    clearTimeout(timer);
    run();
  };
  return debounced;
}
