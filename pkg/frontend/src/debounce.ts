/** Trailing-edge debouncer: call() schedules fn after the wait; further
 * calls within the window restart it (latest wins). */

export interface Debounced {
  call(): void;
  cancel(): void;
  flush(): void;
}

export function debounce(fn: () => void, waitMs: number): Debounced {
  let handle: ReturnType<typeof setTimeout> | null = null;
  return {
    call() {
      if (handle !== null) clearTimeout(handle);
      handle = setTimeout(() => {
        handle = null;
        fn();
      }, waitMs);
    },
    cancel() {
      if (handle !== null) clearTimeout(handle);
      handle = null;
    },
    flush() {
      if (handle !== null) {
        clearTimeout(handle);
        handle = null;
        fn();
      }
    },
  };
}
