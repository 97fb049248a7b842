// Bounded undo/redo over opaque snapshots. The editor pushes one snapshot of
// the pre-change state per operation; undo swaps it with a snapshot of the
// present, so redo restores the exact bytes.

export class History<T> {
  private undoStack: T[] = [];
  private redoStack: T[] = [];

  constructor(readonly capacity: number = 50) {
    if (capacity < 20) throw new Error(`history capacity ${capacity} below minimum 20`);
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  canRedo(): boolean {
    return this.redoStack.length > 0;
  }

  depth(): { undo: number; redo: number } {
    return { undo: this.undoStack.length, redo: this.redoStack.length };
  }

  push(snapshot: T): void {
    this.undoStack.push(snapshot);
    if (this.undoStack.length > this.capacity) this.undoStack.shift();
    this.redoStack = [];
  }

  /** Pop the last snapshot, storing `present` for redo. */
  undo(present: T): T | null {
    const prev = this.undoStack.pop();
    if (prev === undefined) return null;
    this.redoStack.push(present);
    return prev;
  }

  /** Reapply the last undone snapshot, storing `present` for undo. */
  redo(present: T): T | null {
    const next = this.redoStack.pop();
    if (next === undefined) return null;
    this.undoStack.push(present);
    return next;
  }

  clear(): void {
    this.undoStack = [];
    this.redoStack = [];
  }
}
