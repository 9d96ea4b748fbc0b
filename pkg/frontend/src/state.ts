/** Local workspace state for a rating session.
 *
 * Ratings are kept append-only: resubmitting the same (instance, handle)
 * replaces the visible rating but the history is retained, matching the
 * server's overwrite-with-history store. Handles stay opaque until the
 * session closes and the resolve call fills in model names.
 */

import type { BlindedOutput, Rating } from './api.js';

export interface RatingEntry {
  instanceId: string;
  outputId: string;
  rating: Rating;
  submittedAt: number;
}

export class WorkspaceState {
  private readonly history: RatingEntry[] = [];
  private readonly outputsByInstance = new Map<string, BlindedOutput[]>();
  private resolvedModels: Record<string, string> | null = null;
  private closed = false;

  constructor(
    public readonly sessionId: string,
    public readonly raterId: string,
    public readonly assigned: string[],
  ) {}

  get isClosed(): boolean {
    return this.closed;
  }

  setOutputs(instanceId: string, outputs: BlindedOutput[]): void {
    if (this.closed) throw new Error('session is closed');
    this.outputsByInstance.set(instanceId, outputs);
  }

  outputs(instanceId: string): BlindedOutput[] {
    return this.outputsByInstance.get(instanceId) ?? [];
  }

  recordRating(instanceId: string, outputId: string, rating: Rating): void {
    if (this.closed) throw new Error('session is closed');
    this.history.push({
      instanceId,
      outputId,
      rating,
      submittedAt: this.history.length,
    });
  }

  /** The visible rating: the latest entry for the pair, if any. */
  currentRating(instanceId: string, outputId: string): Rating | undefined {
    for (let i = this.history.length - 1; i >= 0; i--) {
      const entry = this.history[i];
      if (entry.instanceId === instanceId && entry.outputId === outputId) {
        return entry.rating;
      }
    }
    return undefined;
  }

  ratingHistory(instanceId: string, outputId: string): RatingEntry[] {
    return this.history.filter(
      (e) => e.instanceId === instanceId && e.outputId === outputId,
    );
  }

  /** Instances still missing a rating for at least one shown output. */
  pendingInstances(): string[] {
    return this.assigned.filter((instanceId) => {
      const outputs = this.outputsByInstance.get(instanceId);
      if (!outputs || outputs.length === 0) return true;
      return outputs.some((o) => this.currentRating(instanceId, o.handle) === undefined);
    });
  }

  close(resolvedModels: Record<string, string>): void {
    this.closed = true;
    this.resolvedModels = resolvedModels;
  }

  /** Model name behind a handle; null while the session is still blinded. */
  modelFor(outputId: string): string | null {
    if (!this.closed || this.resolvedModels === null) return null;
    return this.resolvedModels[outputId] ?? null;
  }
}
