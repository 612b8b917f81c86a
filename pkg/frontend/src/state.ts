/**
 * Studio state store: mirrors the service's session resource, enforces
 * a single pending turn, and reconciles layer state from GET responses
 * (so a page refresh reconstructs everything from the server).
 */

import { StudioClient } from './client.js';
import type { LayerView, SessionResource, TurnView } from './types.js';

export interface TranscriptEntry {
  index: number;
  strokeIds: string[];
  finalAnswer: string | null;
  violations: string[];
}

export type Listener = () => void;

export class StudioState {
  sessionId: string | null = null;
  status: SessionResource['status'] | null = null;
  layers: LayerView[] = [];
  transcript: TranscriptEntry[] = [];
  overlayVersion = 0;
  finalAnswer: string | null = null;
  pendingTurn = false;
  lastError: string | null = null;

  private listeners: Listener[] = [];

  constructor(readonly client: StudioClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  async startSession(imageB64: string, question: string,
                     config: Parameters<StudioClient['createSession']>[2] = {}):
      Promise<SessionResource> {
    const resource = await this.client.createSession(imageB64, question, config);
    this.sessionId = resource.id;
    this.status = resource.status;
    this.layers = [];
    this.transcript = [];
    this.overlayVersion = resource.overlay_version;
    this.finalAnswer = null;
    this.lastError = null;
    this.notify();
    return resource;
  }

  /** One protocol turn; refuses to overlap in-flight turns. */
  async stepTurn(userText?: string, imageB64?: string): Promise<TurnView> {
    if (!this.sessionId) throw new Error('no active session');
    if (this.pendingTurn) throw new Error('a turn is already pending');
    this.pendingTurn = true;
    this.notify();
    try {
      const turn = await this.client.postTurn(this.sessionId, userText, imageB64);
      this.transcript.push({
        index: turn.index,
        strokeIds: turn.delta.strokes.map((s) => s.id),
        finalAnswer: turn.final_answer,
        violations: turn.violations,
      });
      this.status = turn.status;
      this.overlayVersion = turn.overlay_version;
      this.finalAnswer = turn.final_answer;
      await this.refresh();
      return turn;
    } catch (error) {
      this.lastError = error instanceof Error ? error.message : String(error);
      this.notify();
      throw error;
    } finally {
      this.pendingTurn = false;
      this.notify();
    }
  }

  /** Optimistic toggle, reconciled against the server on the next GET. */
  async toggleLayer(strokeId: string): Promise<void> {
    if (!this.sessionId) throw new Error('no active session');
    const layer = this.layers.find((l) => l.stroke_id === strokeId);
    if (!layer) throw new Error(`unknown layer ${strokeId}`);
    const target = !layer.visible;
    layer.visible = target;
    this.notify();
    try {
      await this.client.setStrokeVisibility(this.sessionId, strokeId, target);
    } finally {
      await this.refresh();
    }
  }

  /** Pull the authoritative session state (refresh-safe reconstruction). */
  async refresh(): Promise<void> {
    if (!this.sessionId) return;
    const resource = await this.client.getSession(this.sessionId);
    this.status = resource.status;
    this.layers = resource.layers ?? [];
    this.overlayVersion = resource.overlay_version;
    this.finalAnswer = resource.final_answer;
    this.notify();
  }

  visibleLayerCount(): number {
    return this.layers.filter((l) => l.visible).length;
  }
}
