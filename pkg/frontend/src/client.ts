/**
 * Typed fetch client for the annotation service. Every method maps to
 * one documented endpoint; non-2xx responses raise with the server's
 * detail message so the UI can surface it.
 */

import type {
  SessionConfig,
  SessionResource,
  TurnView,
} from './types.js';

export class ServiceError extends Error {
  constructor(public status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(response.status, detail);
}

export class StudioClient {
  constructor(private baseUrl: string = '') {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(imageB64: string, question: string,
                      config: SessionConfig = {}): Promise<SessionResource> {
    const response = await fetch(this.url('/sessions'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ image_b64: imageB64, question, ...config }),
    });
    await raiseForStatus(response);
    return response.json();
  }

  async postTurn(sessionId: string, userText?: string,
                 imageB64?: string): Promise<TurnView> {
    const body: Record<string, string> = {};
    if (userText) body.user_text = userText;
    if (imageB64) body.image_b64 = imageB64;
    const response = await fetch(this.url(`/sessions/${sessionId}/turns`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    await raiseForStatus(response);
    return response.json();
  }

  async getSession(sessionId: string): Promise<SessionResource> {
    const response = await fetch(this.url(`/sessions/${sessionId}`));
    await raiseForStatus(response);
    return response.json();
  }

  async getOverlaySvg(sessionId: string): Promise<string> {
    const response = await fetch(this.url(`/sessions/${sessionId}/overlay.svg`));
    await raiseForStatus(response);
    return response.text();
  }

  async setStrokeVisibility(sessionId: string, strokeId: string,
                            visible: boolean): Promise<void> {
    const response = await fetch(
      this.url(`/sessions/${sessionId}/strokes/${strokeId}`), {
        method: 'PATCH',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ visible }),
      });
    await raiseForStatus(response);
  }

  async exportArtifact(sessionId: string,
                       kind: 'svg' | 'png' | 'anno.json'): Promise<Blob> {
    const response = await fetch(
      this.url(`/sessions/${sessionId}/export?kind=${kind}`));
    await raiseForStatus(response);
    return response.blob();
  }
}
