/**
 * End-to-end studio flow against the mock-backed service: create a
 * session, step three strokes in, toggle one off, and verify the
 * exported PNG pixel-equals the server's composite without that layer
 * (via an independent two-stroke reference session). The exported
 * anno.json must re-parse and mirror the layer list.
 */

import { PNG } from 'pngjs';
import { beforeAll, describe, expect, inject, it } from 'vitest';

import { ServiceError, StudioClient } from '../src/client.js';
import { StudioState } from '../src/state.js';
import { parseAnnotationDocument } from '../src/types.js';

const baseUrl = inject('studioBaseUrl') as string;

function whitePngB64(width = 1000, height = 1000): string {
  const png = new PNG({ width, height });
  png.data.fill(255);
  return PNG.sync.write(png).toString('base64');
}

async function decode(blob: Blob): Promise<PNG> {
  return PNG.sync.read(Buffer.from(await blob.arrayBuffer()));
}

describe('studio flow', () => {
  const client = new StudioClient(baseUrl);
  const state = new StudioState(client);
  let sessionA = '';

  beforeAll(async () => {
    const resource = await state.startSession(
      whitePngB64(), 'Trace the path.', { provider: 'mock' });
    sessionA = resource.id;
  });

  it('steps three turns into three layers', async () => {
    for (const expected of [1, 2, 3]) {
      const turn = await state.stepTurn();
      expect(turn.index).toBe(expected);
      expect(turn.delta.strokes).toHaveLength(1);
    }
    expect(state.layers.map((l) => l.stroke_id))
      .toEqual(['first', 'second', 'third']);
    expect(state.visibleLayerCount()).toBe(3);
    const svg = await client.getOverlaySvg(sessionA);
    expect(svg.match(/<g id=/g)).toHaveLength(3);
  });

  it('blocks overlapping turns client-side', async () => {
    const first = state.stepTurn();           // empty-answer turn
    await expect(state.stepTurn()).rejects.toThrow(/already pending/);
    await first;
  });

  it('shows the final answer on the terminal turn', async () => {
    const turn = await state.stepTurn();      // final-answer turn
    expect(turn.status).toBe('done');
    expect(state.finalAnswer).toBe('42');
  });

  it('toggling a layer off makes the export pixel-equal the composite without it',
      async () => {
    await state.toggleLayer('third');
    const toggled = state.layers.find((l) => l.stroke_id === 'third');
    expect(toggled?.visible).toBe(false);
    expect(state.visibleLayerCount()).toBe(2);

    const exported = await decode(
      await client.exportArtifact(sessionA, 'png'));

    // independent reference: a session whose script drew only the two
    // still-visible strokes (the service assigns it SCRIPT_B)
    const reference = new StudioState(client);
    const resourceB = await reference.startSession(
      whitePngB64(), 'Trace the path.', { provider: 'mock' });
    for (let i = 0; i < 4; i += 1) await reference.stepTurn();
    expect(reference.layers.map((l) => l.stroke_id))
      .toEqual(['first', 'second']);
    const expected = await decode(
      await client.exportArtifact(resourceB.id, 'png'));

    expect(exported.width).toBe(expected.width);
    expect(exported.height).toBe(expected.height);
    expect(Buffer.compare(exported.data, expected.data)).toBe(0);
  });

  it('re-enabling the layer restores the original pixels', async () => {
    const before = Buffer.from(await (
      await client.exportArtifact(sessionA, 'png')).arrayBuffer());
    await state.toggleLayer('third');   // back on
    const after = Buffer.from(await (
      await client.exportArtifact(sessionA, 'png')).arrayBuffer());
    expect(Buffer.compare(before, after)).not.toBe(0);
    await state.toggleLayer('third');   // off again
    const offAgain = Buffer.from(await (
      await client.exportArtifact(sessionA, 'png')).arrayBuffer());
    expect(Buffer.compare(before, offAgain)).toBe(0);
  });

  it('exported anno.json re-parses and mirrors the layer list', async () => {
    const blob = await client.exportArtifact(sessionA, 'anno.json');
    const doc = parseAnnotationDocument(await blob.text());
    expect(doc.strokes.map((s) => s.id)).toEqual(['first', 'second', 'third']);
    expect(doc.final_answer).toBe('42');
    for (const stroke of doc.strokes) {
      expect(stroke.points.length).toBe(stroke.t.length);
    }
  });

  it('state is reconstructable from GET alone (refresh-safe)', async () => {
    const fresh = new StudioState(client);
    fresh.sessionId = sessionA;
    await fresh.refresh();
    expect(fresh.status).toBe('done');
    expect(fresh.layers).toEqual(state.layers);
    expect(fresh.finalAnswer).toBe('42');
  });
});

describe('error surfaces', () => {
  const client = new StudioClient(baseUrl);

  it('rejects a bad image with a 400 detail', async () => {
    await expect(client.createSession('!!!notbase64!!!', 'q'))
      .rejects.toMatchObject({ status: 400 });
  });

  it('rejects an unknown provider with 422', async () => {
    await expect(
      client.createSession(whitePngB64(8, 8), 'q', { provider: 'nope' }))
      .rejects.toMatchObject({ status: 422 });
  });

  it('404s on unknown sessions', async () => {
    await expect(client.getSession('missing'))
      .rejects.toBeInstanceOf(ServiceError);
  });
});

describe('annotation document parsing', () => {
  it('rejects malformed documents', () => {
    expect(() => parseAnnotationDocument('{}')).toThrow(/strokes/);
    expect(() => parseAnnotationDocument(JSON.stringify({
      strokes: [{ id: 'x', points: [{ x: 1, y: 2 }], t: [] }],
    }))).toThrow(/malformed stroke/);
  });

  it('accepts the dialect shape', () => {
    const doc = parseAnnotationDocument(JSON.stringify({
      concept: null,
      strokes: [{ id: 's', points: [{ x: 1, y: 2 }], t: [0.0] }],
      final_answer: '3',
    }));
    expect(doc.strokes[0].id).toBe('s');
  });
});
