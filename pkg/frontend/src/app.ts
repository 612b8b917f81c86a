/**
 * DOM wiring for the studio page. The base image stays an untouched
 * <img>; strokes live in a separate inline-SVG element fetched from the
 * service, so hiding a layer or exporting never re-rasterizes anything
 * client-side.
 */

import { StudioClient } from './client.js';
import { StudioState } from './state.js';

const client = new StudioClient('');
const state = new StudioState(client);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const fileInput = el<HTMLInputElement>('image-file');
const questionInput = el<HTMLTextAreaElement>('question');
const gridToggle = el<HTMLInputElement>('grid-toggle');
const startButton = el<HTMLButtonElement>('start');
const stepButton = el<HTMLButtonElement>('step');
const guidanceInput = el<HTMLInputElement>('guidance');
const baseImage = el<HTMLImageElement>('base-image');
const overlayHost = el<HTMLDivElement>('overlay-host');
const layerList = el<HTMLUListElement>('layers');
const transcriptList = el<HTMLOListElement>('transcript');
const answerBanner = el<HTMLDivElement>('answer-banner');
const errorBox = el<HTMLDivElement>('error-box');

let imageB64: string | null = null;

fileInput.addEventListener('change', () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const reader = new FileReader();
  reader.onload = () => {
    const url = reader.result as string;
    imageB64 = url.split(',', 2)[1] ?? null;
    baseImage.src = url;
    errorBox.textContent = '';
  };
  reader.onerror = () => {
    errorBox.textContent = 'could not read the selected file';
  };
  reader.readAsDataURL(file);
});

startButton.addEventListener('click', async () => {
  if (!imageB64) {
    errorBox.textContent = 'choose an image first';
    return;
  }
  try {
    await state.startSession(imageB64, questionInput.value || 'Annotate this image.', {
      grid: gridToggle.checked,
      frame: gridToggle.checked ? 'grid:50' : 'normalized:1000',
      origin: gridToggle.checked ? 'bottom_left' : 'top_left',
    });
    await renderOverlay();
  } catch (error) {
    errorBox.textContent = error instanceof Error ? error.message : String(error);
  }
});

stepButton.addEventListener('click', async () => {
  try {
    await state.stepTurn(guidanceInput.value || undefined);
    guidanceInput.value = '';
    await renderOverlay();
  } catch (error) {
    errorBox.textContent = error instanceof Error ? error.message : String(error);
  }
});

for (const kind of ['svg', 'png', 'anno.json'] as const) {
  el<HTMLButtonElement>(`export-${kind.replace('.', '-')}`)
    .addEventListener('click', async () => {
      if (!state.sessionId) return;
      const blob = await client.exportArtifact(state.sessionId, kind);
      const link = document.createElement('a');
      link.href = URL.createObjectURL(blob);
      link.download = `${state.sessionId}.${kind === 'anno.json' ? 'anno.json' : kind}`;
      link.click();
      URL.revokeObjectURL(link.href);
    });
}

async function renderOverlay(): Promise<void> {
  if (!state.sessionId) return;
  overlayHost.innerHTML = await client.getOverlaySvg(state.sessionId);
  const svg = overlayHost.querySelector('svg');
  if (svg) {
    svg.setAttribute('preserveAspectRatio', 'xMidYMid meet');
    svg.style.width = '100%';
    svg.style.height = '100%';
  }
}

state.subscribe(() => {
  stepButton.disabled = state.pendingTurn || state.status === 'done'
    || state.status === 'failed' || !state.sessionId;
  startButton.disabled = state.pendingTurn;

  layerList.innerHTML = '';
  for (const layer of state.layers) {
    const item = document.createElement('li');
    const checkbox = document.createElement('input');
    checkbox.type = 'checkbox';
    checkbox.checked = layer.visible;
    checkbox.addEventListener('change', async () => {
      await state.toggleLayer(layer.stroke_id);
      await renderOverlay();
    });
    const swatch = document.createElement('span');
    swatch.className = 'swatch';
    swatch.style.background = layer.color;
    const label = document.createElement('span');
    label.textContent = `${layer.stroke_id}${layer.is_text ? ' (text)' : ''}`;
    item.append(checkbox, swatch, label);
    layerList.append(item);
  }

  transcriptList.innerHTML = '';
  for (const entry of state.transcript) {
    const item = document.createElement('li');
    item.textContent = entry.finalAnswer
      ? `final answer: ${entry.finalAnswer}`
      : (entry.strokeIds.length
        ? `stroke ${entry.strokeIds.join(', ')}`
        : 'model finished drawing');
    transcriptList.append(item);
  }

  if (state.status === 'done' && state.finalAnswer) {
    answerBanner.textContent = `Answer: ${state.finalAnswer}`;
    answerBanner.hidden = false;
  } else if (state.status === 'failed') {
    answerBanner.textContent = 'session failed (see error)';
    answerBanner.hidden = false;
  } else {
    answerBanner.hidden = true;
  }

  errorBox.textContent = state.lastError ?? errorBox.textContent;
});
