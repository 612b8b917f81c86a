/**
 * Wire types for the annotation service JSON API and the `.anno.json`
 * stroke dialect.
 */

export interface StrokePoint {
  x: number;
  y: number;
}

export interface StrokeText {
  content: string;
  size: number;
  unit: 'cells' | 'px';
  color: string;
}

export interface Stroke {
  id: string;
  points: StrokePoint[];
  t: number[];
  text?: StrokeText;
}

export interface AnnotationDocument {
  concept: string | null;
  strokes: Stroke[];
  final_answer: string | null;
}

export interface LayerView {
  stroke_id: string;
  visible: boolean;
  color: string;
  is_text: boolean;
}

export interface SessionResource {
  id: string;
  status: 'open' | 'awaiting_final' | 'done' | 'failed';
  turn_count: number;
  overlay_version: number;
  created_at: number;
  final_answer: string | null;
  layers?: LayerView[];
}

export interface TurnView {
  index: number;
  delta: AnnotationDocument;
  overlay_version: number;
  status: SessionResource['status'];
  final_answer: string | null;
  violations: string[];
}

export interface SessionConfig {
  provider?: string;
  grid?: boolean;
  mode?: 'stepwise' | 'single';
  frame?: string;
  origin?: 'top_left' | 'bottom_left';
}

/** Parse an exported .anno.json document, checking the dialect shape. */
export function parseAnnotationDocument(raw: string): AnnotationDocument {
  const doc = JSON.parse(raw);
  if (typeof doc !== 'object' || doc === null || !Array.isArray(doc.strokes)) {
    throw new Error('not an annotation document: missing strokes array');
  }
  for (const stroke of doc.strokes) {
    if (typeof stroke.id !== 'string' || !Array.isArray(stroke.points) ||
        !Array.isArray(stroke.t) || stroke.points.length !== stroke.t.length) {
      throw new Error(`malformed stroke ${JSON.stringify(stroke.id)}`);
    }
    for (const p of stroke.points) {
      if (typeof p.x !== 'number' || typeof p.y !== 'number') {
        throw new Error(`malformed point in stroke ${stroke.id}`);
      }
    }
  }
  return doc as AnnotationDocument;
}
