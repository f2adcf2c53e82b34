/**
 * Occupancy-raster overlay: PGM decoding, region legend, staleness.
 *
 * The server ships the nested-region raster as a binary PGM in base64.
 * Region 1 is innermost and darkest; the background is white (255).
 */

import type { OverlayData } from './api.js';

export interface PgmImage {
  width: number;
  height: number;
  gray: Uint8Array;
}

export function decodePgm(base64: string): PgmImage {
  const raw = typeof atob === 'function'
    ? Uint8Array.from(atob(base64), (c) => c.charCodeAt(0))
    : new Uint8Array(Buffer.from(base64, 'base64'));
  let header = '';
  let i = 0;
  let fields = 0;
  // Header is "P5\n<w> <h>\n<maxval>\n"; everything after is pixel data.
  for (; i < raw.length && fields < 4; i++) {
    const ch = String.fromCharCode(raw[i]);
    if (ch === ' ' || ch === '\n') fields += 1;
    header += ch;
  }
  const [magic, w, h, maxval] = header.trim().split(/\s+/);
  if (magic !== 'P5' || maxval !== '255') {
    throw new Error(`unsupported PGM header: ${JSON.stringify(header)}`);
  }
  const width = parseInt(w, 10);
  const height = parseInt(h, 10);
  const gray = raw.slice(i, i + width * height);
  if (gray.length !== width * height) {
    throw new Error(`PGM pixel count ${gray.length} != ${width * height}`);
  }
  return { width, height, gray };
}

/** Gray value the server assigns to region ``level`` (1-based). */
export function shadeForLevel(level: number, levels: number): number {
  return 40 + (level - 1) * Math.floor(160 / levels);
}

/** Innermost region first, matching the raster's level numbering. */
export const REGION_COLORS = [
  '#d62728', // red
  '#ffbf00', // yellow
  '#2ca02c', // green
  '#1f77b4', // blue
  '#9467bd', // purple
];

export function colorForLevel(level: number): string {
  return REGION_COLORS[(level - 1) % REGION_COLORS.length];
}

export interface LegendEntry {
  level: number;
  probability: number | null;
  color: string;
  empty: boolean;
  label: string;
}

/**
 * One legend entry per region, innermost first.  Empty regions (no
 * pixel carries their shade) keep their entry, tagged "(empty)".
 */
export function buildLegend(data: OverlayData, image?: PgmImage): LegendEntry[] {
  const counts = new Array<number>(data.levels).fill(0);
  if (image) {
    for (const g of image.gray) {
      for (let level = 1; level <= data.levels; level++) {
        if (g === shadeForLevel(level, data.levels)) {
          counts[level - 1] += 1;
          break;
        }
      }
    }
  }
  const entries: LegendEntry[] = [];
  for (let level = 1; level <= data.levels; level++) {
    const p = data.probabilities[level - 1] ?? null;
    const empty = image !== undefined && counts[level - 1] === 0;
    let label = p === null ? 'p n/a' : `p ${p.toFixed(2)}`;
    if (empty) label += ' (empty)';
    entries.push({
      level,
      probability: p,
      color: colorForLevel(level),
      empty,
      label,
    });
  }
  return entries;
}

export const STALE_MS = 3000;

/** Last fetched overlay plus how fresh it is. */
export class OverlayState {
  private data: OverlayData | null = null;
  private image: PgmImage | null = null;
  private fetchedAt = -Infinity;

  update(data: OverlayData, now: number): void {
    this.data = data;
    this.image = decodePgm(data.pgm_base64);
    this.fetchedAt = now;
  }

  current(): { data: OverlayData; image: PgmImage } | null {
    if (this.data === null || this.image === null) return null;
    return { data: this.data, image: this.image };
  }

  isStale(now: number): boolean {
    return now - this.fetchedAt > STALE_MS;
  }
}
