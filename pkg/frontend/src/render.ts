/**
 * Canvas renderer: fixed [-25, 25]^2 world box, arrow glyphs for the
 * vehicles, goal cross, danger-zone circle, and the semi-transparent
 * region overlay with its legend.
 */

import type { OverlayData, Pose, SessionInfo, StepResult } from './api.js';
import {
  buildLegend,
  colorForLevel,
  shadeForLevel,
  OverlayState,
  PgmImage,
} from './overlay.js';
import type { SceneOutcome, SceneView } from './loop.js';

export const WORLD_MIN = -25;
export const WORLD_MAX = 25;

export interface CanvasPoint {
  cx: number;
  cy: number;
}

/** World y grows upward; canvas y grows downward. */
export function worldToCanvas(
  x: number,
  y: number,
  width: number,
  height: number,
): CanvasPoint {
  const span = WORLD_MAX - WORLD_MIN;
  return {
    cx: ((x - WORLD_MIN) / span) * width,
    cy: (1 - (y - WORLD_MIN) / span) * height,
  };
}

export class CanvasRenderer implements SceneView {
  private ctx: CanvasRenderingContext2D;
  private overlayState = new OverlayState();
  private banner = '';
  private info: SessionInfo | null = null;
  private last: StepResult | null = null;
  private paused = false;
  private desync = 0;

  constructor(
    private canvas: HTMLCanvasElement,
    private legendEl: HTMLElement | null = null,
    private now: () => number = () => performance.now(),
  ) {
    const ctx = canvas.getContext('2d');
    if (!ctx) throw new Error('2d canvas context unavailable');
    this.ctx = ctx;
  }

  showBanner(text: string): void {
    this.banner = text;
  }

  showState(info: SessionInfo, step: StepResult | null): void {
    this.info = info;
    this.last = step;
    this.draw();
  }

  showPaused(paused: boolean): void {
    this.paused = paused;
    this.draw();
  }

  showDesync(worst: number): void {
    this.desync = Math.max(this.desync, worst);
  }

  showSummary(outcome: SceneOutcome): void {
    this.banner = outcome.dangerEntered
      ? 'Danger zone entered'
      : 'Scene clear';
    this.draw();
  }

  setOverlay(data: OverlayData): void {
    this.overlayState.update(data, this.now());
    if (this.legendEl) {
      const image = this.overlayState.current()?.image;
      this.legendEl.innerHTML = buildLegend(data, image)
        .map(
          (e) =>
            `<div><span style="background:${e.color}">&nbsp;&nbsp;</span> ` +
            `region ${e.level}: ${e.label}</div>`,
        )
        .join('');
    }
    this.draw();
  }

  private pt(x: number, y: number): CanvasPoint {
    return worldToCanvas(x, y, this.canvas.width, this.canvas.height);
  }

  private drawArrow(pose: Pose, color: string): void {
    const tail = this.pt(pose.x - 1.2 * Math.cos(pose.psi), pose.y - 1.2 * Math.sin(pose.psi));
    const tip = this.pt(pose.x + 1.2 * Math.cos(pose.psi), pose.y + 1.2 * Math.sin(pose.psi));
    const ctx = this.ctx;
    ctx.strokeStyle = color;
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(tail.cx, tail.cy);
    ctx.lineTo(tip.cx, tip.cy);
    for (const side of [-2.6, 2.6]) {
      const a = pose.psi + Math.PI + side / 3;
      const wing = this.pt(
        pose.x + 1.2 * Math.cos(pose.psi) + 0.8 * Math.cos(a),
        pose.y + 1.2 * Math.sin(pose.psi) + 0.8 * Math.sin(a),
      );
      ctx.moveTo(tip.cx, tip.cy);
      ctx.lineTo(wing.cx, wing.cy);
    }
    ctx.stroke();
  }

  private drawOverlay(data: OverlayData, image: PgmImage, stale: boolean): void {
    const { extent } = data;
    const img = this.ctx.createImageData(image.width, image.height);
    for (let i = 0; i < image.gray.length; i++) {
      const g = image.gray[i];
      if (g === 255) continue;
      let rgb = [128, 128, 128];
      if (!stale) {
        for (let level = 1; level <= data.levels; level++) {
          if (g === shadeForLevel(level, data.levels)) {
            const hex = colorForLevel(level);
            rgb = [1, 3, 5].map((k) => parseInt(hex.slice(k, k + 2), 16));
            break;
          }
        }
      }
      img.data.set([...rgb, 110], 4 * i);
    }
    const tl = this.pt(extent.xmin, extent.ymax);
    const br = this.pt(extent.xmax, extent.ymin);
    // ImageData ignores transforms, so draw via an offscreen canvas.
    const off = document.createElement('canvas');
    off.width = image.width;
    off.height = image.height;
    off.getContext('2d')!.putImageData(img, 0, 0);
    this.ctx.drawImage(off, tl.cx, tl.cy, br.cx - tl.cx, br.cy - tl.cy);
  }

  draw(): void {
    const ctx = this.ctx;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    ctx.fillStyle = '#fafafa';
    ctx.fillRect(0, 0, width, height);

    const overlay = this.overlayState.current();
    if (overlay) {
      this.drawOverlay(overlay.data, overlay.image, this.overlayState.isStale(this.now()));
    }
    if (this.info) {
      const human = this.last?.human ?? this.info.human;
      const robot = this.last?.robot ?? this.info.robot;
      const goal = this.pt(this.info.goal[0], this.info.goal[1]);
      ctx.strokeStyle = '#444';
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(goal.cx - 6, goal.cy - 6);
      ctx.lineTo(goal.cx + 6, goal.cy + 6);
      ctx.moveTo(goal.cx - 6, goal.cy + 6);
      ctx.lineTo(goal.cx + 6, goal.cy - 6);
      ctx.stroke();

      const rc = this.pt(robot.x, robot.y);
      const edge = this.pt(robot.x + this.info.capture_radius, robot.y);
      ctx.strokeStyle = 'rgba(214, 39, 40, 0.8)';
      ctx.beginPath();
      ctx.arc(rc.cx, rc.cy, edge.cx - rc.cx, 0, 2 * Math.PI);
      ctx.stroke();

      this.drawArrow(robot, '#555');
      this.drawArrow(human, '#d62728');

      const total = this.info.steps * this.info.dt;
      const left = Math.max(0, total - (this.last?.t ?? 0));
      ctx.fillStyle = '#222';
      ctx.font = '14px sans-serif';
      ctx.fillText(`${left.toFixed(1)} s`, width - 54, 20);
    }
    ctx.fillStyle = '#222';
    ctx.font = '15px sans-serif';
    ctx.fillText(this.banner, 12, 22);
    if (this.paused) {
      ctx.fillText('Connection lost, retrying', 12, 42);
    }
    if (this.desync > 0) {
      ctx.fillStyle = '#d62728';
      ctx.fillText(`Desync ${this.desync.toExponential(1)}`, 12, 62);
    }
  }
}
