/**
 * Held-arrow-key tracker.
 *
 * The loop polls the hold state at every server tick instead of acting
 * on keydown/keyup events, so what gets posted is exactly "which key is
 * down right now".  Left arrow turns the vehicle left (positive rate).
 */

import type { HeldKey } from './api.js';

export class KeyTracker {
  private left = false;
  private right = false;

  private onDown = (e: KeyboardEvent): void => this.set(e.key, true);
  private onUp = (e: KeyboardEvent): void => this.set(e.key, false);

  attach(target: EventTarget): void {
    target.addEventListener('keydown', this.onDown as EventListener);
    target.addEventListener('keyup', this.onUp as EventListener);
  }

  detach(target: EventTarget): void {
    target.removeEventListener('keydown', this.onDown as EventListener);
    target.removeEventListener('keyup', this.onUp as EventListener);
  }

  set(key: string, down: boolean): void {
    if (key === 'ArrowLeft') this.left = down;
    if (key === 'ArrowRight') this.right = down;
  }

  /** Both arrows held cancel out to straight. */
  heldKey(): HeldKey {
    if (this.left && !this.right) return 'left';
    if (this.right && !this.left) return 'right';
    return 'straight';
  }
}
