/**
 * Wire the pieces together against a live service.
 *
 * The step loop owns the session; an independent 1 Hz timer refreshes
 * the overlay for the session currently on screen when a model is
 * selected.
 */

import type { SessionInfo, StepResult } from './api.js';
import { HttpClient } from './api.js';
import { KeyTracker } from './input.js';
import { defaultFlowConfig, SceneOutcome, SessionFlow, SessionLoop } from './loop.js';
import { CanvasRenderer } from './render.js';

async function boot(): Promise<void> {
  const canvas = document.getElementById('scene') as HTMLCanvasElement;
  const legend = document.getElementById('legend');
  const api = new HttpClient('');
  const keys = new KeyTracker();
  keys.attach(window);

  const renderer = new CanvasRenderer(canvas, legend);
  let activeSession: string | null = null;
  const view = {
    showState(info: SessionInfo, step: StepResult | null): void {
      activeSession = info.session_id;
      renderer.showState(info, step);
    },
    showSummary(outcome: SceneOutcome): void {
      activeSession = null;
      renderer.showSummary(outcome);
    },
    showBanner: (t: string) => renderer.showBanner(t),
    showPaused: (p: boolean) => renderer.showPaused(p),
    showDesync: (w: number) => renderer.showDesync(w),
  };
  const loop = new SessionLoop(api, keys, view);

  const params = new URLSearchParams(window.location.search);
  const subject = params.get('subject') ?? 'anon';
  const modelId = params.get('model');
  const config = defaultFlowConfig(subject, Number(params.get('seed') ?? '0'));
  config.modelId = modelId;

  setInterval(async () => {
    if (activeSession === null || modelId === null) return;
    try {
      renderer.setOverlay(await api.overlay(activeSession));
    } catch {
      renderer.draw(); // stale graying handles missed refreshes
    }
  }, 1000);

  await new SessionFlow(loop, config, view).run();
  renderer.showBanner('All scenes complete. Thank you!');
  renderer.draw();
}

boot().catch((err) => {
  document.body.textContent = `Failed to start: ${err}`;
});
