/**
 * Scene loop and phase flow.
 *
 * One scene: create a session, then post the currently held key every
 * 0.2 s until the server reports done, keeping a single step request in
 * flight.  The server pose is authoritative; a local arc-step
 * extrapolation only cross-checks it and raises a desync warning when
 * they disagree.  Network failures pause the scene and retry the same
 * tick until the server answers again.
 */

import type { ApiClient, HeldKey, Pose, SessionInfo, StepResult } from './api.js';

export const TICK_MS = 200;
export const SPEED = 2.0;
export const KEY_RATES: Record<HeldKey, number> = {
  left: 0.5,
  straight: 0.0,
  right: -0.5,
};
const DESYNC_TOL = 1e-6;
const RETRY_MS = 500;

export interface HeldKeySource {
  heldKey(): HeldKey;
}

/** Rendering/UX hooks; every callback is optional for headless runs. */
export interface SceneView {
  showState?(info: SessionInfo, step: StepResult | null): void;
  showPaused?(paused: boolean): void;
  showDesync?(worst: number): void;
  showSummary?(outcome: SceneOutcome): void;
  showBanner?(text: string): void;
}

export interface SceneOutcome {
  sessionId: string;
  posted: number;
  dangerEntered: boolean;
  minSeparation: number;
  desyncWorst: number;
}

export type Waiter = (ms: number) => Promise<void>;
const sleep: Waiter = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

/** Exact constant-rate arc step in chord form, the server's own rule. */
export function arcStep(pose: Pose, omega: number, dt: number): Pose {
  if (omega === 0) {
    return {
      x: pose.x + SPEED * dt * Math.cos(pose.psi),
      y: pose.y + SPEED * dt * Math.sin(pose.psi),
      psi: pose.psi,
    };
  }
  const half = 0.5 * omega * dt;
  const chord = SPEED * dt * (half === 0 ? 1 : Math.sin(half) / half);
  const mid = pose.psi + half;
  return {
    x: pose.x + chord * Math.cos(mid),
    y: pose.y + chord * Math.sin(mid),
    psi: pose.psi + omega * dt,
  };
}

function separation(a: Pose, b: Pose): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}

export class SessionLoop {
  constructor(
    private api: ApiClient,
    private input: HeldKeySource,
    private view: SceneView = {},
    private wait: Waiter = sleep,
  ) {}

  async runScene(
    seed: number,
    subject: string,
    phase: 'practice' | 'main',
    modelId: string | null = null,
  ): Promise<SceneOutcome> {
    const info = await this.api.createSession(seed, subject, phase, modelId);
    let human = info.human;
    let posted = 0;
    let minSep = separation(info.human, info.robot);
    let desyncWorst = 0;
    this.view.showState?.(info, null);
    for (;;) {
      await this.wait(TICK_MS);
      const key = this.input.heldKey();
      const expected = arcStep(human, KEY_RATES[key], info.dt);
      const res = await this.postWithResume(info.session_id, key);
      posted += 1;
      human = res.human;
      const drift = Math.max(
        Math.abs(res.human.x - expected.x),
        Math.abs(res.human.y - expected.y),
        Math.abs(res.human.psi - expected.psi),
      );
      if (drift > DESYNC_TOL) {
        desyncWorst = Math.max(desyncWorst, drift);
        this.view.showDesync?.(drift);
      }
      minSep = Math.min(minSep, separation(res.human, res.robot));
      this.view.showState?.(info, res);
      if (res.done) break;
    }
    const outcome: SceneOutcome = {
      sessionId: info.session_id,
      posted,
      dangerEntered: minSep < info.capture_radius,
      minSeparation: minSep,
      desyncWorst,
    };
    this.view.showSummary?.(outcome);
    return outcome;
  }

  private async postWithResume(sid: string, key: HeldKey): Promise<StepResult> {
    let paused = false;
    for (;;) {
      try {
        const res = await this.api.step(sid, key);
        if (paused) this.view.showPaused?.(false);
        return res;
      } catch (err) {
        // Server-side rejections (4xx) are programming errors; only
        // transport failures get the pause-and-retry treatment.
        if (err instanceof Error && /^\d{3} /.test(err.message)) throw err;
        if (!paused) {
          paused = true;
          this.view.showPaused?.(true);
        }
        await this.wait(RETRY_MS);
      }
    }
  }
}

export interface FlowConfig {
  subject: string;
  practiceSeeds: number[];
  mainSeeds: number[];
  modelId?: string | null;
}

export function defaultFlowConfig(subject: string, baseSeed = 0): FlowConfig {
  return {
    subject,
    practiceSeeds: [9000, 9001, 9002].map((s) => s + baseSeed),
    mainSeeds: Array.from({ length: 50 }, (_, i) => baseSeed + i),
  };
}

/** Instructions, then the practice block, then the main block. */
export class SessionFlow {
  constructor(
    private loop: SessionLoop,
    private config: FlowConfig,
    private view: SceneView = {},
  ) {}

  async run(): Promise<SceneOutcome[]> {
    this.view.showBanner?.(
      'Hold the left/right arrow to steer around the other vehicle; ' +
        'release to go straight.',
    );
    const outcomes: SceneOutcome[] = [];
    for (const [i, seed] of this.config.practiceSeeds.entries()) {
      this.view.showBanner?.(
        `Practice ${i + 1} of ${this.config.practiceSeeds.length}`,
      );
      outcomes.push(
        await this.loop.runScene(seed, this.config.subject, 'practice'),
      );
    }
    for (const [i, seed] of this.config.mainSeeds.entries()) {
      this.view.showBanner?.(`Scene ${i + 1} of ${this.config.mainSeeds.length}`);
      outcomes.push(
        await this.loop.runScene(
          seed,
          this.config.subject,
          'main',
          this.config.modelId ?? null,
        ),
      );
    }
    return outcomes;
  }
}
