/**
 * Typed client for the data-collection service HTTP API.
 *
 * The server owns all dynamics; the UI only posts held keys and draws
 * what comes back.
 */

export interface Pose {
  x: number;
  y: number;
  psi: number;
}

export interface SessionInfo {
  session_id: string;
  dt: number;
  steps: number;
  capture_radius: number;
  goal: [number, number];
  human: Pose;
  robot: Pose;
}

export interface StepResult {
  step: number;
  t: number;
  human: Pose;
  robot: Pose;
  done: boolean;
}

export interface OverlayData {
  step: number;
  levels: number;
  epsilons: number[];
  probabilities: (number | null)[];
  nesting_ok: boolean;
  pgm_base64: string;
  extent: { xmin: number; xmax: number; ymin: number; ymax: number };
}

export interface ModelInfo {
  id: string;
  family: string;
  layout: string;
  task: string;
}

export type HeldKey = 'left' | 'straight' | 'right';

export interface ApiClient {
  createSession(
    seed: number,
    subject: string,
    phase: 'practice' | 'main',
    modelId?: string | null,
  ): Promise<SessionInfo>;
  step(sessionId: string, key: HeldKey): Promise<StepResult>;
  overlay(sessionId: string): Promise<OverlayData>;
  listModels(): Promise<ModelInfo[]>;
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    throw new Error(`${res.status} ${await res.text()}`);
  }
  return (await res.json()) as T;
}

export class HttpClient implements ApiClient {
  constructor(private base: string = '') {}

  async createSession(
    seed: number,
    subject: string,
    phase: 'practice' | 'main',
    modelId: string | null = null,
  ): Promise<SessionInfo> {
    return asJson(
      await fetch(`${this.base}/sessions`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ seed, subject, phase, model_id: modelId }),
      }),
    );
  }

  async step(sessionId: string, key: HeldKey): Promise<StepResult> {
    return asJson(
      await fetch(`${this.base}/sessions/${sessionId}/step`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ key }),
      }),
    );
  }

  async overlay(sessionId: string): Promise<OverlayData> {
    return asJson(await fetch(`${this.base}/sessions/${sessionId}/shfrs`));
  }

  async listModels(): Promise<ModelInfo[]> {
    const data = await asJson<{ models: ModelInfo[] }>(
      await fetch(`${this.base}/models`),
    );
    return data.models;
  }
}
