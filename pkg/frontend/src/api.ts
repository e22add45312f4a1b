/** Typed client for the recommendation service. The wizard never computes
 * recommendations itself; every decision lives behind these endpoints. */

export interface QuestionDescriptor {
  item: string;
  prompt: string;
  why: string;
  kind: "bool" | "enum" | "int";
  domain: Array<string | boolean>;
  anchor: string;
}

export interface TranscriptAnswer {
  type: "answer";
  item: string;
  value: string | number | boolean;
}

export interface TranscriptGuide {
  type: "guide";
  key: string;
  choice: string;
}

export type TranscriptStep = TranscriptAnswer | TranscriptGuide;

export interface Tradeoff {
  sign: "+" | "-" | "o";
  text: string;
}

export interface GuideOption {
  id: string;
  label: string;
  recommended: boolean;
  notes: string[];
  tradeoffs: Tradeoff[];
}

export interface PendingGuide {
  key: string;
  guide: string;
  title: string;
  slot: string;
  scope: "global" | number[];
  options: GuideOption[];
  anchor: string;
}

export interface PoolEntry {
  metric: string;
  slot: string;
  params: Record<string, unknown>;
  optional: boolean;
  anchor: string;
  note?: string;
}

export interface PoolWarning {
  code: string;
  message: string;
  anchor: string;
}

export interface Pool {
  version: string;
  category: string;
  class_count: number;
  multi_class: PoolEntry[];
  per_class: Record<string, PoolEntry[]>;
  calibration: PoolEntry[];
  detection: {
    criterion: Record<string, unknown> | null;
    assignment: Record<string, unknown> | null;
    thresholds: number[] | null;
    threshold_policy: string | null;
  };
  aggregation: Record<string, unknown>;
  warnings: PoolWarning[];
  notes: string[];
  pending_guides: PendingGuide[];
  resolved_guides: Array<{ key: string; guide: string; choice: string }>;
}

export interface SessionSnapshot {
  id: string;
  question: QuestionDescriptor | null;
  category: string | null;
  transcript: TranscriptStep[];
}

export interface QuestionResponse {
  question: QuestionDescriptor | null;
  complete: boolean;
  category: string | null;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(`${base}${path}`, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export interface WizardApi {
  createSession(transcript?: TranscriptStep[]): Promise<SessionSnapshot>;
  question(sessionId: string): Promise<QuestionResponse>;
  answer(sessionId: string, item: string, value: unknown): Promise<QuestionResponse>;
  resolveGuide(sessionId: string, key: string, choice: string): Promise<void>;
  pool(sessionId: string): Promise<Pool>;
  /** Raw pool bytes, exactly as served; the export button must not re-encode. */
  poolText(sessionId: string): Promise<string>;
}

export function createApi(base: string): WizardApi {
  return {
    createSession(transcript?: TranscriptStep[]) {
      return request<SessionSnapshot>(base, "/session", {
        method: "POST",
        body: JSON.stringify(transcript ? { transcript } : {}),
      });
    },
    question(sessionId: string) {
      return request<QuestionResponse>(base, `/session/${sessionId}/question`);
    },
    answer(sessionId: string, item: string, value: unknown) {
      return request<QuestionResponse>(base, `/session/${sessionId}/answer`, {
        method: "POST",
        body: JSON.stringify({ item, value }),
      });
    },
    async resolveGuide(sessionId: string, key: string, choice: string) {
      await request<unknown>(base, `/session/${sessionId}/guide`, {
        method: "POST",
        body: JSON.stringify({ key, choice }),
      });
    },
    pool(sessionId: string) {
      return request<Pool>(base, `/session/${sessionId}/pool`);
    },
    async poolText(sessionId: string) {
      const response = await fetch(`${base}/session/${sessionId}/pool`);
      if (!response.ok) {
        throw new ApiError(response.status, response.statusText);
      }
      return await response.text();
    },
  };
}
