/** Wizard state: mirrors the server session; undo replays the transcript
 * prefix into a fresh session so the server stays the single source of
 * decision logic. */

import type {
  Pool,
  PendingGuide,
  QuestionDescriptor,
  TranscriptStep,
  WizardApi,
} from "./api.js";

export interface WizardState {
  sessionId: string | null;
  question: QuestionDescriptor | null;
  category: string | null;
  complete: boolean;
  history: TranscriptStep[];
  undone: TranscriptStep[];
  pool: Pool | null;
  guideModal: PendingGuide | null;
  notices: string[];
  error: string | null;
  busy: boolean;
}

export function initialState(): WizardState {
  return {
    sessionId: null,
    question: null,
    category: null,
    complete: false,
    history: [],
    undone: [],
    pool: null,
    guideModal: null,
    notices: [],
    error: null,
    busy: false,
  };
}

export type Listener = (state: WizardState) => void;

export class WizardController {
  private state: WizardState = initialState();
  private listeners: Listener[] = [];

  constructor(private readonly api: WizardApi) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  snapshot(): WizardState {
    return { ...this.state, history: [...this.state.history],
             undone: [...this.state.undone], notices: [...this.state.notices] };
  }

  private emit(patch: Partial<WizardState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.snapshot());
    }
  }

  get canUndo(): boolean {
    return this.state.history.length > 0;
  }

  get canRedo(): boolean {
    return this.state.undone.length > 0;
  }

  async start(): Promise<void> {
    this.emit({ ...initialState(), busy: true });
    try {
      const session = await this.api.createSession();
      this.emit({
        sessionId: session.id,
        question: session.question,
        category: session.category,
        complete: session.question === null,
        busy: false,
      });
      await this.refreshPoolIfComplete();
    } catch (error) {
      this.fail(error);
    }
  }

  async answer(value: unknown): Promise<void> {
    const { sessionId, question } = this.state;
    if (!sessionId || !question) return;
    this.emit({ busy: true, error: null });
    try {
      const next = await this.api.answer(sessionId, question.item, value);
      const step: TranscriptStep = {
        type: "answer",
        item: question.item,
        value: value as string | number | boolean,
      };
      this.emit({
        history: [...this.state.history, step],
        undone: [], // a fresh answer invalidates the redo branch
        question: next.question,
        category: next.category,
        complete: next.complete,
        busy: false,
      });
      await this.refreshPoolIfComplete();
    } catch (error) {
      this.fail(error);
    }
  }

  async resolveGuide(key: string, choice: string): Promise<void> {
    const { sessionId } = this.state;
    if (!sessionId) return;
    this.emit({ busy: true, error: null });
    try {
      await this.api.resolveGuide(sessionId, key, choice);
      const step: TranscriptStep = { type: "guide", key, choice };
      this.emit({
        history: [...this.state.history, step],
        undone: [],
        guideModal: null,
        busy: false,
      });
      await this.refreshPoolIfComplete();
    } catch (error) {
      this.fail(error);
    }
  }

  openGuide(guide: PendingGuide): void {
    if (guide.options.length === 1) {
      // single option: confirm it and tell the user what happened
      const only = guide.options[0];
      this.emit({
        notices: [...this.state.notices,
                  `${guide.guide}: only one option (${only.label}); ` +
                  "confirmed automatically"],
      });
      void this.resolveGuide(guide.key, only.id);
      return;
    }
    this.emit({ guideModal: guide });
  }

  closeGuide(): void {
    this.emit({ guideModal: null });
  }

  /** Replay everything but the last step into a fresh session. */
  async undo(): Promise<void> {
    if (!this.canUndo) return;
    const history = [...this.state.history];
    const undoneStep = history.pop() as TranscriptStep;
    await this.replay(history, [undoneStep, ...this.state.undone]);
  }

  async redo(): Promise<void> {
    if (!this.canRedo) return;
    const [step, ...rest] = this.state.undone;
    await this.replay([...this.state.history, step], rest);
  }

  private async replay(history: TranscriptStep[],
                       undone: TranscriptStep[]): Promise<void> {
    this.emit({ busy: true, error: null });
    try {
      const session = await this.api.createSession(history);
      this.emit({
        sessionId: session.id,
        question: session.question,
        category: session.category,
        complete: session.question === null,
        history,
        undone,
        pool: null,
        guideModal: null,
        busy: false,
      });
      await this.refreshPoolIfComplete();
    } catch (error) {
      this.fail(error);
    }
  }

  private async refreshPoolIfComplete(): Promise<void> {
    const { sessionId, complete } = this.state;
    if (!sessionId || !complete) return;
    try {
      const pool = await this.api.pool(sessionId);
      this.emit({ pool });
    } catch (error) {
      this.fail(error);
    }
  }

  /** Pool JSON exactly as the server serializes it (for the export button). */
  async exportPoolText(): Promise<string> {
    if (!this.state.sessionId) {
      throw new Error("no active session");
    }
    return this.api.poolText(this.state.sessionId);
  }

  private fail(error: unknown): void {
    const message = error instanceof Error ? error.message : String(error);
    this.emit({ error: message, busy: false });
  }
}
