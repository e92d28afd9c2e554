/**
 * Annotation session state machine.
 *
 * All state is derived from server responses, so a page reload rebuilds
 * the session exactly: the server hands back the first unanswered task.
 * A staged answer is held locally until the server acks the verdict;
 * network failures keep it staged so nothing is lost, and a duplicate
 * conflict (someone already answered) is surfaced and skipped past.
 */

import {
  ApiError,
  type Answer,
  type ProgressPayload,
  type TaskMode,
  type TaskPayload,
  type VerdictAck,
  type VerdictRequest,
} from "./api.js";

/** The slice of ApiClient the session needs; tests substitute a fake. */
export interface SessionApi {
  getTask(annotator: string, mode: TaskMode): Promise<TaskPayload | null>;
  getImage(imageId: string): Promise<ArrayBuffer>;
  postVerdict(verdict: VerdictRequest): Promise<VerdictAck>;
  getProgress(): Promise<ProgressPayload>;
}

export class UiSession {
  task: TaskPayload | null = null;
  imageBytes: ArrayBuffer | null = null;
  staged: Answer | null = null;
  done = false;
  banner: string | null = null;
  submitted = 0;
  progress: ProgressPayload | null = null;

  constructor(
    private readonly api: SessionApi,
    readonly annotatorId: string,
    readonly mode: TaskMode = "labeling",
  ) {}

  /** Fetch the first pending task (also the reload entry point). */
  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    this.staged = null;
    this.task = await this.api.getTask(this.annotatorId, this.mode);
    if (this.task === null) {
      this.done = true;
      this.imageBytes = null;
      return;
    }
    this.imageBytes = await this.api.getImage(this.task.image_id);
  }

  /** Stage an answer for the current task; not yet sent. */
  stage(answer: Answer): void {
    if (this.task === null) return;
    this.staged = answer;
  }

  /** Drop the staged answer before it is submitted. */
  undo(): void {
    this.staged = null;
  }

  /**
   * Post the staged verdict.  True when the server acked and the session
   * advanced.  On conflict (409) the task was already answered elsewhere:
   * surface it and skip forward.  On any other failure the verdict stays
   * staged for a retry.
   */
  async commit(): Promise<boolean> {
    if (this.task === null || this.staged === null) return false;
    const verdict: VerdictRequest = {
      image_id: this.task.image_id,
      annotator_id: this.annotatorId,
      answer: this.staged,
      is_consensus: this.mode === "consensus",
    };
    try {
      await this.api.postVerdict(verdict);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.banner = `already answered: ${err.message}; skipping forward`;
        await this.advance();
        return false;
      }
      const reason = err instanceof Error ? err.message : String(err);
      this.banner = `submit failed (${reason}); answer kept, retry to resend`;
      return false;
    }
    this.submitted += 1;
    this.banner = null;
    await this.advance();
    return true;
  }

  /** Pull fresh counters; the view renders these verbatim. */
  async refreshProgress(): Promise<ProgressPayload> {
    this.progress = await this.api.getProgress();
    return this.progress;
  }
}

/**
 * Keyboard map: y/n stage an answer, u undoes it before submit, and
 * Enter/Space (or tapping the staged key again) commits.  Returns the
 * action taken so callers know when to re-render.
 */
export async function handleKey(
  session: UiSession,
  key: string,
): Promise<"staged" | "undone" | "committed" | "ignored"> {
  if (session.done) return "ignored";
  if (key === "y" || key === "n") {
    const answer: Answer = key === "y" ? "yes" : "no";
    if (session.staged === answer) {
      await session.commit();
      return "committed";
    }
    session.stage(answer);
    return "staged";
  }
  if (key === "u") {
    if (session.staged === null) return "ignored";
    session.undo();
    return "undone";
  }
  if ((key === "Enter" || key === " ") && session.staged !== null) {
    await session.commit();
    return "committed";
  }
  return "ignored";
}
