/**
 * Console application: owns the state, talks to the API, re-renders on every
 * transition. All server calls for a session run sequentially; the stats
 * poll is independent.
 */

import { ApiError, ConsoleApi, termFromQuestion } from "./api.js";
import type { ConsoleConfig, FetchLike } from "./api.js";
import {
  renderBanner,
  renderClarify,
  renderQueryForm,
  renderStatsPanel,
  renderSuggestionCard,
} from "./components.js";
import type { Handlers } from "./components.js";
import {
  canRate,
  initialView,
  ratingFailed,
  ratingFinished,
  ratingStarted,
  withBanner,
  withClarifyStep,
  withContradiction,
  withStats,
  withSuggestion,
} from "./state.js";
import type { ConsoleSessionView } from "./state.js";

export interface AppOptions {
  sessionId?: string;
  fetchImpl?: FetchLike;
  statsIntervalMs?: number;
}

export class ConsoleApp {
  readonly api: ConsoleApi;
  view: ConsoleSessionView;
  private root: HTMLElement | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private readonly statsIntervalMs: number;
  private lastInput = "";

  constructor(config: ConsoleConfig, options: AppOptions = {}) {
    this.api = new ConsoleApi(config, options.fetchImpl);
    this.view = initialView(options.sessionId ?? `console-${Date.now()}`);
    this.statsIntervalMs = options.statsIntervalMs ?? 5000;
  }

  attach(root: HTMLElement): void {
    this.root = root;
    this.render();
  }

  startPolling(): void {
    if (this.pollTimer !== null) return;
    void this.refreshStats();
    this.pollTimer = setInterval(() => void this.refreshStats(), this.statsIntervalMs);
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async refreshStats(): Promise<void> {
    try {
      const stats = await this.api.stats();
      this.update(withStats(this.view, stats));
    } catch {
      // polling failures stay silent; the next tick retries
    }
  }

  async submitUtterance(utterance: string): Promise<void> {
    this.lastInput = utterance;
    try {
      const suggestion = await this.api.suggest(this.view.sessionId, utterance);
      const term = suggestion.clarifying_question
        ? termFromQuestion(suggestion.clarifying_question)
        : null;
      this.update(withSuggestion(this.view, utterance, suggestion, term));
    } catch (error) {
      this.update(withBanner(this.view, describe(error)));
    }
  }

  async rate(stars: number): Promise<void> {
    if (!canRate(this.view)) return; // client-side double-submit guard
    const suggestion = this.view.suggestion;
    if (!suggestion) return;
    this.update(ratingStarted(this.view, stars));
    try {
      const result = await this.api.feedback(suggestion.suggestion_id, stars);
      this.update(ratingFinished(this.view, result.updated ? "recorded" : "duplicate"));
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.update(ratingFinished(this.view, "expired"));
      } else {
        this.update(ratingFailed(this.view, describe(error)));
      }
    }
  }

  async answerClarify(answer: "yes" | "no"): Promise<void> {
    const clarify = this.view.clarify;
    if (!clarify || clarify.resolvedAnswer !== null || clarify.contradiction) return;
    try {
      const step = await this.api.clarifyAnswer(
        this.view.sessionId,
        clarify.term,
        answer,
      );
      const nextTerm = step.next_question
        ? termFromQuestion(step.next_question)
        : null;
      this.update(withClarifyStep(this.view, step, nextTerm));
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.update(withContradiction(this.view));
      } else {
        this.update(withBanner(this.view, describe(error)));
      }
    }
  }

  private update(view: ConsoleSessionView): void {
    this.view = view;
    this.render();
  }

  private handlers(): Handlers {
    return {
      onSubmitUtterance: (utterance) => void this.submitUtterance(utterance),
      onRate: (stars) => void this.rate(stars),
      onClarifyAnswer: (answer) => void this.answerClarify(answer),
    };
  }

  render(): void {
    if (!this.root) return;
    const handlers = this.handlers();
    this.root.replaceChildren(
      renderBanner(this.view),
      renderQueryForm(handlers),
      renderSuggestionCard(this.view, handlers),
      renderClarify(this.view, handlers),
      renderStatsPanel(this.view),
    );
    // a failed submit keeps what the agent typed
    const input = this.root.querySelector<HTMLInputElement>("input[name=utterance]");
    if (input && this.lastInput) input.value = this.lastInput;
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return error.status === 401
      ? "Unauthorized: check the configured token"
      : `Server error (${error.status}): ${error.message}`;
  }
  return "Cannot reach the server";
}
