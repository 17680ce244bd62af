/**
 * Console view state and its transitions.
 *
 * Pure data + pure functions; the DOM layer renders whatever this says.
 * Invariants enforced here: a suggestion is ratable exactly once, stars stay
 * in 1..5, and the displayed stats round count never decreases.
 */

import type { StatsResponse, SuggestResponse } from "./api.js";

export type RatingState =
  | "unrated"
  | "submitting"
  | "recorded"
  | "duplicate"
  | "expired";

export interface ClarifyView {
  question: string;
  term: string;
  resolvedAnswer: string | null;
  remainingCount: number | null;
  contradiction: boolean;
}

export interface ConsoleSessionView {
  sessionId: string;
  transcript: string[];
  suggestion: SuggestResponse | null;
  ratingState: RatingState;
  lastStars: number | null;
  clarify: ClarifyView | null;
  banner: string | null;
  stats: StatsResponse | null;
  displayedRounds: number;
}

export function initialView(sessionId: string): ConsoleSessionView {
  return {
    sessionId,
    transcript: [],
    suggestion: null,
    ratingState: "unrated",
    lastStars: null,
    clarify: null,
    banner: null,
    stats: null,
    displayedRounds: 0,
  };
}

export function withSuggestion(
  view: ConsoleSessionView,
  utterance: string,
  suggestion: SuggestResponse,
  clarifyTerm: string | null,
): ConsoleSessionView {
  const clarify: ClarifyView | null =
    suggestion.clarifying_question && clarifyTerm
      ? {
          question: suggestion.clarifying_question,
          term: clarifyTerm,
          resolvedAnswer: null,
          remainingCount: null,
          contradiction: false,
        }
      : null;
  return {
    ...view,
    transcript: [...view.transcript, utterance],
    suggestion,
    ratingState: "unrated",
    lastStars: null,
    clarify,
    banner: null,
  };
}

export function canRate(view: ConsoleSessionView): boolean {
  return view.suggestion !== null && view.ratingState === "unrated";
}

export function ratingStarted(
  view: ConsoleSessionView,
  stars: number,
): ConsoleSessionView {
  if (!canRate(view)) throw new Error("no ratable suggestion");
  if (!Number.isInteger(stars) || stars < 1 || stars > 5) {
    throw new Error(`stars out of range: ${stars}`);
  }
  return { ...view, ratingState: "submitting", lastStars: stars };
}

export function ratingFinished(
  view: ConsoleSessionView,
  outcome: "recorded" | "duplicate" | "expired",
): ConsoleSessionView {
  return { ...view, ratingState: outcome };
}

export function ratingFailed(
  view: ConsoleSessionView,
  banner: string,
): ConsoleSessionView {
  // leave the control usable again; the server saw nothing
  return { ...view, ratingState: "unrated", lastStars: null, banner };
}

export function withClarifyStep(
  view: ConsoleSessionView,
  step: {
    remaining_count: number;
    next_question?: string;
    resolved_answer?: string;
  },
  nextTerm: string | null,
): ConsoleSessionView {
  if (step.next_question && nextTerm) {
    return {
      ...view,
      clarify: {
        question: step.next_question,
        term: nextTerm,
        resolvedAnswer: null,
        remainingCount: step.remaining_count,
        contradiction: false,
      },
    };
  }
  return {
    ...view,
    clarify: {
      question: "",
      term: "",
      resolvedAnswer: step.resolved_answer ?? "",
      remainingCount: step.remaining_count,
      contradiction: false,
    },
  };
}

export function withContradiction(view: ConsoleSessionView): ConsoleSessionView {
  return {
    ...view,
    clarify: {
      question: "",
      term: "",
      resolvedAnswer: null,
      remainingCount: 0,
      contradiction: true,
    },
  };
}

export function withBanner(
  view: ConsoleSessionView,
  banner: string,
): ConsoleSessionView {
  return { ...view, banner };
}

export function withStats(
  view: ConsoleSessionView,
  stats: StatsResponse,
): ConsoleSessionView {
  // a stale poll response must not roll the counter backwards
  const displayedRounds = Math.max(view.displayedRounds, stats.rounds);
  return { ...view, stats, displayedRounds };
}
