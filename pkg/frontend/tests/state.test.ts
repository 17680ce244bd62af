import { describe, expect, it } from "vitest";

import type { SuggestResponse } from "../src/api.js";
import {
  canRate,
  initialView,
  ratingFinished,
  ratingStarted,
  withStats,
  withSuggestion,
} from "../src/state.js";

const SUGGESTION: SuggestResponse = {
  suggestion_id: "sugg-0",
  arm_id: 0,
  arm_name: "search",
  answer_text: "Answer body",
  highlights: [],
  propensity: 0.25,
};

function viewWithSuggestion() {
  return withSuggestion(initialView("s"), "question", SUGGESTION, null);
}

describe("rating state machine", () => {
  it("a fresh suggestion is ratable exactly once", () => {
    let view = viewWithSuggestion();
    expect(canRate(view)).toBe(true);
    view = ratingStarted(view, 4);
    expect(canRate(view)).toBe(false);
    view = ratingFinished(view, "recorded");
    expect(canRate(view)).toBe(false);
    expect(() => ratingStarted(view, 4)).toThrow();
  });

  it("rejects stars outside 1..5", () => {
    const view = viewWithSuggestion();
    expect(() => ratingStarted(view, 0)).toThrow();
    expect(() => ratingStarted(view, 6)).toThrow();
    expect(() => ratingStarted(view, 2.5)).toThrow();
  });

  it("nothing is ratable before any suggestion", () => {
    expect(canRate(initialView("s"))).toBe(false);
  });

  it("a new suggestion re-arms the control", () => {
    let view = viewWithSuggestion();
    view = ratingFinished(ratingStarted(view, 3), "recorded");
    view = withSuggestion(view, "next", { ...SUGGESTION, suggestion_id: "sugg-1" }, null);
    expect(canRate(view)).toBe(true);
    expect(view.transcript).toEqual(["question", "next"]);
  });
});

describe("stats view", () => {
  const stats = (rounds: number) => ({
    rounds,
    pulls: [rounds],
    mean_stars: null,
    policy_name: "uniform",
    uptime_seconds: 0,
  });

  it("displayed rounds never decrease", () => {
    let view = initialView("s");
    view = withStats(view, stats(7));
    expect(view.displayedRounds).toBe(7);
    view = withStats(view, stats(3));
    expect(view.displayedRounds).toBe(7);
    view = withStats(view, stats(9));
    expect(view.displayedRounds).toBe(9);
  });
});
