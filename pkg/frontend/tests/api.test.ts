import { describe, expect, it } from "vitest";

import { ApiError, ConsoleApi, termFromQuestion } from "../src/api.js";
import { createMockServer } from "./mockServer.js";

const CONFIG = { baseUrl: "http://mock", token: "test-token" };

describe("ConsoleApi", () => {
  it("sends the bearer token and parses a suggestion", async () => {
    const { fetchImpl } = createMockServer();
    const api = new ConsoleApi(CONFIG, fetchImpl);
    const suggestion = await api.suggest("s1", "supplier invoice");
    expect(suggestion.suggestion_id).toMatch(/^sugg-/);
    expect(suggestion.arm_name).toBe("search");
    expect(suggestion.propensity).toBe(0.955);
    expect(suggestion.highlights).toEqual([[0, 30]]);
  });

  it("raises ApiError 401 on a bad token", async () => {
    const { fetchImpl } = createMockServer();
    const api = new ConsoleApi({ ...CONFIG, token: "wrong" }, fetchImpl);
    await expect(api.stats()).rejects.toMatchObject({ status: 401 });
    await expect(api.stats()).rejects.toBeInstanceOf(ApiError);
  });

  it("raises ApiError 404 for unknown feedback ids", async () => {
    const { fetchImpl } = createMockServer();
    const api = new ConsoleApi(CONFIG, fetchImpl);
    await expect(api.feedback("missing", 3)).rejects.toMatchObject({
      status: 404,
    });
  });

  it("passes star values through unchanged", async () => {
    const { fetchImpl, state } = createMockServer();
    const api = new ConsoleApi(CONFIG, fetchImpl);
    const suggestion = await api.suggest("s1", "refund");
    await api.feedback(suggestion.suggestion_id, 4);
    expect(state.feedbackCalls).toEqual([
      { suggestion_id: suggestion.suggestion_id, stars: 4 },
    ]);
  });

  it("fetches stats and arms", async () => {
    const { fetchImpl } = createMockServer();
    const api = new ConsoleApi(CONFIG, fetchImpl);
    const stats = await api.stats();
    expect(stats.rounds).toBe(0);
    expect(stats.mean_stars).toBeNull();
    const { arms } = await api.arms();
    expect(arms.map((a) => a.name)).toEqual(["search", "faq", "faq-keyword"]);
  });
});

describe("termFromQuestion", () => {
  it("extracts the quoted filter term", () => {
    expect(termFromQuestion("Does your request involve 'wire'?")).toBe("wire");
  });

  it("returns null when no quoted term exists", () => {
    expect(termFromQuestion("Anything else?")).toBeNull();
  });
});
