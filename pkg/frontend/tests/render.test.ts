import { describe, expect, it } from "vitest";

import { renderAnswerText } from "../src/components.js";

describe("highlight rendering", () => {
  it("wraps server spans verbatim with no re-tokenization", () => {
    const text = "Receive payment with wire only.";
    const node = renderAnswerText(text, [[8, 15], [21, 25]]);
    const marks = Array.from(node.querySelectorAll("mark"));
    expect(marks.map((m) => m.textContent)).toEqual(["payment", "wire"]);
    expect(node.textContent).toBe(text);
  });

  it("renders plain text when there are no spans", () => {
    const node = renderAnswerText("No emphasis here.", []);
    expect(node.querySelectorAll("mark").length).toBe(0);
    expect(node.textContent).toBe("No emphasis here.");
  });

  it("handles a span covering the whole text", () => {
    const text = "All of it.";
    const node = renderAnswerText(text, [[0, text.length]]);
    const marks = node.querySelectorAll("mark");
    expect(marks.length).toBe(1);
    expect(marks[0]!.textContent).toBe(text);
  });
});
