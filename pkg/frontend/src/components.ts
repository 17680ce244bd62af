/** DOM builders. Every function returns a detached element; app.ts mounts them. */

import type { ConsoleSessionView } from "./state.js";
import { canRate } from "./state.js";

export interface Handlers {
  onSubmitUtterance(utterance: string): void;
  onRate(stars: number): void;
  onClarifyAnswer(answer: "yes" | "no"): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/**
 * Split the answer into plain and highlighted segments using the server's
 * character spans verbatim. Spans are sorted and non-overlapping by
 * contract; anything outside them renders as plain text.
 */
export function renderAnswerText(
  text: string,
  highlights: [number, number][],
): HTMLElement {
  const container = el("div", "answer-text");
  let cursor = 0;
  for (const [start, end] of highlights) {
    if (start > cursor) {
      container.appendChild(document.createTextNode(text.slice(cursor, start)));
    }
    const mark = el("mark");
    mark.textContent = text.slice(start, end);
    container.appendChild(mark);
    cursor = end;
  }
  if (cursor < text.length) {
    container.appendChild(document.createTextNode(text.slice(cursor)));
  }
  return container;
}

export function renderQueryForm(handlers: Handlers): HTMLElement {
  const form = el("form", "query-form");
  const input = el("input");
  input.type = "text";
  input.name = "utterance";
  input.placeholder = "Customer question";
  const button = el("button", "", "Suggest");
  button.type = "submit";
  form.append(input, button);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const utterance = input.value.trim();
    if (utterance) handlers.onSubmitUtterance(utterance);
  });
  return form;
}

export function renderSuggestionCard(
  view: ConsoleSessionView,
  handlers: Handlers,
): HTMLElement {
  const card = el("section", "suggestion-card");
  const suggestion = view.suggestion;
  if (!suggestion) {
    card.appendChild(el("p", "empty", "No suggestion yet."));
    return card;
  }
  const meta = el("div", "meta");
  meta.appendChild(el("span", "arm-name", suggestion.arm_name));
  // displayed verbatim: the propensity is the server's number, not a reformat
  meta.appendChild(el("span", "propensity", `p=${suggestion.propensity}`));
  card.appendChild(meta);
  card.appendChild(renderAnswerText(suggestion.answer_text, suggestion.highlights));
  card.appendChild(renderStars(view, handlers));
  return card;
}

export function renderStars(
  view: ConsoleSessionView,
  handlers: Handlers,
): HTMLElement {
  const wrap = el("div", "stars");
  const enabled = canRate(view);
  for (let stars = 1; stars <= 5; stars += 1) {
    const button = el("button", "star", "★".repeat(stars));
    button.type = "button";
    button.dataset["stars"] = String(stars);
    button.disabled = !enabled;
    button.addEventListener("click", () => handlers.onRate(stars));
    wrap.appendChild(button);
  }
  const note = el("span", "rating-note");
  if (view.ratingState === "recorded") note.textContent = "Rating recorded";
  else if (view.ratingState === "duplicate") note.textContent = "Already recorded";
  else if (view.ratingState === "expired") note.textContent = "Suggestion expired";
  else if (view.ratingState === "submitting") note.textContent = "Sending...";
  wrap.appendChild(note);
  return wrap;
}

export function renderClarify(
  view: ConsoleSessionView,
  handlers: Handlers,
): HTMLElement {
  const chip = el("section", "clarify");
  const clarify = view.clarify;
  if (!clarify) return chip;
  if (clarify.contradiction) {
    chip.appendChild(el("p", "clarify-notice", "No matching answer"));
    return chip;
  }
  if (clarify.resolvedAnswer !== null) {
    const resolved = el("div", "clarify-resolved");
    resolved.appendChild(el("h3", "", "Suggested answer"));
    const body = el("pre", "resolved-body");
    body.textContent = clarify.resolvedAnswer;
    resolved.appendChild(body);
    chip.appendChild(resolved);
    return chip;
  }
  chip.appendChild(el("p", "clarify-question", clarify.question));
  if (clarify.remainingCount !== null) {
    chip.appendChild(
      el("span", "remaining", `${clarify.remainingCount} candidates remain`),
    );
  }
  for (const answer of ["yes", "no"] as const) {
    const button = el("button", `clarify-${answer}`, answer);
    button.type = "button";
    button.addEventListener("click", () => handlers.onClarifyAnswer(answer));
    chip.appendChild(button);
  }
  return chip;
}

export function renderStatsPanel(view: ConsoleSessionView): HTMLElement {
  const panel = el("aside", "stats-panel");
  const stats = view.stats;
  if (!stats) {
    panel.appendChild(el("p", "empty", "No stats yet."));
    return panel;
  }
  const rounds = el("div", "stat-rounds");
  rounds.textContent = `rounds: ${view.displayedRounds}`;
  panel.appendChild(rounds);
  panel.appendChild(el("div", "stat-policy", `policy: ${stats.policy_name}`));
  const mean = stats.mean_stars === null ? "-" : String(stats.mean_stars);
  panel.appendChild(el("div", "stat-mean", `mean stars: ${mean}`));
  panel.appendChild(el("div", "stat-pulls", `pulls: ${stats.pulls.join(", ")}`));
  return panel;
}

export function renderBanner(view: ConsoleSessionView): HTMLElement {
  const banner = el("div", "banner");
  if (view.banner) {
    banner.textContent = view.banner;
    banner.setAttribute("role", "alert");
  } else {
    banner.hidden = true;
  }
  return banner;
}
