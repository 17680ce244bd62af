/**
 * Typed client for the agentbuddy service.
 *
 * The console is a pure consumer of five endpoints; values coming back from
 * the server (propensity, stars, spans) are passed through untouched.
 */

export interface ConsoleConfig {
  baseUrl: string;
  token: string;
}

export interface SuggestResponse {
  suggestion_id: string;
  arm_id: number;
  arm_name: string;
  answer_text: string;
  highlights: [number, number][];
  propensity: number;
  clarifying_question?: string;
}

export interface FeedbackResponse {
  ok: boolean;
  updated: boolean;
}

export interface ClarifyResponse {
  remaining_count: number;
  next_question?: string;
  resolved_answer?: string;
}

export interface StatsResponse {
  rounds: number;
  pulls: number[];
  mean_stars: number | null;
  policy_name: string;
  uptime_seconds: number;
}

export interface ArmDescriptor {
  arm_id: number;
  name: string;
  kind: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `request failed with status ${response.status}`;
}

export class ConsoleApi {
  constructor(
    private readonly config: ConsoleConfig,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.config.token}`,
    };
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.config.baseUrl}${path}`, init);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as T;
  }

  suggest(sessionId: string, utterance: string): Promise<SuggestResponse> {
    return this.request("POST", "/v1/suggest", {
      session_id: sessionId,
      utterance,
    });
  }

  feedback(suggestionId: string, stars: number): Promise<FeedbackResponse> {
    return this.request("POST", "/v1/feedback", {
      suggestion_id: suggestionId,
      stars,
    });
  }

  clarifyAnswer(
    sessionId: string,
    term: string,
    answer: "yes" | "no",
  ): Promise<ClarifyResponse> {
    return this.request("POST", "/v1/clarify/answer", {
      session_id: sessionId,
      term,
      answer,
    });
  }

  stats(): Promise<StatsResponse> {
    return this.request("GET", "/v1/stats");
  }

  arms(): Promise<{ arms: ArmDescriptor[] }> {
    return this.request("GET", "/v1/arms");
  }
}

/** The filter term rides inside the question's single quotes. */
export function termFromQuestion(question: string): string | null {
  const match = question.match(/'([^']+)'/);
  return match ? match[1]! : null;
}
