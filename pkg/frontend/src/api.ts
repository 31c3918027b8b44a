// Thin typed client for the annotation session API. All ordering decisions
// live server-side; this module only moves JSON.

export interface PairView {
  session_id: string;
  left: string;
  right: string;
  left_url: string;
  right_url: string;
  pass_no: number;
  cursor: number;
  voters_remaining: string[];
}

export interface SessionResult {
  session_id: string;
  ranking: string[];
}

export type Choice = "left" | "right";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message?: string,
  ) {
    super(message ?? code);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let code = `http_${res.status}`;
    let message: string | undefined;
    try {
      const body = (await res.json()) as { detail?: { error?: string; message?: string } };
      code = body.detail?.error ?? code;
      message = body.detail?.message;
    } catch {
      // non-JSON error body; keep the status code
    }
    throw new ApiError(res.status, code, message);
  }
  return (await res.json()) as T;
}

export function getPair(baseUrl: string, sessionId: string): Promise<PairView> {
  return request<PairView>(`${baseUrl}/sessions/${sessionId}/pair`);
}

export function getResult(baseUrl: string, sessionId: string): Promise<SessionResult> {
  return request<SessionResult>(`${baseUrl}/sessions/${sessionId}/result`);
}

export function castVote(
  baseUrl: string,
  sessionId: string,
  voterId: string,
  choice: Choice,
  pair: { left: string; right: string },
): Promise<{ recorded: boolean; resolved: boolean; status: string }> {
  return request(`${baseUrl}/sessions/${sessionId}/votes`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({
      voter_id: voterId,
      choice,
      left: pair.left,
      right: pair.right,
    }),
  });
}

export function createSession(
  baseUrl: string,
  req: { images: string[]; voters: string[]; seed: number; tiebreak_voter?: string },
): Promise<{ session_id: string }> {
  return request(`${baseUrl}/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(req),
  });
}
