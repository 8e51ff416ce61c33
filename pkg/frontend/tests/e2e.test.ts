// End-to-end: a scripted session driven through the browser views against
// the real Python service must persist the same transcript and survey as
// the identical script driven through the HTTP API directly.

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WS from "ws";

import { ApiClient, Turn } from "../src/api.js";
import { ChatView, WebSocketLike } from "../src/chat.js";
import { SurveyView } from "../src/survey.js";

// vitest runs with cwd = frontend/
const REPO_ROOT = path.resolve(process.cwd(), "..");
const PORT = 8317;
const BASE = `http://127.0.0.1:${PORT}`;

const SCRIPT = [
  "I think the frost is the family's long winter of waiting.",
  "yes",
  "Maybe the lane turning to honey means the village is thawing toward spring.",
];

const RATINGS: Record<string, number> = {
  S1: 4, S2: 5, S3: 3, S4: 4, S5: 5, S6: 4, S7: 3, S8: 4, S9: 5,
};

let server: ChildProcess | null = null;

function runPython(args: string[]): Promise<void> {
  return new Promise((resolve, reject) => {
    const proc = spawn("python3", args, { cwd: REPO_ROOT, stdio: "inherit" });
    proc.on("exit", (code) => (code === 0 ? resolve() : reject(new Error(`python3 exited ${code}`))));
    proc.on("error", reject);
  });
}

async function waitFor(predicate: () => boolean | Promise<boolean>, what: string, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await predicate()) return;
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`timed out waiting for ${what}`);
}

const wsFactory = (url: string): WebSocketLike => {
  const sock = new WS(url);
  const like: WebSocketLike = {
    onmessage: null,
    onclose: null,
    onerror: null,
    close: () => sock.close(),
  };
  sock.on("message", (data) => like.onmessage?.({ data: String(data) }));
  sock.on("close", () => like.onclose?.());
  sock.on("error", (err) => like.onerror?.(err));
  return like;
};

function stripped(turns: Turn[]): Array<[string, string, string | null]> {
  return turns.map((t) => [t.speaker, t.text, t.question_id]);
}

beforeAll(async () => {
  const demoDir = mkdtempSync(path.join(tmpdir(), "bookchat-e2e-"));
  await runPython(["scripts/make_demo.py", demoDir, "--port", String(PORT)]);
  server = spawn("python3", ["-m", "bookchat.cli", "serve", "--config", path.join(demoDir, "config.json")], {
    cwd: REPO_ROOT,
    stdio: "ignore",
  });
  await waitFor(async () => {
    try {
      const resp = await fetch(`${BASE}/banks`);
      return resp.ok;
    } catch {
      return false;
    }
  }, "server startup", 60000);
}, 120000);

afterAll(() => {
  server?.kill();
});

describe("scripted session through the browser views", () => {
  it("persists the same transcript and survey as the bare HTTP script", async () => {
    const api = new ApiClient(BASE);

    // --- path A: through the DOM views ------------------------------------
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const chat = new ChatView(root, api, wsFactory);
    await chat.start("fernley");
    const uiSession = chat.sessionId!;
    await waitFor(() => chat.renderedTurns.length >= 2, "greeting over the stream");

    const input = root.querySelector<HTMLInputElement>('[data-role="input"]')!;
    for (const line of SCRIPT) {
      const before = chat.renderedTurns.length;
      input.value = line;
      await chat.send();
      await waitFor(() => chat.renderedTurns.length > before, `stream after "${line.slice(0, 20)}"`);
    }
    await chat.quit();
    await waitFor(() => chat.isEnded, "session end");

    // rendered order must equal persisted order
    const uiTranscript = await api.transcript(uiSession);
    await waitFor(() => chat.renderedTurns.length === uiTranscript.turns.length, "stream to drain");
    expect(stripped([...chat.renderedTurns])).toEqual(stripped(uiTranscript.turns));

    // survey through the form
    const surveyRoot = document.createElement("div");
    document.body.appendChild(surveyRoot);
    const survey = new SurveyView(surveyRoot, api, uiSession);
    await survey.load();
    const submit = surveyRoot.querySelector<HTMLButtonElement>('[data-role="submit"]')!;
    expect(submit.disabled).toBe(true);
    for (const [sid, value] of Object.entries(RATINGS)) {
      const radio = surveyRoot.querySelector<HTMLInputElement>(`input[name="${sid}"][value="${value}"]`)!;
      radio.checked = true;
      radio.dispatchEvent(new Event("change", { bubbles: true }));
    }
    expect(submit.disabled).toBe(false);
    const participantInput = surveyRoot.querySelector<HTMLInputElement>('input[name="participant_id"]')!;
    participantInput.value = "e2e";
    await survey.submit();
    expect(surveyRoot.textContent).toContain("Thank you");

    // --- path B: the same script, bare HTTP --------------------------------
    const direct = await api.createSession("fernley");
    const directSession = direct.session_id;
    await api.postEvent(directSession, "SESSION_START");
    for (const line of SCRIPT) {
      await api.sendUtterance(directSession, line);
    }
    await api.postEvent(directSession, "QUIT");
    const directSurvey = (await api.submitSurvey(directSession, "e2e", 1, RATINGS)) as Record<string, unknown>;

    // --- equality modulo session identity and wall-clock timestamps --------
    const directTranscript = await api.transcript(directSession);
    expect(stripped(uiTranscript.turns)).toEqual(stripped(directTranscript.turns));

    const summary = await api.summary();
    const s1 = summary.rows.find((r) => r.statement_id === "S1" && r.session === 1);
    expect(s1?.n).toBe(2); // both paths stored a survey
    expect(directSurvey.participant_id).toBe("e2e");
    expect(directSurvey.ratings).toEqual(RATINGS);

    const uiRecord = await api.getSession(uiSession);
    expect(uiRecord.status).toBe("ENDED");
    expect(uiRecord.has_survey).toBe(true);
  }, 120000);
});
