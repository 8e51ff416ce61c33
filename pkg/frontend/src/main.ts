// Hash-route wiring: #/chat?doc=... | #/chat?session=... | #/survey?session=...
// #/sessions | #/summary.  The UI is a pure API client; all state lives
// server-side.

import { ApiClient } from "./api.js";
import { ChatView } from "./chat.js";
import { SessionBrowser, SummaryView } from "./sessions.js";
import { SurveyView } from "./survey.js";

const api = new ApiClient("");

function parseRoute(): { page: string; params: URLSearchParams } {
  const hash = location.hash.replace(/^#\/?/, "");
  const [page, query] = hash.split("?", 2);
  return { page: page || "sessions", params: new URLSearchParams(query ?? "") };
}

async function route(): Promise<void> {
  const root = document.getElementById("app")!;
  const { page, params } = parseRoute();
  try {
    if (page === "chat") {
      const view = new ChatView(root, api);
      const sessionId = params.get("session");
      if (sessionId) {
        await view.resume(sessionId);
      } else {
        await view.start(params.get("doc") ?? "fernley");
      }
    } else if (page === "survey") {
      const sessionId = params.get("session");
      if (!sessionId) throw new Error("survey needs ?session=...");
      const view = new SurveyView(root, api, sessionId);
      await view.load();
    } else if (page === "summary") {
      await new SummaryView(root, api).load();
    } else {
      await new SessionBrowser(root, api).load();
    }
  } catch (err) {
    root.innerHTML = `<p class="error">${err instanceof Error ? err.message : String(err)}</p>`;
  }
}

window.addEventListener("hashchange", () => void route());
window.addEventListener("DOMContentLoaded", () => void route());
