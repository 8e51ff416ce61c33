// Session browser: past sessions with transcripts, plus the survey summary
// table backed by the stats endpoint.

import { ApiClient, SessionRecord } from "./api.js";

export class SessionBrowser {
  constructor(private readonly root: HTMLElement, private readonly api: ApiClient) {}

  async load(): Promise<void> {
    const sessions = await this.api.listSessions();
    const rows = sessions
      .map(
        (s: SessionRecord) => `
        <tr>
          <td><a href="#/chat?session=${s.session_id}">${s.session_id}</a></td>
          <td>${s.doc_id}</td>
          <td>${s.status}</td>
          <td>${s.turn_count}</td>
          <td>${s.has_survey ? "yes" : s.status === "ENDED" ? `<a href="#/survey?session=${s.session_id}">take it</a>` : "-"}</td>
        </tr>`,
      )
      .join("");
    this.root.innerHTML = `
      <section class="sessions-view">
        <h2>Sessions</h2>
        <p><a href="#/summary">Survey summary table</a></p>
        <table class="sessions">
          <thead><tr><th>Session</th><th>Book</th><th>Status</th><th>Turns</th><th>Survey</th></tr></thead>
          <tbody>${rows || '<tr><td colspan="5">No sessions yet.</td></tr>'}</tbody>
        </table>
      </section>`;
  }
}

export class SummaryView {
  constructor(private readonly root: HTMLElement, private readonly api: ApiClient) {}

  async load(): Promise<void> {
    const summary = await this.api.summary();
    this.root.innerHTML = `
      <section class="summary-view">
        <h2>Survey summary</h2>
        <pre class="summary-table">${summary.table || "No survey responses yet."}</pre>
      </section>`;
  }
}
