// Chat view: a pure client of the service API.  Turns are rendered from
// the server's stream (websocket when available, transcript polling as a
// fallback), never optimistically, so the rendered order always equals
// the persisted order.

import { ApiClient, Turn } from "./api.js";

export interface WebSocketLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type WsFactory = (url: string) => WebSocketLike;

const defaultWsFactory: WsFactory = (url) => new WebSocket(url) as unknown as WebSocketLike;

export class ChatView {
  sessionId: string | null = null;
  private turns: Turn[] = [];
  private socket: WebSocketLike | null = null;
  private usePolling = false;
  private inFlight = false;
  private ended = false;

  private log!: HTMLElement;
  private input!: HTMLInputElement;
  private sendButton!: HTMLButtonElement;
  private quitButton!: HTMLButtonElement;
  private thinking!: HTMLElement;
  private status!: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly wsFactory: WsFactory = defaultWsFactory,
  ) {
    this.render();
  }

  private render(): void {
    this.root.innerHTML = `
      <section class="chat-view">
        <div class="chat-log" data-role="log"></div>
        <div class="thinking" data-role="thinking" hidden>Grace is thinking&hellip;</div>
        <form class="chat-controls" data-role="form">
          <input type="text" data-role="input" placeholder="Say something about the passage" autocomplete="off" />
          <button type="submit" data-role="send">Send</button>
          <button type="button" data-role="quit">Quit</button>
        </form>
        <div class="chat-status" data-role="status"></div>
      </section>`;
    this.log = this.root.querySelector('[data-role="log"]')!;
    this.input = this.root.querySelector('[data-role="input"]')!;
    this.sendButton = this.root.querySelector('[data-role="send"]')!;
    this.quitButton = this.root.querySelector('[data-role="quit"]')!;
    this.thinking = this.root.querySelector('[data-role="thinking"]')!;
    this.status = this.root.querySelector('[data-role="status"]')!;
    const form = this.root.querySelector<HTMLFormElement>('[data-role="form"]')!;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.send();
    });
    this.quitButton.addEventListener("click", () => void this.quit());
    this.setBusy(false);
  }

  /** Create a fresh session for a document and greet. */
  async start(docId: string): Promise<void> {
    const record = await this.api.createSession(docId);
    this.sessionId = record.session_id;
    this.openStream();
    await this.post("SESSION_START");
  }

  /** Re-attach to an existing session; the stream replays the persisted
   * transcript from the first turn. */
  async resume(sessionId: string): Promise<void> {
    this.sessionId = sessionId;
    const record = await this.api.getSession(sessionId);
    this.ended = record.status === "ENDED";
    this.openStream();
    if (this.usePolling) {
      await this.syncTranscript();
    }
    this.setBusy(false);
  }

  get renderedTurns(): readonly Turn[] {
    return this.turns;
  }

  get isEnded(): boolean {
    return this.ended;
  }

  private openStream(): void {
    if (!this.sessionId) return;
    try {
      this.socket = this.wsFactory(this.api.streamUrl(this.sessionId));
    } catch {
      this.socket = null;
      this.usePolling = true;
      return;
    }
    this.socket.onmessage = (ev) => {
      const msg = JSON.parse(ev.data) as { type: string; turn?: Turn };
      if (msg.type === "turn" && msg.turn) {
        this.appendTurn(msg.turn);
      } else if (msg.type === "ended") {
        // the server sends "ended" only after every turn has been streamed
        this.markEnded();
        this.socket?.close();
      }
    };
    const fallBack = () => {
      if (!this.ended) {
        this.usePolling = true;
        void this.syncTranscript();
      }
    };
    this.socket.onerror = fallBack;
    this.socket.onclose = () => {
      if (!this.ended) fallBack();
    };
  }

  private appendTurn(turn: Turn): void {
    this.turns.push(turn);
    const bubble = document.createElement("div");
    bubble.className = turn.speaker === "AGENT" ? "bubble agent" : "bubble user";
    bubble.textContent = turn.text;
    this.log.appendChild(bubble);
  }

  private async syncTranscript(): Promise<void> {
    if (!this.sessionId) return;
    const payload = await this.api.transcript(this.sessionId);
    this.log.innerHTML = "";
    this.turns = [];
    for (const turn of payload.turns) {
      this.appendTurn(turn);
    }
    if (payload.phase === "ENDED") {
      this.markEnded();
    }
  }

  private markEnded(): void {
    this.ended = true;
    this.setBusy(false);
    const link = document.createElement("a");
    link.href = `#/survey?session=${this.sessionId}`;
    link.textContent = "The session has ended — take the survey";
    link.className = "survey-link";
    this.status.innerHTML = "";
    this.status.appendChild(link);
  }

  private setBusy(busy: boolean): void {
    this.inFlight = busy;
    this.sendButton.disabled = busy || this.ended;
    this.input.disabled = busy || this.ended;
    this.quitButton.disabled = busy || this.ended;
    this.thinking.hidden = !busy;
  }

  private async post(event: string, text?: string): Promise<void> {
    if (!this.sessionId || this.inFlight || this.ended) return;
    this.setBusy(true);
    try {
      const result = await this.api.postEvent(this.sessionId, event, text);
      if (this.usePolling) {
        await this.syncTranscript();
      }
      if (result.phase === "ENDED") {
        this.markEnded();
      }
    } finally {
      this.setBusy(false);
    }
  }

  async send(): Promise<void> {
    const text = this.input.value.trim();
    if (!text) return;
    this.input.value = "";
    await this.post("UTTERANCE", text);
  }

  async quit(): Promise<void> {
    await this.post("QUIT");
  }
}
