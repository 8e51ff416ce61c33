// Post-session survey form: the nine statements rendered verbatim from the
// server, each on a labeled 1-5 scale.  Submit stays disabled until every
// statement has an answer.

import { ApiClient, ApiError } from "./api.js";

const SCALE: Array<[number, string]> = [
  [1, "Strongly Disagree"],
  [2, "Disagree"],
  [3, "Neither Agree Nor Disagree"],
  [4, "Agree"],
  [5, "Strongly Agree"],
];

export class SurveyView {
  private statements: Record<string, string> = {};
  private form!: HTMLFormElement;
  private submitButton!: HTMLButtonElement;
  private hint!: HTMLElement;
  private status!: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    readonly sessionId: string,
  ) {}

  async load(): Promise<void> {
    this.statements = await this.api.statements();
    this.render();
  }

  private render(): void {
    const rows = Object.entries(this.statements)
      .map(([sid, text]) => {
        const radios = SCALE
          .map(
            ([value, label]) => `
            <label class="scale-option" title="${label}">
              <input type="radio" name="${sid}" value="${value}" />
              <span>${value}</span>
            </label>`,
          )
          .join("");
        return `
          <fieldset class="statement" data-statement="${sid}">
            <legend>${sid}: ${text}</legend>
            <div class="scale">
              <span class="scale-end">1 = Strongly Disagree</span>
              ${radios}
              <span class="scale-end">5 = Strongly Agree</span>
            </div>
          </fieldset>`;
      })
      .join("");
    this.root.innerHTML = `
      <section class="survey-view">
        <h2>How was the discussion?</h2>
        <form data-role="survey-form">
          <label>Participant id <input type="text" name="participant_id" value="anonymous" /></label>
          <label>Session number
            <select name="session_number">
              <option value="1">1</option><option value="2">2</option><option value="3">3</option>
            </select>
          </label>
          ${rows}
          <button type="submit" data-role="submit" disabled>Submit survey</button>
          <span class="hint" data-role="hint"></span>
        </form>
        <div class="survey-status" data-role="status"></div>
      </section>`;
    this.form = this.root.querySelector('[data-role="survey-form"]')!;
    this.submitButton = this.root.querySelector('[data-role="submit"]')!;
    this.hint = this.root.querySelector('[data-role="hint"]')!;
    this.status = this.root.querySelector('[data-role="status"]')!;
    this.form.addEventListener("change", () => this.refreshSubmitState());
    this.form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
    this.refreshSubmitState();
  }

  private unanswered(): string[] {
    return Object.keys(this.statements).filter(
      (sid) => !this.form.querySelector<HTMLInputElement>(`input[name="${sid}"]:checked`),
    );
  }

  private refreshSubmitState(): void {
    const missing = this.unanswered();
    this.submitButton.disabled = missing.length > 0;
    this.hint.textContent = missing.length
      ? `${missing.length} statement${missing.length === 1 ? "" : "s"} left to answer`
      : "";
  }

  ratings(): Record<string, number> {
    const out: Record<string, number> = {};
    for (const sid of Object.keys(this.statements)) {
      const checked = this.form.querySelector<HTMLInputElement>(`input[name="${sid}"]:checked`);
      if (checked) out[sid] = Number(checked.value);
    }
    return out;
  }

  async submit(): Promise<void> {
    if (this.unanswered().length > 0) return;
    const participant = this.form.querySelector<HTMLInputElement>('input[name="participant_id"]')!.value || "anonymous";
    const sessionNumber = Number(this.form.querySelector<HTMLSelectElement>('select[name="session_number"]')!.value);
    try {
      await this.api.submitSurvey(this.sessionId, participant, sessionNumber, this.ratings());
      this.status.textContent = "Thank you! Your answers were recorded.";
      this.submitButton.disabled = true;
    } catch (err) {
      this.status.textContent = err instanceof ApiError ? `Could not submit: ${err.message}` : "Could not submit.";
    }
  }
}
