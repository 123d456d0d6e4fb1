// Playground wiring: pseudocode in, generated C++ out, optional scoring of
// the result against a pasted reference. Every displayed number and code
// string comes verbatim from a service response; nothing is computed here.

import { EvaluateResponse, ServiceClient, ServiceError } from "./api.js";

export interface PlaygroundState {
  lastCode: string | null;
  lastLatencyMs: number | null;
  lastMetrics: EvaluateResponse | null;
  generateInFlight: boolean;
  generateQueued: boolean;
  modelLoaded: boolean;
}

export interface PlaygroundController {
  state: PlaygroundState;
  refreshHealth(): Promise<void>;
  generate(): Promise<void>;
  evaluate(): Promise<void>;
}

export const METRIC_ROWS = [
  ["similarity", "Similarity Score"],
  ["codebleu", "CodeBLEU"],
  ["ngram", "Ngram Match Score"],
  ["weighted_ngram", "Weighted Ngram Match Score"],
  ["syntax", "Syntax Match Score"],
  ["dataflow", "Dataflow Match Score"],
] as const;

function element<T extends HTMLElement>(root: Document, id: string): T {
  const found = root.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function describe(error: unknown): string {
  if (error instanceof ServiceError) return `service error ${error.status}: ${error.message}`;
  if (error instanceof Error) return error.message;
  return String(error);
}

export function initPlayground(root: Document, client: ServiceClient): PlaygroundController {
  const banner = element<HTMLElement>(root, "health-banner");
  const baseUrlInput = element<HTMLInputElement>(root, "base-url");
  const pseudocodeInput = element<HTMLTextAreaElement>(root, "pseudocode");
  const generateButton = element<HTMLButtonElement>(root, "generate");
  const generateError = element<HTMLElement>(root, "generate-error");
  const codeOutput = element<HTMLElement>(root, "code-output");
  const latencyLabel = element<HTMLElement>(root, "latency");
  const referenceInput = element<HTMLTextAreaElement>(root, "reference");
  const evaluateButton = element<HTMLButtonElement>(root, "evaluate");
  const evaluateError = element<HTMLElement>(root, "evaluate-error");

  const state: PlaygroundState = {
    lastCode: null,
    lastLatencyMs: null,
    lastMetrics: null,
    generateInFlight: false,
    generateQueued: false,
    modelLoaded: false,
  };

  baseUrlInput.value = client.getBaseUrl();

  function setBanner(text: string, visible: boolean): void {
    banner.textContent = text;
    banner.hidden = !visible;
  }

  function renderMetrics(metrics: EvaluateResponse | null): void {
    for (const [key] of METRIC_ROWS) {
      const cell = element<HTMLElement>(root, `metric-${key}`);
      if (metrics === null) {
        cell.textContent = "";
        continue;
      }
      const value = metrics[key];
      cell.textContent = value === null ? "—" : String(value);
    }
  }

  async function refreshHealth(): Promise<void> {
    try {
      const health = await client.health();
      state.modelLoaded = health.model_loaded;
      if (health.model_loaded) {
        setBanner("", false);
      } else {
        setBanner("No model is loaded; generation is unavailable.", true);
      }
    } catch (error) {
      state.modelLoaded = false;
      setBanner(describe(error), true);
    }
    generateButton.disabled = !state.modelLoaded;
  }

  async function generate(): Promise<void> {
    generateError.textContent = "";
    if (!pseudocodeInput.value.trim()) {
      generateError.textContent = "Enter some pseudocode first.";
      return;
    }
    if (state.generateInFlight) {
      state.generateQueued = true; // latest buffer wins once the active call ends
      return;
    }
    state.generateInFlight = true;
    try {
      do {
        state.generateQueued = false;
        const response = await client.generate(pseudocodeInput.value);
        state.lastCode = response.code;
        state.lastLatencyMs = response.latency_ms;
        codeOutput.textContent = response.code;
        latencyLabel.textContent = `${response.latency_ms.toFixed(0)} ms`;
      } while (state.generateQueued);
    } catch (error) {
      generateError.textContent = describe(error);
    } finally {
      state.generateInFlight = false;
    }
  }

  async function evaluate(): Promise<void> {
    evaluateError.textContent = "";
    if (state.lastCode === null) {
      evaluateError.textContent = "Generate some code first.";
      return;
    }
    if (!referenceInput.value.trim()) {
      evaluateError.textContent = "Paste a reference program to score against.";
      return;
    }
    try {
      const metrics = await client.evaluate(state.lastCode, referenceInput.value);
      state.lastMetrics = metrics;
      renderMetrics(metrics);
    } catch (error) {
      evaluateError.textContent = describe(error);
    }
  }

  generateButton.addEventListener("click", () => void generate());
  evaluateButton.addEventListener("click", () => void evaluate());
  baseUrlInput.addEventListener("change", () => {
    client.setBaseUrl(baseUrlInput.value);
    void refreshHealth();
  });

  renderMetrics(null);
  generateButton.disabled = true;

  return { state, refreshHealth, generate, evaluate };
}
