/** Browser entry point: mounts the controller-driven wizard into a DOM node. */

import { createApi } from "./api.js";
import { WizardController, type WizardState } from "./state.js";
import {
  renderError,
  renderGuide,
  renderPoolSummary,
  renderQuestion,
  renderToolbar,
} from "./views.js";

export function mountWizard(root: HTMLElement, baseUrl: string): WizardController {
  const controller = new WizardController(createApi(baseUrl));
  let selected: string | null = null;

  function render(state: WizardState): void {
    let body = "";
    if (state.error) {
      body += renderError(state.error);
    }
    for (const notice of state.notices) {
      body += `<div class="notice">${notice}</div>`;
    }
    if (state.guideModal) {
      body += renderGuide(state.guideModal);
    } else if (state.question) {
      body += renderQuestion(state.question, state.category, selected);
    } else if (state.complete && state.pool) {
      body += renderPoolSummary(state.pool);
    } else if (state.busy) {
      body += `<div class="busy">…</div>`;
    }
    root.innerHTML = renderToolbar(controller.canUndo, controller.canRedo) + body;
  }

  controller.subscribe((state) => {
    if (!state.question) selected = null;
    render(state);
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (!action) return;
    if (action === "submit-answer") {
      const state = controller.snapshot();
      if (selected === null || !state.question) return;
      const value = state.question.kind === "bool"
        ? selected === "true"
        : state.question.kind === "int"
          ? Number(selected)
          : selected;
      selected = null;
      void controller.answer(value);
    } else if (action === "choose-option") {
      void controller.resolveGuide(target.dataset.key as string,
                                   target.dataset.option as string);
    } else if (action === "open-guide") {
      const pool = controller.snapshot().pool;
      const guide = pool?.pending_guides.find(
        (g) => g.key === target.dataset.key);
      if (guide) controller.openGuide(guide);
    } else if (action === "undo") {
      void controller.undo();
    } else if (action === "redo") {
      void controller.redo();
    } else if (action === "restart") {
      void controller.start();
    } else if (action === "export-pool") {
      void controller.exportPoolText().then((text) => {
        const blob = new Blob([text], { type: "application/json" });
        const url = URL.createObjectURL(blob);
        const anchor = document.createElement("a");
        anchor.href = url;
        anchor.download = "metric-pool.json";
        anchor.click();
        URL.revokeObjectURL(url);
      });
    }
  });

  root.addEventListener("change", (event) => {
    const target = event.target as HTMLInputElement;
    if (target.dataset.action === "select"
        || target.dataset.action === "select-number") {
      selected = target.value;
      render(controller.snapshot());
    }
  });

  void controller.start();
  return controller;
}
