import { describe, expect, it } from "vitest";

import type { Pool, PendingGuide, QuestionDescriptor } from "../src/api.js";
import {
  categoryBadge,
  renderGuide,
  renderPoolSummary,
  renderQuestion,
  renderToolbar,
} from "../src/views.js";

const FP26: QuestionDescriptor = {
  item: "FP2.6",
  prompt: "Decision rule applied to predicted class scores",
  why: "The decision rule determines whether fixed-matrix counting metrics apply.",
  kind: "enum",
  domain: ["target-value", "optimization", "argmax", "cost-benefit", "none"],
  anchor: "FP2.6",
};

const BINARY: QuestionDescriptor = {
  item: "FP3.3",
  prompt: "Do target structures have a tubular shape?",
  why: "Tubular structures favour centerline-aware overlap metrics.",
  kind: "bool",
  domain: [true, false],
  anchor: "FP3.3",
};

function guide(options: Array<[string, string]>): PendingGuide {
  return {
    key: "DGX", guide: "DGX", title: "choice", slot: "overlap",
    scope: [1],
    options: options.map(([id, label], index) => ({
      id, label, recommended: index === 0, notes: [],
      tradeoffs: [{ sign: "+", text: `${label} strength` },
                  { sign: "-", text: `${label} weakness` }],
    })),
  };
}

function emptyPool(): Pool {
  return {
    version: "1", category: "SemS", class_count: 1, multi_class: [],
    per_class: {}, calibration: [],
    detection: { criterion: null, assignment: null, thresholds: null,
                 threshold_policy: null },
    aggregation: {}, warnings: [], notes: [], pending_guides: [],
    resolved_guides: [],
  };
}

describe("renderQuestion", () => {
  it("renders the decision-rule enum as a five-option selector", () => {
    const html = renderQuestion(FP26, "ImLC", null);
    const radios = html.match(/type="radio"/g) ?? [];
    expect(radios).toHaveLength(5);
    expect(html).toContain("no decision rule applied");
  });

  it("renders binary items as a two-state toggle", () => {
    const html = renderQuestion(BINARY, "SemS", null);
    const radios = html.match(/type="radio"/g) ?? [];
    expect(radios).toHaveLength(2);
    expect(html).toContain("> yes</label>");
    expect(html).toContain("> no</label>");
  });

  it("keeps the next button disabled until a choice is made", () => {
    const unanswered = renderQuestion(BINARY, "SemS", null);
    expect(unanswered).toContain('data-action="submit-answer" disabled');
    const answered = renderQuestion(BINARY, "SemS", "true");
    expect(answered).toContain('data-action="submit-answer">');
    expect(answered).not.toContain("disabled>Next");
  });

  it("always offers the why expander", () => {
    const html = renderQuestion(BINARY, null, null);
    expect(html).toContain("Why are we asking this question?");
    expect(html).toContain(BINARY.why);
  });

  it("badges the category with its path colour", () => {
    expect(categoryBadge("ImLC")).toContain("#2d6cdf");
    expect(categoryBadge("SemS")).toContain("#e0a800");
    expect(categoryBadge("ObD")).toContain("#2e8540");
    expect(categoryBadge("InS")).toContain("#d4509f");
    expect(categoryBadge(null)).toContain("category pending");
  });
});

describe("renderGuide", () => {
  it("renders a two-column tradeoff table for a two-way guide", () => {
    const html = renderGuide(guide([["dsc", "DSC"], ["iou", "IoU"]]));
    const headers = html.match(/<th>/g) ?? [];
    expect(headers).toHaveLength(2);
    expect(html).toContain("DSC ★");
    expect(html).toContain('data-option="iou"');
  });

  it("renders a three-column table for a three-way guide", () => {
    const html = renderGuide(guide([
      ["balanced_accuracy", "BA"], ["mcc", "MCC"], ["expected_cost", "ECN"]]));
    const headers = html.match(/<th>/g) ?? [];
    expect(headers).toHaveLength(3);
  });

  it("marks pro and con rows", () => {
    const html = renderGuide(guide([["dsc", "DSC"], ["iou", "IoU"]]));
    expect(html).toContain("sign-pro");
    expect(html).toContain("sign-con");
  });
});

describe("renderPoolSummary", () => {
  it("shows warning badges", () => {
    const pool = emptyPool();
    pool.warnings.push({ code: "S6.small-structures",
                         message: "overlap scores react strongly", anchor: "S6" });
    const html = renderPoolSummary(pool);
    expect(html).toContain("warning-badge");
    expect(html).toContain("overlap scores react strongly");
  });

  it("omits the calibration section when no calibration metrics exist", () => {
    const html = renderPoolSummary(emptyPool());
    expect(html).not.toContain("Calibration metrics");
  });

  it("lists calibration metrics when present", () => {
    const pool = emptyPool();
    pool.calibration.push({ metric: "brier_score", slot: "calibration",
                            params: {}, optional: false, anchor: "DG5.3" });
    const html = renderPoolSummary(pool);
    expect(html).toContain("Calibration metrics");
    expect(html).toContain("brier_score");
  });

  it("offers the export button and open guide choices", () => {
    const pool = emptyPool();
    pool.pending_guides.push(guide([["dsc", "DSC"], ["iou", "IoU"]]));
    const html = renderPoolSummary(pool);
    expect(html).toContain('data-action="export-pool"');
    expect(html).toContain('data-action="open-guide"');
  });

  it("escapes injected markup", () => {
    const pool = emptyPool();
    pool.notes.push("<script>alert(1)</script>");
    const html = renderPoolSummary(pool);
    expect(html).not.toContain("<script>alert(1)</script>");
  });
});

describe("renderToolbar", () => {
  it("disables undo/redo when unavailable", () => {
    expect(renderToolbar(false, false)).toContain('data-action="undo" disabled');
    expect(renderToolbar(true, false)).toContain('data-action="undo">');
  });
});
