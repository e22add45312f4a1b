/** Pure view functions: state in, HTML out. Event wiring lives in wizard.ts
 * via data-action attributes, so these render functions stay testable. */

import type { Pool, PoolEntry, PendingGuide, QuestionDescriptor } from "./api.js";
import { CATEGORY_COLORS, CATEGORY_NAMES, SIGN_SYMBOLS, valueLabel } from "./labels.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function categoryBadge(category: string | null): string {
  if (!category) {
    return `<span class="badge badge-pending">category pending</span>`;
  }
  const color = CATEGORY_COLORS[category] ?? "#666";
  const name = CATEGORY_NAMES[category] ?? category;
  return `<span class="badge" style="background:${color}">` +
    `${escapeHtml(category)} · ${escapeHtml(name)}</span>`;
}

/** Binary toggle or enum selector with the "why" expander; the next button
 * stays disabled until a choice is made. */
export function renderQuestion(question: QuestionDescriptor,
                               category: string | null,
                               selected: string | null): string {
  const options = question.domain
    .map((value) => {
      const token = String(value);
      const checked = selected === token ? " checked" : "";
      const label = valueLabel(question.item, value as string | boolean);
      return (
        `<label class="option"><input type="radio" name="answer" ` +
        `value="${escapeHtml(token)}" data-action="select"${checked}> ` +
        `${escapeHtml(label)}</label>`
      );
    })
    .join("\n");
  const input = question.kind === "int"
    ? `<input type="number" name="answer" min="1" step="1" ` +
      `data-action="select-number" value="${selected ?? ""}">`
    : options;
  const disabled = selected === null || selected === "" ? " disabled" : "";
  return `
<section class="question" data-item="${escapeHtml(question.item)}">
  ${categoryBadge(category)}
  <h2>${escapeHtml(question.prompt)}</h2>
  <span class="item-id">${escapeHtml(question.item)}</span>
  <details class="why">
    <summary>Why are we asking this question?</summary>
    <p>${escapeHtml(question.why)}</p>
  </details>
  <div class="answers">${input}</div>
  <button data-action="submit-answer"${disabled}>Next</button>
</section>`;
}

/** Side-by-side tradeoff table, one column per option. */
export function renderGuide(guide: PendingGuide): string {
  const headers = guide.options
    .map((option) => {
      const star = option.recommended ? " ★" : "";
      return `<th>${escapeHtml(option.label)}${star}</th>`;
    })
    .join("");
  const maxRows = Math.max(...guide.options.map((o) => o.tradeoffs.length));
  let body = "";
  for (let row = 0; row < maxRows; row += 1) {
    const cells = guide.options
      .map((option) => {
        const tradeoff = option.tradeoffs[row];
        if (!tradeoff) return "<td></td>";
        const symbol = SIGN_SYMBOLS[tradeoff.sign] ?? tradeoff.sign;
        return `<td class="sign-${tradeoff.sign === "+" ? "pro" :
          tradeoff.sign === "-" ? "con" : "neutral"}">` +
          `${symbol} ${escapeHtml(tradeoff.text)}</td>`;
      })
      .join("");
    body += `<tr>${cells}</tr>\n`;
  }
  const buttons = guide.options
    .map((option) =>
      `<button data-action="choose-option" data-key="${escapeHtml(guide.key)}" ` +
      `data-option="${escapeHtml(option.id)}">${escapeHtml(option.label)}</button>`)
    .join("\n");
  const scope = guide.scope === "global" ? ""
    : `<p class="scope">applies to class(es) ${
        (guide.scope as number[]).join(", ")}</p>`;
  return `
<section class="guide" data-guide="${escapeHtml(guide.guide)}">
  <h2>${escapeHtml(guide.guide)}: ${escapeHtml(guide.title)}</h2>
  ${scope}
  <table class="tradeoffs">
    <thead><tr>${headers}</tr></thead>
    <tbody>${body}</tbody>
  </table>
  <div class="choices">${buttons}</div>
</section>`;
}

function entryLine(entry: PoolEntry): string {
  const params = Object.entries(entry.params)
    .filter(([key]) => key !== "_anchor")
    .map(([key, value]) => `${key}=${JSON.stringify(value)}`)
    .join(", ");
  const optional = entry.optional ? ` <em>(optional)</em>` : "";
  const note = entry.note ? `<br><small>${escapeHtml(entry.note)}</small>` : "";
  return `<li><code>${escapeHtml(entry.metric)}</code>${optional}` +
    `${params ? ` <small>${escapeHtml(params)}</small>` : ""}${note}</li>`;
}

function entryGroup(title: string, entries: PoolEntry[]): string {
  if (!entries.length) return "";
  return `<h3>${escapeHtml(title)}</h3>\n<ul>` +
    entries.map(entryLine).join("\n") + "</ul>";
}

/** Grouped pool listing with warning badges, open choices and export. */
export function renderPoolSummary(pool: Pool): string {
  const warnings = pool.warnings
    .map((w) => `<li class="warning-badge" data-code="${escapeHtml(w.code)}">` +
      `⚠ ${escapeHtml(w.message)}</li>`)
    .join("\n");
  const notes = pool.notes
    .map((n) => `<li class="note">${escapeHtml(n)}</li>`)
    .join("\n");
  const perClass = Object.entries(pool.per_class)
    .map(([cls, entries]) => entryGroup(`Class ${cls} metrics`, entries))
    .join("\n");
  const detection = pool.detection.criterion
    ? `<h3>Detection configuration</h3>
<ul>
  <li>localization criterion: <code>${escapeHtml(
      JSON.stringify(pool.detection.criterion))}</code></li>
  <li>assignment: <code>${escapeHtml(
      JSON.stringify(pool.detection.assignment))}</code></li>
  ${pool.detection.thresholds
    ? `<li>thresholds: ${pool.detection.thresholds.join(", ")} ` +
      `(${escapeHtml(pool.detection.threshold_policy ?? "")})</li>`
    : ""}
</ul>`
    : "";
  const guides = pool.pending_guides
    .map((guide) =>
      `<li><button data-action="open-guide" data-key="${escapeHtml(guide.key)}">` +
      `${escapeHtml(guide.guide)}: ${escapeHtml(guide.title)}</button></li>`)
    .join("\n");
  const calibration = pool.calibration.length
    ? entryGroup("Calibration metrics", pool.calibration)
    : "";
  return `
<section class="pool">
  ${categoryBadge(pool.category)}
  <h2>Recommended metric pool</h2>
  ${warnings ? `<ul class="warnings">${warnings}</ul>` : ""}
  ${pool.pending_guides.length
    ? `<h3>Open choices</h3><ul class="guides">${guides}</ul>` : ""}
  ${entryGroup("Multi-class metrics", pool.multi_class)}
  ${perClass}
  ${calibration}
  ${detection}
  ${notes ? `<h3>Notes</h3><ul class="notes">${notes}</ul>` : ""}
  <button data-action="export-pool">Export pool JSON</button>
</section>`;
}

export function renderError(message: string): string {
  return `<div class="error" role="alert">${escapeHtml(message)}</div>`;
}

export function renderToolbar(canUndo: boolean, canRedo: boolean): string {
  return `
<nav class="toolbar">
  <button data-action="undo"${canUndo ? "" : " disabled"}>Undo</button>
  <button data-action="redo"${canRedo ? "" : " disabled"}>Redo</button>
  <button data-action="restart">Start over</button>
</nav>`;
}
