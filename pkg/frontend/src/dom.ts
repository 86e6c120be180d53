// DOM rendering: a straight projection of ConsoleState, rebuilt per change.

import type { ConsoleState } from "./controller.js";
import { remeasureVisible, scoreEnabled, throwEnabled } from "./model.js";

export interface Handlers {
  onThrow: (player: string) => void;
  onRemeasure: (bouleId: string) => void;
  onScore: () => void;
}

export function render(root: HTMLElement, state: ConsoleState, handlers: Handlers): void {
  root.textContent = "";
  if (state.fatal) {
    root.appendChild(el("div", "banner error", `session error: ${state.fatal}`));
    return;
  }
  const view = state.view;
  if (!view) {
    root.appendChild(el("div", "banner", "connecting…"));
    return;
  }

  const head = el("div", "head");
  head.appendChild(el("span", `conn conn-${state.connection}`, state.connection));
  head.appendChild(el("span", "round", `round ${view.roundNo}`));
  const scores = view.players
    .map((p) => `${p} ${view.scores[p] ?? 0}`)
    .join("  ·  ");
  head.appendChild(el("span", "scores", `${scores}  (to ${view.targetScore})`));
  root.appendChild(head);

  if (view.winner) {
    root.appendChild(el("div", "banner winner", `${view.winner} wins the game`));
  } else if (view.turn) {
    root.appendChild(el("div", "banner turn", `${view.turn} to throw`));
  } else if (scoreEnabled(view)) {
    root.appendChild(el("div", "banner", "round complete, ready to score"));
  }
  if (view.roundBanner) {
    root.appendChild(el("div", "banner round-result", view.roundBanner));
  }
  if (state.error) {
    root.appendChild(el("div", "banner error", state.error));
  }

  const board = el("div", "board");
  for (const player of view.players) {
    const col = el("div", "column");
    col.appendChild(el("h2", "", player));
    for (const tile of view.tiles.filter((t) => t.player === player)) {
      const cell = el("div", "tile");
      cell.appendChild(el("span", "bid", tile.boule_id));
      cell.appendChild(
        el(
          "span",
          "distance",
          tile.distance_cm === null ? "—" : `${tile.distance_cm.toFixed(2)} cm`,
        ),
      );
      if (remeasureVisible(tile)) {
        const btn = el("button", "remeasure", "remeasure") as HTMLButtonElement;
        btn.disabled = state.busy || view.phase === "game_complete";
        btn.onclick = () => handlers.onRemeasure(tile.boule_id);
        cell.appendChild(btn);
      }
      col.appendChild(cell);
    }
    board.appendChild(col);
  }
  root.appendChild(board);

  const controls = el("div", "controls");
  const throwBtn = el("button", "throw", `measure throw`) as HTMLButtonElement;
  throwBtn.disabled = state.busy || !throwEnabled(view) || !view.turn;
  throwBtn.onclick = () => view.turn && handlers.onThrow(view.turn);
  controls.appendChild(throwBtn);

  const scoreBtn = el("button", "score", "score round") as HTMLButtonElement;
  scoreBtn.disabled = state.busy || !scoreEnabled(view);
  scoreBtn.onclick = () => handlers.onScore();
  controls.appendChild(scoreBtn);
  root.appendChild(controls);
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}
