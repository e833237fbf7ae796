/** View state and the feedback reducer.
 *
 * Every number in the state is taken verbatim from the service; the UI does
 * no scoring or CPR arithmetic of its own.
 */

import type { FeedbackDoc, SessionInfo } from "./types.js";

export interface GaugeState {
  visible: boolean;
  rate: number | null;
  depth: number | null;
  count: number;
}

export interface InstructionState {
  task: string;
  text: string;
}

export interface ViewState {
  tasks: string[];
  completed: string[];
  current: string | null;
  instruction: InstructionState | null;
  keyphrases: string[];
  gauge: GaugeState;
  soundCues: number;
  budgetWarnings: string[];
}

export function initialState(info: SessionInfo): ViewState {
  return {
    tasks: info.tasks.map((t) => t.id),
    completed: [...info.completed],
    current: info.current,
    instruction: null,
    keyphrases: [],
    gauge: { visible: false, rate: null, depth: null, count: 0 },
    soundCues: 0,
    budgetWarnings: [],
  };
}

/** Breadcrumbs: previous / current / next around the current task. */
export function breadcrumbs(state: ViewState): { prev: string | null; current: string | null; next: string | null } {
  if (state.current === null) {
    const last = state.tasks[state.tasks.length - 1] ?? null;
    return { prev: last, current: null, next: null };
  }
  const index = state.tasks.indexOf(state.current);
  return {
    prev: index > 0 ? state.tasks[index - 1] : null,
    current: state.current,
    next: index >= 0 && index + 1 < state.tasks.length ? state.tasks[index + 1] : null,
  };
}

function advanceCurrent(state: ViewState, completedTask: string): string | null {
  const done = new Set([...state.completed, completedTask]);
  for (const task of state.tasks) {
    if (!done.has(task)) {
      return task;
    }
  }
  return null;
}

export function applyFeedback(state: ViewState, fb: FeedbackDoc): ViewState {
  switch (fb.kind) {
    case "InstructionShown": {
      const task = String(fb.payload.task);
      return {
        ...state,
        current: task,
        instruction: { task, text: String(fb.payload.text ?? "") },
        keyphrases: [],
      };
    }
    case "KeyphraseHint":
      return { ...state, keyphrases: (fb.payload.phrases as string[]) ?? [] };
    case "SoundCue":
      return { ...state, soundCues: state.soundCues + 1 };
    case "TaskCompleted": {
      const task = String(fb.payload.task);
      const completed = state.completed.includes(task) ? state.completed : [...state.completed, task];
      const gauge =
        task === "PerformCompressions" ? { ...state.gauge, visible: false } : state.gauge;
      return { ...state, completed, current: advanceCurrent(state, task), gauge };
    }
    case "LiveCpr":
      return {
        ...state,
        gauge: {
          visible: true,
          rate: (fb.payload.rate as number | null) ?? null,
          depth: (fb.payload.depth as number | null) ?? null,
          count: Number(fb.payload.count ?? 0),
        },
      };
    case "TimeBudgetExceeded": {
      const task = String(fb.payload.task);
      const warnings = state.budgetWarnings.includes(task)
        ? state.budgetWarnings
        : [...state.budgetWarnings, task];
      return { ...state, budgetWarnings: warnings };
    }
    default:
      return state;
  }
}
