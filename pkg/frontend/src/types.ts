/** Wire types mirrored from the training service (JSON bodies, SSE payloads). */

export interface FeedbackDoc {
  ts: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TaskInfo {
  id: string;
  max_points: number;
  text: string;
  keyphrase_hints: string[];
}

export interface SessionInfo {
  session_id: string;
  mode: string;
  active: boolean;
  current: string | null;
  completed: string[];
  tasks: TaskInfo[];
}

export interface TaskResultDoc {
  task: string;
  points_earned: number;
  points_max: number;
  completed: boolean;
  duration_ms: number | null;
  in_order: boolean;
  subtask_completion: number;
}

export type SeriesPoint = [number, number];

export interface CprDoc {
  push_count: number;
  avg_rate: number | null;
  avg_depth: number | null;
  full_release_always: boolean;
  rate_series: SeriesPoint[];
  depth_series: SeriesPoint[];
  rate_band: [number, number];
  depth_band: [number, number];
  target_rate: number;
}

export interface PreviousComparison {
  session_id: string;
  final_score: number;
  total_duration_ms: number;
}

export interface ReportDoc {
  schema: string;
  session_id: string;
  trainee: string;
  mode: string;
  task_results: TaskResultDoc[];
  intermediate_score: number;
  order_fraction: number;
  final_score: number;
  total_duration_ms: number;
  cpr: CprDoc;
  hints: string[];
  previous_comparison: PreviousComparison | null;
}
