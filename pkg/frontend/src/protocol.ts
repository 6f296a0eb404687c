// Message types for the session service protocol: one JSON object per
// WebSocket frame, mirroring the TCP line protocol verbatim.

export type Phase = 'green' | 'yellow' | 'red';
export type Choice = 'stop' | 'go';

export interface StateMsg {
  type: 'state';
  t: number;
  pos_m: number;
  speed_mps: number;
  phase: Phase;
  yellow_remaining_s: number;
  decided: boolean;
}

export interface SummaryMsg {
  type: 'summary';
  session_id: string;
  driver_id: string;
  decision: Choice | null;
  decision_t_s: number | null;
  ran_red: boolean;
  crossed_line_t_s: number | null;
  final_position_m: number;
  n_samples: number;
  stored: boolean;
}

export interface AckMsg {
  type: 'ack';
  accepted: boolean;
  reason?: string;
  choice?: Choice;
  t?: number;
  aborted?: boolean;
}

export interface ErrorMsg {
  type: 'error';
  error: string;
}

export type ServerMsg = StateMsg | SummaryMsg | AckMsg | ErrorMsg;

export function isStateMsg(m: unknown): m is StateMsg {
  const x = m as StateMsg;
  return (
    typeof x === 'object' && x !== null && x.type === 'state' &&
    typeof x.t === 'number' && typeof x.pos_m === 'number' &&
    typeof x.speed_mps === 'number' &&
    (x.phase === 'green' || x.phase === 'yellow' || x.phase === 'red') &&
    typeof x.yellow_remaining_s === 'number' && typeof x.decided === 'boolean'
  );
}

export function isSummaryMsg(m: unknown): m is SummaryMsg {
  const x = m as SummaryMsg;
  return typeof x === 'object' && x !== null && x.type === 'summary' &&
    typeof x.driver_id === 'string' && typeof x.stored === 'boolean';
}

export function isAckMsg(m: unknown): m is AckMsg {
  const x = m as AckMsg;
  return typeof x === 'object' && x !== null && x.type === 'ack' &&
    typeof x.accepted === 'boolean';
}

export function isErrorMsg(m: unknown): m is ErrorMsg {
  const x = m as ErrorMsg;
  return typeof x === 'object' && x !== null && x.type === 'error' &&
    typeof x.error === 'string';
}

export function parseServerMsg(raw: string): ServerMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (isStateMsg(obj) || isSummaryMsg(obj) || isAckMsg(obj) || isErrorMsg(obj)) {
    return obj;
  }
  return null;
}

export function startMsg(driverId: string, seed?: number): string {
  const msg: Record<string, unknown> = { type: 'start', driver_id: driverId };
  if (seed !== undefined) msg.seed = seed;
  return JSON.stringify(msg);
}

export function controlMsg(throttle: number, brake: number): string {
  return JSON.stringify({ type: 'control', throttle, brake });
}

export function decisionMsg(choice: Choice): string {
  return JSON.stringify({ type: 'decision', choice });
}

export function abortMsg(): string {
  return JSON.stringify({ type: 'abort' });
}
