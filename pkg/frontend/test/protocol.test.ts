import { describe, expect, it } from 'vitest';

import {
  abortMsg,
  controlMsg,
  decisionMsg,
  isAckMsg,
  isStateMsg,
  isSummaryMsg,
  parseServerMsg,
  startMsg,
} from '../src/protocol.js';

const state = {
  type: 'state', t: 0.02, pos_m: 142.5, speed_mps: 19.5, phase: 'green',
  yellow_remaining_s: 7.5, decided: false,
};

describe('server message parsing', () => {
  it('accepts a well-formed state message', () => {
    const msg = parseServerMsg(JSON.stringify(state));
    expect(msg).not.toBeNull();
    expect(isStateMsg(msg)).toBe(true);
  });

  it('rejects unknown phases', () => {
    const bad = { ...state, phase: 'purple' };
    expect(parseServerMsg(JSON.stringify(bad))).toBeNull();
  });

  it('rejects non-JSON', () => {
    expect(parseServerMsg('not json')).toBeNull();
  });

  it('rejects wrong field types', () => {
    const bad = { ...state, speed_mps: 'fast' };
    expect(parseServerMsg(JSON.stringify(bad))).toBeNull();
  });

  it('accepts summary and ack messages', () => {
    const summary = {
      type: 'summary', session_id: 's1', driver_id: 'd', decision: 'go',
      decision_t_s: 4.5, ran_red: false, crossed_line_t_s: 9.1,
      final_position_m: -20.0, n_samples: 500, stored: true,
    };
    expect(isSummaryMsg(parseServerMsg(JSON.stringify(summary)))).toBe(true);
    const ack = { type: 'ack', accepted: false, reason: 'decision already recorded' };
    expect(isAckMsg(parseServerMsg(JSON.stringify(ack)))).toBe(true);
  });
});

describe('client message encoding', () => {
  it('start carries driver and optional seed', () => {
    expect(JSON.parse(startMsg('d1', 7))).toEqual({
      type: 'start', driver_id: 'd1', seed: 7,
    });
    expect(JSON.parse(startMsg('d1'))).toEqual({ type: 'start', driver_id: 'd1' });
  });

  it('control carries both scalars', () => {
    expect(JSON.parse(controlMsg(0.5, 0.25))).toEqual({
      type: 'control', throttle: 0.5, brake: 0.25,
    });
  });

  it('decision and abort', () => {
    expect(JSON.parse(decisionMsg('stop'))).toEqual({ type: 'decision', choice: 'stop' });
    expect(JSON.parse(abortMsg())).toEqual({ type: 'abort' });
  });
});
