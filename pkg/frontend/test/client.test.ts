import { describe, expect, it } from 'vitest';

import { SessionClient, SocketLike } from '../src/client.js';

class FakeSocket implements SocketLike {
  sent: string[] = [];
  onopen: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  closed = false;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  serverSays(obj: unknown): void {
    this.onmessage?.({ data: JSON.stringify(obj) });
  }
}

function connected(): { client: SessionClient; socket: FakeSocket } {
  let socket!: FakeSocket;
  const client = new SessionClient(() => {
    socket = new FakeSocket();
    return socket;
  });
  client.connect('ws://x/ws', 'd1', 5);
  socket.onopen?.();
  return { client, socket };
}

const stateMsg = (decided: boolean) => ({
  type: 'state', t: 0.02, pos_m: 100, speed_mps: 20, phase: 'yellow',
  yellow_remaining_s: 3.0, decided,
});

describe('SessionClient', () => {
  it('sends start on open and mirrors state', () => {
    const { client, socket } = connected();
    expect(JSON.parse(socket.sent[0])).toEqual({
      type: 'start', driver_id: 'd1', seed: 5,
    });
    socket.serverSays(stateMsg(false));
    expect(client.view.state?.speed_mps).toBe(20);
    expect(client.view.status).toBe('running');
  });

  it('latches the decision locally after an accepted ack', () => {
    const { client, socket } = connected();
    socket.serverSays(stateMsg(false));
    expect(client.sendDecision('go')).toBe(true);
    socket.serverSays({ type: 'ack', accepted: true, choice: 'go', t: 0.02 });
    expect(client.view.latched).toBe('go');
    // second press is blocked locally
    expect(client.sendDecision('stop')).toBe(false);
  });

  it('surfaces a server rejection', () => {
    const { client, socket } = connected();
    socket.serverSays(stateMsg(false));
    client.sendDecision('go');
    socket.serverSays({ type: 'ack', accepted: false, reason: 'decision already recorded' });
    expect(client.view.lastError).toContain('already recorded');
  });

  it('blocks decisions once server state says decided', () => {
    const { client, socket } = connected();
    socket.serverSays(stateMsg(true));
    expect(client.sendDecision('go')).toBe(false);
  });

  it('marks the view disconnected when the socket drops mid-session', () => {
    const { client, socket } = connected();
    socket.serverSays(stateMsg(false));
    socket.close();
    expect(client.view.status).toBe('disconnected');
  });

  it('keeps finished status when closed after summary', () => {
    const { client, socket } = connected();
    socket.serverSays(stateMsg(false));
    socket.serverSays({
      type: 'summary', session_id: 's', driver_id: 'd1', decision: 'go',
      decision_t_s: 1.0, ran_red: false, crossed_line_t_s: 2.0,
      final_position_m: -10, n_samples: 100, stored: true,
    });
    expect(client.view.status).toBe('finished');
    socket.close();
    expect(client.view.status).toBe('finished');
  });

  it('refuses controls when not running', () => {
    let socket!: FakeSocket;
    const client = new SessionClient(() => {
      socket = new FakeSocket();
      return socket;
    });
    expect(client.sendControl(1, 0)).toBe(false);
    client.connect('ws://x/ws', 'd1');
    socket.onopen?.();
    expect(client.sendControl(1, 0)).toBe(true);
  });

  it('is stateless across sessions except the caller-held driver id', () => {
    const { client, socket } = connected();
    socket.serverSays(stateMsg(false));
    client.sendDecision('go');
    socket.serverSays({ type: 'ack', accepted: true, choice: 'go' });
    client.connect('ws://x/ws', 'd1', 6); // new session: view resets
    expect(client.view.latched).toBeNull();
    expect(client.view.state).toBeNull();
    expect(client.view.summary).toBeNull();
  });
});
