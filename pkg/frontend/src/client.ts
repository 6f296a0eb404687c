// Session client: forwards inputs, mirrors server-authoritative state.
// The socket constructor is injected so the same class runs in the
// browser (window.WebSocket) and under test (the ws package).

import {
  AckMsg,
  Choice,
  ErrorMsg,
  ServerMsg,
  StateMsg,
  SummaryMsg,
  abortMsg,
  controlMsg,
  decisionMsg,
  parseServerMsg,
  startMsg,
} from './protocol.js';

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus = 'idle' | 'connecting' | 'running' | 'finished' | 'disconnected';

// Mirror of the server state plus connection bookkeeping; the client
// computes no physics of its own.
export interface ClientSessionView {
  status: ConnectionStatus;
  state: StateMsg | null;
  latched: Choice | null;
  summary: SummaryMsg | null;
  lastError: string | null;
}

export interface ClientEvents {
  onView?: (view: ClientSessionView) => void;
  onAck?: (ack: AckMsg) => void;
  onSummary?: (summary: SummaryMsg) => void;
}

export class SessionClient {
  private socket: SocketLike | null = null;
  readonly view: ClientSessionView = {
    status: 'idle', state: null, latched: null, summary: null, lastError: null,
  };

  constructor(private factory: SocketFactory, private events: ClientEvents = {}) {}

  connect(url: string, driverId: string, seed?: number): void {
    this.view.status = 'connecting';
    this.view.state = null;
    this.view.latched = null;
    this.view.summary = null;
    this.view.lastError = null;
    const socket = this.factory(url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(startMsg(driverId, seed));
      this.view.status = 'running';
      this.emit();
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onclose = () => {
      if (this.view.status !== 'finished') {
        this.view.status = 'disconnected';
      }
      this.emit();
    };
    socket.onerror = () => {
      this.view.lastError = 'socket error';
      this.emit();
    };
    this.emit();
  }

  private handleMessage(raw: string): void {
    const msg = parseServerMsg(raw);
    if (msg === null) {
      this.view.lastError = 'unparseable server message';
      this.emit();
      return;
    }
    switch (msg.type) {
      case 'state':
        this.view.state = msg;
        if (!msg.decided) this.view.latched = null;
        break;
      case 'summary':
        this.view.summary = msg;
        this.view.status = 'finished';
        this.events.onSummary?.(msg);
        break;
      case 'ack':
        this.handleAck(msg);
        break;
      case 'error':
        this.view.lastError = (msg as ErrorMsg).error;
        break;
    }
    this.emit();
  }

  private handleAck(ack: AckMsg): void {
    if (ack.accepted && ack.choice) {
      this.view.latched = ack.choice;
    } else if (!ack.accepted && ack.reason) {
      this.view.lastError = ack.reason;
    }
    this.events.onAck?.(ack);
  }

  sendControl(throttle: number, brake: number): boolean {
    if (this.view.status !== 'running' || this.socket === null) return false;
    this.socket.send(controlMsg(throttle, brake));
    return true;
  }

  // Returns false when the decision is already latched locally; the
  // server remains authoritative and rejects duplicates regardless.
  sendDecision(choice: Choice): boolean {
    if (this.view.status !== 'running' || this.socket === null) return false;
    if (this.view.latched !== null || this.view.state?.decided) return false;
    this.socket.send(decisionMsg(choice));
    return true;
  }

  abort(): void {
    if (this.socket !== null && this.view.status === 'running') {
      this.socket.send(abortMsg());
    }
  }

  disconnect(): void {
    this.socket?.close();
    this.socket = null;
  }

  private emit(): void {
    this.events.onView?.(this.view);
  }
}
