// DOM wiring: connect form, keyboard pedals, STOP/GO buttons, render loop.

import { SessionClient } from './client.js';
import { InputRamp } from './ramp.js';
import { drawScene } from './render.js';

const $ = (id: string) => document.getElementById(id)!;

const canvas = $('scene') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const statusEl = $('status');
const stopBtn = $('stop-btn') as HTMLButtonElement;
const goBtn = $('go-btn') as HTMLButtonElement;
const connectBtn = $('connect-btn') as HTMLButtonElement;
const messageEl = $('message');

const keys: Record<string, boolean> = {};
window.addEventListener('keydown', (e) => {
  if (e.key === 'ArrowUp' || e.key === 'ArrowDown') e.preventDefault();
  keys[e.key] = true;
});
window.addEventListener('keyup', (e) => {
  keys[e.key] = false;
});

const client = new SessionClient((url) => new WebSocket(url) as never, {
  onView: (view) => {
    statusEl.textContent = view.status;
    statusEl.className = `status ${view.status}`;
    const deciding = view.status === 'running' && view.latched === null
      && !(view.state?.decided ?? false);
    stopBtn.disabled = !deciding;
    goBtn.disabled = !deciding;
    if (view.status === 'disconnected') {
      messageEl.textContent = 'connection lost: the episode was aborted server-side; reconnect to start a new one';
      messageEl.className = 'banner error';
    } else if (view.lastError) {
      messageEl.textContent = view.lastError;
      messageEl.className = 'banner warn';
    }
  },
  onSummary: (summary) => {
    const verdict = summary.decision === null ? 'no decision'
      : `${summary.decision}${summary.ran_red ? ', ran the red light' : ''}`;
    messageEl.textContent =
      `episode finished: ${verdict}${summary.stored ? ' (saved)' : ' (not saved)'}`;
    messageEl.className = `banner ${summary.ran_red ? 'warn' : 'ok'}`;
  },
});

connectBtn.addEventListener('click', () => {
  const driver = ($('driver-id') as HTMLInputElement).value.trim() || 'anon';
  const seedRaw = ($('seed') as HTMLInputElement).value.trim();
  const seed = seedRaw === '' ? Math.floor(Math.random() * 2 ** 31) : Number(seedRaw);
  const url = `ws://${location.host}/ws`;
  messageEl.textContent = '';
  messageEl.className = 'banner';
  client.connect(url, driver, seed);
});

stopBtn.addEventListener('click', () => client.sendDecision('stop'));
goBtn.addEventListener('click', () => client.sendDecision('go'));
window.addEventListener('beforeunload', () => client.disconnect());

// pedal loop at the protocol tick rate; messages only on real change
const ramp = new InputRamp();
const TICK_MS = 20;
setInterval(() => {
  ramp.update(TICK_MS / 1000, keys['ArrowUp'] === true, keys['ArrowDown'] === true);
  const now = performance.now();
  if (ramp.shouldSend(now) && client.sendControl(ramp.throttle, ramp.brake)) {
    ramp.markSent(now);
  }
}, TICK_MS);

// render decoupled from the 50 Hz state stream
function frame(): void {
  drawScene(ctx, client.view.state);
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
