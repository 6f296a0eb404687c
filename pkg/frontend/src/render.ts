// Canvas rendering of the approach: road strip with stop-line, signal
// head, speedometer and distance readout.  Pure function of the latest
// server state; called from a requestAnimationFrame loop that runs at
// display rate independent of the 50 Hz message stream.

import { StateMsg } from './protocol.js';

const ROAD_VIEW_M = 180; // meters of approach shown on the strip

export function drawScene(ctx: CanvasRenderingContext2D, state: StateMsg | null): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);

  // road strip
  const roadY = height * 0.55;
  const roadH = 46;
  ctx.fillStyle = '#3c3c3c';
  ctx.fillRect(0, roadY, width, roadH);
  ctx.strokeStyle = '#d8d8d8';
  ctx.setLineDash([14, 12]);
  ctx.beginPath();
  ctx.moveTo(0, roadY + roadH / 2);
  ctx.lineTo(width, roadY + roadH / 2);
  ctx.stroke();
  ctx.setLineDash([]);

  // stop-line near the right edge
  const stopX = width * 0.82;
  ctx.fillStyle = '#f0f0f0';
  ctx.fillRect(stopX, roadY, 6, roadH);

  if (state === null) return;

  // vehicle: position_m meters upstream of the line maps left of stopX
  const px = stopX - (state.pos_m / ROAD_VIEW_M) * (stopX - 20);
  ctx.fillStyle = '#4d8edc';
  ctx.fillRect(px - 22, roadY + 8, 22, roadH - 16);
  ctx.fillStyle = '#bcd6f2';
  ctx.fillRect(px - 18, roadY + 12, 8, roadH - 24);

  // signal head above the stop-line
  const lampR = 9;
  const headX = stopX + 3;
  const headY = roadY - 70;
  ctx.fillStyle = '#222';
  ctx.fillRect(headX - 14, headY - 14, 28, 76);
  const lamps: Array<[string, string]> = [
    ['red', '#e53935'], ['yellow', '#fdd835'], ['green', '#43a047'],
  ];
  lamps.forEach(([phase, color], i) => {
    ctx.beginPath();
    ctx.arc(headX, headY + i * 24, lampR, 0, 2 * Math.PI);
    ctx.fillStyle = state.phase === phase ? color : '#555';
    ctx.fill();
  });

  // readouts
  ctx.fillStyle = '#eee';
  ctx.font = '26px system-ui, sans-serif';
  ctx.fillText(`${(state.speed_mps * 3.6).toFixed(0)} km/h`, 24, 44);
  ctx.font = '16px system-ui, sans-serif';
  ctx.fillText(`${Math.max(state.pos_m, 0).toFixed(1)} m to stop-line`, 24, 72);
  if (state.phase === 'yellow') {
    ctx.fillStyle = '#fdd835';
    ctx.fillText(`yellow ${state.yellow_remaining_s.toFixed(1)} s`, 24, 96);
  }
  if (state.decided) {
    ctx.fillStyle = '#9be49b';
    ctx.fillText('decision recorded', 24, 120);
  }
}
