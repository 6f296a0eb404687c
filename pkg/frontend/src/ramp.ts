// Keyboard-to-pedal ramps: a held key ramps its scalar from 0 to 1 over
// RISE_S seconds; releasing decays back to 0 over DECAY_S.  Control
// traffic is rate-limited to the tick rate and suppressed while the pair
// hasn't moved beyond the dead band since the last send.

export const RISE_S = 0.3;
export const DECAY_S = 0.2;
export const SEND_DEADBAND = 0.01;
export const MAX_SEND_HZ = 50;

function clamp01(x: number): number {
  return x < 0 ? 0 : x > 1 ? 1 : x;
}

export class InputRamp {
  throttle = 0;
  brake = 0;
  private sentThrottle = 0;
  private sentBrake = 0;
  private lastSendMs = -Infinity;

  update(dtS: number, accelHeld: boolean, brakeHeld: boolean): void {
    const rise = dtS / RISE_S;
    const decay = dtS / DECAY_S;
    this.throttle = clamp01(this.throttle + (accelHeld ? rise : -decay));
    this.brake = clamp01(this.brake + (brakeHeld ? rise : -decay));
  }

  shouldSend(nowMs: number): boolean {
    if (nowMs - this.lastSendMs < 1000 / MAX_SEND_HZ) return false;
    return (
      Math.abs(this.throttle - this.sentThrottle) > SEND_DEADBAND ||
      Math.abs(this.brake - this.sentBrake) > SEND_DEADBAND
    );
  }

  markSent(nowMs: number): void {
    this.sentThrottle = this.throttle;
    this.sentBrake = this.brake;
    this.lastSendMs = nowMs;
  }
}
