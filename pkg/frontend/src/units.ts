/**
 * Unit conversions between human-facing controls and the wire.
 *
 * Everything on the wire is SI: metres, seconds, radians. Humans get
 * degrees and centimetres. These helpers are the only place the two
 * systems meet; the rest of the client never converts.
 */

export const DEG_PER_RAD = 180 / Math.PI;

export function degToRad(deg: number): number {
  return deg / DEG_PER_RAD;
}

export function radToDeg(rad: number): number {
  return rad * DEG_PER_RAD;
}

export function cmToM(cm: number): number {
  return cm / 100;
}

export function mToCm(m: number): number {
  return m * 100;
}

export function clamp(x: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, x));
}

/** Fixed-width display formatting; keeps slider readouts stable. */
export function fmt(x: number, digits = 2): string {
  if (!Number.isFinite(x)) return x > 0 ? "inf" : x < 0 ? "-inf" : "nan";
  return x.toFixed(digits);
}
