/** Number and time formatting shared by every view.
 *
 * All panels format through these helpers so that two runs carrying equal
 * values render as identical strings (the zero-adjustment identity check
 * compares rendered numbers, not floats).
 */

export function fmt(x: number, digits = 2): string {
  if (!Number.isFinite(x)) return String(x);
  return x.toFixed(digits);
}

/** Exceedance probability: three decimals, saturating display above 0.999. */
export function fmtP(p: number): string {
  if (p > 0.999) return '>0.999';
  return p.toFixed(3);
}

/** "2026-06-01T05:15:00Z" -> "06-01 05:15" (UTC, month-day hour:minute). */
export function fmtTime(rfc3339: string): string {
  const m = rfc3339.match(/^\d{4}-(\d{2})-(\d{2})T(\d{2}):(\d{2})/);
  if (!m) return rfc3339;
  return `${m[1]}-${m[2]} ${m[3]}:${m[4]}`;
}

export function fmtEnergy(kwh: number): string {
  return `${fmt(kwh, 1)} kWh`;
}
