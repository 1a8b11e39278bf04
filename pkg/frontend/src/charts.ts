// SVG band rendering for min/max envelope series. Pure string output so it
// is testable without a DOM.

import type { MinMax } from "./types.js";

export interface ChartScale {
  width: number;
  height: number;
  yMin: number;
  yMax: number;
}

function yPixel(value: number, scale: ChartScale): number {
  const span = scale.yMax - scale.yMin || 1;
  return scale.height - ((value - scale.yMin) / span) * scale.height;
}

// A closed band: the max edge left-to-right, then the min edge back.
export function envelopePath(pairs: MinMax[], scale: ChartScale): string {
  if (pairs.length === 0) return "";
  const step = scale.width / pairs.length;
  const x = (i: number) => (i + 0.5) * step;
  const top = pairs.map(
    ([, hi], i) => `${i === 0 ? "M" : "L"}${x(i).toFixed(2)},${yPixel(hi, scale).toFixed(2)}`,
  );
  const bottom = [...pairs]
    .map(([lo], i) => ({ lo, i }))
    .reverse()
    .map(({ lo, i }) => `L${x(i).toFixed(2)},${yPixel(lo, scale).toFixed(2)}`);
  return `${top.join(" ")} ${bottom.join(" ")} Z`;
}

export function gapRects(
  gaps: Array<{ onset: number; duration: number }>,
  windowStart: number,
  windowSeconds: number,
  scale: ChartScale,
): Array<{ x: number; width: number }> {
  const rects: Array<{ x: number; width: number }> = [];
  for (const gap of gaps) {
    const left = Math.max(gap.onset, windowStart);
    const right = Math.min(gap.onset + gap.duration, windowStart + windowSeconds);
    if (right <= left) continue;
    rects.push({
      x: ((left - windowStart) / windowSeconds) * scale.width,
      width: ((right - left) / windowSeconds) * scale.width,
    });
  }
  return rects;
}
