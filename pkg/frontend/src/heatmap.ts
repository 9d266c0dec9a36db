/**
 * Per-face stretch coloring.
 *
 * Fixed scale anchored at the stretch threshold so colors are stable
 * across frames: compression (sigma < 1) shades green, sigma = 1 is
 * yellow-neutral, and the red channel saturates at 1 + 2*delta.
 */

export interface RGB {
  r: number
  g: number
  b: number
}

const NEUTRAL: RGB = { r: 0.92, g: 0.88, b: 0.45 }
const GREEN: RGB = { r: 0.2, g: 0.75, b: 0.3 }
const RED: RGB = { r: 0.9, g: 0.12, b: 0.1 }

function lerp(a: RGB, b: RGB, t: number): RGB {
  return {
    r: a.r + (b.r - a.r) * t,
    g: a.g + (b.g - a.g) * t,
    b: a.b + (b.b - a.b) * t,
  }
}

/** Map one principal stretch value to a color at threshold delta. */
export function stretchColor(sigma: number, delta: number): RGB {
  if (!Number.isFinite(sigma)) return NEUTRAL
  if (sigma <= 1.0) {
    // full green at 20% compression
    const t = Math.min((1.0 - sigma) / 0.2, 1.0)
    return lerp(NEUTRAL, GREEN, t)
  }
  const t = Math.min((sigma - 1.0) / (2 * delta), 1.0)
  return lerp(NEUTRAL, RED, t)
}

/** Flat per-face RGB array (3 floats per face) for mesh coloring. */
export function stretchColors(stretch: number[], delta: number): Float32Array {
  const out = new Float32Array(3 * stretch.length)
  for (let i = 0; i < stretch.length; i++) {
    const c = stretchColor(stretch[i], delta)
    out[3 * i] = c.r
    out[3 * i + 1] = c.g
    out[3 * i + 2] = c.b
  }
  return out
}
