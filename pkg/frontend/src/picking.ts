/**
 * Ray-cast vertex picking against a decoded mesh buffer.
 *
 * Pure math (no renderer dependency) so headless tests can replay
 * recorded clicks deterministically.
 */

import type { MeshBuffer } from './types'

export interface Ray {
  origin: [number, number, number]
  direction: [number, number, number]
}

export interface PickHit {
  face: number
  vertex: number
  point: [number, number, number]
  distance: number
}

function sub(a: number[], b: number[]): number[] {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

function cross(a: number[], b: number[]): number[] {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ]
}

function dot(a: number[], b: number[]): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

function vertexAt(mesh: MeshBuffer, v: number): number[] {
  return [
    mesh.positions[3 * v],
    mesh.positions[3 * v + 1],
    mesh.positions[3 * v + 2],
  ]
}

/**
 * Closest ray/mesh intersection, mapped to the nearest vertex of the
 * hit face (Moller-Trumbore per face; misses return null).
 */
export function pickVertex(ray: Ray, mesh: MeshBuffer): PickHit | null {
  const EPS = 1e-12
  let best: PickHit | null = null
  for (let f = 0; f < mesh.faceCount; f++) {
    const i0 = mesh.indices[3 * f]
    const i1 = mesh.indices[3 * f + 1]
    const i2 = mesh.indices[3 * f + 2]
    const p0 = vertexAt(mesh, i0)
    const e1 = sub(vertexAt(mesh, i1), p0)
    const e2 = sub(vertexAt(mesh, i2), p0)
    const h = cross(ray.direction as unknown as number[], e2)
    const det = dot(e1, h)
    if (Math.abs(det) < EPS) continue
    const inv = 1.0 / det
    const s = sub(ray.origin as unknown as number[], p0)
    const u = inv * dot(s, h)
    if (u < 0 || u > 1) continue
    const q = cross(s, e1)
    const v = inv * dot(ray.direction as unknown as number[], q)
    if (v < 0 || u + v > 1) continue
    const t = inv * dot(e2, q)
    if (t <= EPS) continue
    if (best !== null && t >= best.distance) continue
    const w = 1 - u - v
    // nearest face corner by barycentric weight
    const corners = [i0, i1, i2]
    const weights = [w, u, v]
    let vi = 0
    for (let k = 1; k < 3; k++) if (weights[k] > weights[vi]) vi = k
    const o = ray.origin
    const d = ray.direction
    best = {
      face: f,
      vertex: corners[vi],
      point: [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]],
      distance: t,
    }
  }
  return best
}
