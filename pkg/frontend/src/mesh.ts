import type { MeshBuffer } from './types'

/** Decode the service's binary mesh frame (little-endian). */
export function decodeMeshBuffer(raw: ArrayBuffer): MeshBuffer {
  if (raw.byteLength < 8) {
    throw new Error(`mesh frame too short: ${raw.byteLength} bytes`)
  }
  const head = new DataView(raw)
  const vertexCount = head.getUint32(0, true)
  const faceCount = head.getUint32(4, true)
  const expected = 8 + 12 * vertexCount + 12 * faceCount
  if (raw.byteLength !== expected) {
    throw new Error(
      `mesh frame size mismatch: got ${raw.byteLength}, expected ${expected}`
    )
  }
  const positions = new Float32Array(raw, 8, 3 * vertexCount)
  const indices = new Uint32Array(raw, 8 + 12 * vertexCount, 3 * faceCount)
  return { positions, indices, vertexCount, faceCount }
}

/** Axis-aligned bounds of a decoded mesh, for camera framing. */
export function meshBounds(mesh: MeshBuffer): { min: number[]; max: number[] } {
  const min = [Infinity, Infinity, Infinity]
  const max = [-Infinity, -Infinity, -Infinity]
  const p = mesh.positions
  for (let i = 0; i < p.length; i += 3) {
    for (let k = 0; k < 3; k++) {
      if (p[i + k] < min[k]) min[k] = p[i + k]
      if (p[i + k] > max[k]) max[k] = p[i + k]
    }
  }
  return { min, max }
}
