import { describe, expect, it } from 'vitest'
import { decodeMeshBuffer, meshBounds } from '../src/mesh'

function encode(positions: number[][], faces: number[][]): ArrayBuffer {
  const nv = positions.length
  const nf = faces.length
  const buf = new ArrayBuffer(8 + 12 * nv + 12 * nf)
  const view = new DataView(buf)
  view.setUint32(0, nv, true)
  view.setUint32(4, nf, true)
  const pos = new Float32Array(buf, 8, 3 * nv)
  positions.forEach((p, i) => pos.set(p, 3 * i))
  const idx = new Uint32Array(buf, 8 + 12 * nv, 3 * nf)
  faces.forEach((f, i) => idx.set(f, 3 * i))
  return buf
}

const QUAD = {
  positions: [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
  ],
  faces: [
    [0, 1, 2],
    [0, 2, 3],
  ],
}

describe('decodeMeshBuffer', () => {
  it('decodes header, positions, and indices', () => {
    const mesh = decodeMeshBuffer(encode(QUAD.positions, QUAD.faces))
    expect(mesh.vertexCount).toBe(4)
    expect(mesh.faceCount).toBe(2)
    expect(Array.from(mesh.positions.slice(3, 6))).toEqual([1, 0, 0])
    expect(Array.from(mesh.indices)).toEqual([0, 1, 2, 0, 2, 3])
  })

  it('rejects truncated frames', () => {
    expect(() => decodeMeshBuffer(new ArrayBuffer(4))).toThrow(/too short/)
    const full = encode(QUAD.positions, QUAD.faces)
    expect(() => decodeMeshBuffer(full.slice(0, full.byteLength - 4))).toThrow(
      /mismatch/
    )
  })

  it('computes bounds', () => {
    const mesh = decodeMeshBuffer(encode(QUAD.positions, QUAD.faces))
    const { min, max } = meshBounds(mesh)
    expect(min).toEqual([0, 0, 0])
    expect(max).toEqual([1, 1, 0])
  })
})
