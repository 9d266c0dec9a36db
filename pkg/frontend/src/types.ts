/** Shared protocol types for the garmentfit design service. */

export interface PoseInfo {
  names: string[]
  count: number
  active: number
  steps_per_transition: number
}

export interface PoseRef {
  a: number
  b: number
  t: number
}

export interface PassStats {
  pass_index: number
  max_stretch_before: number
  max_stretch_after: number
  clipped: number
  arap_iterations: number
  arap_residual: number
}

export interface FrameSnapshot {
  type: 'frame'
  garment: boolean
  positions?: number[][]
  rest_positions?: number[][]
  stretch?: number[]
  max_stretch?: number
  pose?: PoseRef
  pass_index: number
  pass_stats?: PassStats | null
}

export interface AdaptPassEvent extends PassStats {
  type: 'adapt_pass'
}

export interface AdaptDoneEvent {
  type: 'adapt_done'
  converged: boolean
  passes: number
  max_stretch: number | null
}

export type EngineEvent = FrameSnapshot | AdaptPassEvent | AdaptDoneEvent

export interface AdaptResult {
  converged: boolean
  passes: number
  report: PassStats[]
}

export interface ToolResult {
  ok: boolean
  log_index: number
  boundary_id?: number
  n_vertices?: number
  n_faces?: number
}

export interface ProjectDoc {
  version: number
  pose_manifest: string
  commands: Record<string, unknown>[]
  params: Record<string, number | number[]>
  schedule: number[]
  runner: Record<string, number>
  export: Record<string, unknown>
}

/** Decoded binary mesh frame: <u32 nv><u32 nf><f32 xyz*nv><u32 ijk*nf>. */
export interface MeshBuffer {
  positions: Float32Array
  indices: Uint32Array
  vertexCount: number
  faceCount: number
}
