/**
 * Design-session state machine.
 *
 * Holds the ViewerScene model (mesh buffers, stretch channel, active
 * tool, timeline position) and serializes mutating commands: at most one
 * is in flight, later submissions queue behind it. The session holds no
 * simulation logic; every displayed number comes from an engine snapshot.
 */

import type { StudioApi } from './api'
import { FrameStream } from './events'
import type {
  EngineEvent,
  FrameSnapshot,
  MeshBuffer,
  ToolResult,
} from './types'

export type ToolName =
  | 'boundary'
  | 'region'
  | 'extend'
  | 'paint'
  | 'offset'
  | 'pin'
  | 'seam'

export interface ViewerScene {
  avatar: MeshBuffer | null
  garment: MeshBuffer | null
  stretch: number[] | null
  maxStretch: number | null
  passIndex: number
  activeTool: ToolName | null
  timeline: number
  boundaryClicks: number[]
  message: string | null
}

export class StudioSession {
  readonly scene: ViewerScene = {
    avatar: null,
    garment: null,
    stretch: null,
    maxStretch: null,
    passIndex: -1,
    activeTool: null,
    timeline: 0,
    boundaryClicks: [],
    message: null,
  }

  private pending: Promise<unknown> = Promise.resolve()

  constructor(
    readonly api: StudioApi,
    readonly stream?: FrameStream
  ) {
    stream?.onEvent((e) => this.applyEvent(e))
  }

  /** Serialize mutating commands: one in flight, the rest queued. */
  private enqueue<T>(fn: () => Promise<T>): Promise<T> {
    const next = this.pending.then(fn, fn)
    this.pending = next.catch(() => undefined)
    return next
  }

  applyEvent(event: EngineEvent): void {
    if (event.type === 'frame') {
      this.applyFrame(event as FrameSnapshot)
    } else if (event.type === 'adapt_pass') {
      this.scene.passIndex = Math.max(this.scene.passIndex, event.pass_index)
    }
  }

  private applyFrame(frame: FrameSnapshot): void {
    if (!frame.garment) return
    if (frame.pass_index < this.scene.passIndex) return // stale
    this.scene.stretch = frame.stretch ?? null
    this.scene.maxStretch = frame.max_stretch ?? null
    this.scene.passIndex = frame.pass_index
    if (frame.pose) this.scene.timeline = frame.pose.t
    if (frame.positions && this.scene.garment) {
      const flat = this.scene.garment.positions
      const pos = frame.positions
      if (pos.length * 3 === flat.length) {
        for (let i = 0; i < pos.length; i++) {
          flat[3 * i] = pos[i][0]
          flat[3 * i + 1] = pos[i][1]
          flat[3 * i + 2] = pos[i][2]
        }
      }
    }
  }

  async loadMeshes(): Promise<void> {
    this.scene.avatar = await this.api.getMesh('body')
    try {
      this.scene.garment = await this.api.getMesh('sim')
    } catch {
      this.scene.garment = null // no garment yet
    }
  }

  selectTool(tool: ToolName | null): void {
    this.scene.activeTool = tool
    this.scene.boundaryClicks = []
  }

  /** Accumulate a boundary click; returns the click count so far. */
  addBoundaryClick(vertex: number): number {
    this.scene.boundaryClicks.push(vertex)
    return this.scene.boundaryClicks.length
  }

  /** Close the boundary from accumulated clicks (needs >= 3). */
  submitBoundary(): Promise<ToolResult> {
    const clicks = [...this.scene.boundaryClicks]
    if (clicks.length < 3) {
      return Promise.reject(new Error('a boundary needs at least 3 clicks'))
    }
    this.scene.boundaryClicks = []
    return this.submitTool('boundary', { vertices: clicks })
  }

  submitTool(
    name: ToolName,
    body: Record<string, unknown>
  ): Promise<ToolResult> {
    return this.enqueue(async () => {
      try {
        const out = await this.api.tool(name, body)
        this.scene.message = null
        await this.refreshGarment()
        return out
      } catch (err) {
        this.scene.message = err instanceof Error ? err.message : String(err)
        throw err
      }
    })
  }

  runAdaptation() {
    return this.enqueue(async () => {
      const out = await this.api.adaptRun()
      await this.refreshGarment()
      return out
    })
  }

  /** Scrub the pose timeline; the engine owns interpolation. */
  setActivePose(index: number) {
    return this.enqueue(async () => {
      const out = await this.api.setActivePose(index)
      this.scene.timeline = 0
      await this.loadMeshes()
      return out
    })
  }

  private async refreshGarment(): Promise<void> {
    try {
      this.scene.garment = await this.api.getMesh('sim')
      const frame = await this.api.getFrame()
      this.applyFrame(frame)
    } catch {
      /* garment may not exist yet */
    }
  }
}
