/** Typed HTTP client for the design service. */

import { decodeMeshBuffer } from './mesh'
import type {
  AdaptResult,
  FrameSnapshot,
  MeshBuffer,
  PoseInfo,
  ProjectDoc,
  ToolResult,
} from './types'

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string
  ) {
    super(`HTTP ${status}: ${detail}`)
  }
}

export class StudioApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init)
    if (!resp.ok) {
      let detail = resp.statusText
      try {
        const doc = await resp.json()
        if (typeof doc.detail === 'string') detail = doc.detail
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, detail)
    }
    return (await resp.json()) as T
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.json<T>(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: body === undefined ? '{}' : JSON.stringify(body),
    })
  }

  getPoses(): Promise<PoseInfo> {
    return this.json('/poses')
  }

  setActivePose(index: number): Promise<{ active: number }> {
    return this.post('/poses/active', { index })
  }

  tool(name: string, body: Record<string, unknown>): Promise<ToolResult> {
    return this.post(`/tool/${name}`, body)
  }

  simStart(): Promise<{ running: boolean }> {
    return this.post('/sim/start')
  }

  simPause(): Promise<{ running: boolean }> {
    return this.post('/sim/pause')
  }

  simReset(): Promise<{ running: boolean }> {
    return this.post('/sim/reset')
  }

  adaptRun(): Promise<AdaptResult> {
    return this.post('/adapt/run')
  }

  getFrame(): Promise<FrameSnapshot> {
    return this.json('/sim/frame')
  }

  getProject(): Promise<ProjectDoc> {
    return this.json('/project')
  }

  postProject(doc: Partial<ProjectDoc>): Promise<{ ok: boolean }> {
    return this.post('/project', doc)
  }

  async getMesh(which: 'body' | 'rest' | 'sim'): Promise<MeshBuffer> {
    const resp = await this.fetchFn(`${this.baseUrl}/mesh/${which}`)
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText)
    return decodeMeshBuffer(await resp.arrayBuffer())
  }
}
