/**
 * WebSocket event stream with auto-reconnect and stale-frame dropping.
 *
 * Frames are applied in arrival order; a frame whose pass index is older
 * than the newest seen is discarded so a late snapshot can never roll the
 * heatmap backwards while adaptation runs. On disconnect the stream
 * reconnects with backoff and keeps the last-seen pass index.
 */

import type { EngineEvent, FrameSnapshot } from './types'

export interface FrameStreamOptions {
  reconnectDelayMs?: number
  maxReconnectDelayMs?: number
  webSocketFactory?: (url: string) => WebSocket
}

type Listener = (event: EngineEvent) => void

export class FrameStream {
  lastPassIndex = -1
  private listeners = new Set<Listener>()
  private ws: WebSocket | null = null
  private closed = false
  private delay: number
  private readonly baseDelay: number
  private readonly maxDelay: number
  private readonly factory: (url: string) => WebSocket

  constructor(
    readonly url: string,
    opts: FrameStreamOptions = {}
  ) {
    this.baseDelay = opts.reconnectDelayMs ?? 250
    this.maxDelay = opts.maxReconnectDelayMs ?? 5000
    this.delay = this.baseDelay
    this.factory = opts.webSocketFactory ?? ((u) => new WebSocket(u))
  }

  onEvent(fn: Listener): () => void {
    this.listeners.add(fn)
    return () => this.listeners.delete(fn)
  }

  connect(): void {
    if (this.closed) return
    const ws = this.factory(this.url)
    this.ws = ws
    ws.onopen = () => {
      this.delay = this.baseDelay
    }
    ws.onmessage = (msg: MessageEvent) => {
      let event: EngineEvent
      try {
        event = JSON.parse(String(msg.data)) as EngineEvent
      } catch {
        return
      }
      this.dispatch(event)
    }
    ws.onclose = () => this.scheduleReconnect()
    ws.onerror = () => ws.close()
  }

  /** Feed one already-parsed event (used by tests and replays). */
  dispatch(event: EngineEvent): void {
    if (event.type === 'frame') {
      const frame = event as FrameSnapshot
      if (frame.pass_index < this.lastPassIndex) return // stale
      this.lastPassIndex = Math.max(this.lastPassIndex, frame.pass_index)
    } else if (event.type === 'adapt_pass') {
      this.lastPassIndex = Math.max(this.lastPassIndex, event.pass_index)
    }
    for (const fn of this.listeners) fn(event)
  }

  private scheduleReconnect(): void {
    if (this.closed) return
    setTimeout(() => this.connect(), this.delay)
    this.delay = Math.min(this.delay * 2, this.maxDelay)
  }

  close(): void {
    this.closed = true
    this.ws?.close()
  }
}
