export { StudioApi, ApiError } from './api'
export { FrameStream } from './events'
export { StudioSession } from './session'
export type { ViewerScene, ToolName } from './session'
export { decodeMeshBuffer, meshBounds } from './mesh'
export { pickVertex } from './picking'
export type { Ray, PickHit } from './picking'
export { stretchColor, stretchColors } from './heatmap'
export { createViewer } from './viewer'
export type * from './types'
