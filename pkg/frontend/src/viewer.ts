/**
 * three.js viewer binding for the design studio.
 *
 * Renders the avatar and garment buffers from a StudioSession scene,
 * applies the stretch heatmap as per-face vertex colors, and converts
 * pointer events into picking rays for the boundary tool.
 */

import * as THREE from 'three'
import { OrbitControls } from 'three/examples/jsm/controls/OrbitControls.js'
import { stretchColor } from './heatmap'
import type { Ray } from './picking'
import type { MeshBuffer } from './types'
import type { ViewerScene } from './session'

export interface StudioViewer {
  render: () => void
  update: (scene: ViewerScene, delta: number) => void
  rayFromPointer: (clientX: number, clientY: number) => Ray
  markVertex: (mesh: MeshBuffer, vertex: number) => void
  clearMarkers: () => void
  dispose: () => void
}

function toGeometry(mesh: MeshBuffer): THREE.BufferGeometry {
  // de-indexed so per-face colors stay flat across faces
  const geo = new THREE.BufferGeometry()
  const n = mesh.faceCount * 3
  const pos = new Float32Array(n * 3)
  for (let i = 0; i < n; i++) {
    const v = mesh.indices[i]
    pos[3 * i] = mesh.positions[3 * v]
    pos[3 * i + 1] = mesh.positions[3 * v + 1]
    pos[3 * i + 2] = mesh.positions[3 * v + 2]
  }
  geo.setAttribute('position', new THREE.BufferAttribute(pos, 3))
  geo.computeVertexNormals()
  return geo
}

export function createViewer(container: HTMLElement): StudioViewer {
  const renderer = new THREE.WebGLRenderer({ antialias: true })
  renderer.setPixelRatio(Math.min(window.devicePixelRatio, 2))
  renderer.setSize(container.clientWidth, container.clientHeight)
  renderer.setClearColor(0x1a1d24)
  container.appendChild(renderer.domElement)

  const scene3 = new THREE.Scene()
  const camera = new THREE.PerspectiveCamera(
    45,
    container.clientWidth / Math.max(1, container.clientHeight),
    0.001,
    100
  )
  camera.position.set(0.4, 0.25, 0.5)
  const controls = new OrbitControls(camera, renderer.domElement)
  controls.enableDamping = true

  scene3.add(new THREE.HemisphereLight(0xffffff, 0x303040, 0.9))
  const dir = new THREE.DirectionalLight(0xffffff, 0.8)
  dir.position.set(1, 2, 1.5)
  scene3.add(dir)

  const avatarMat = new THREE.MeshStandardMaterial({
    color: 0x8a93a5,
    roughness: 0.85,
  })
  const garmentMat = new THREE.MeshStandardMaterial({
    vertexColors: true,
    roughness: 0.6,
    side: THREE.DoubleSide,
  })

  let avatarMesh: THREE.Mesh | null = null
  let garmentMesh: THREE.Mesh | null = null
  let lastAvatar: MeshBuffer | null = null
  let lastGarment: MeshBuffer | null = null
  const markers = new THREE.Group()
  scene3.add(markers)

  function applyHeatmap(geo: THREE.BufferGeometry, stretch: number[], delta: number) {
    const n = stretch.length * 3
    const colors = new Float32Array(n * 3)
    for (let f = 0; f < stretch.length; f++) {
      const c = stretchColor(stretch[f], delta)
      for (let k = 0; k < 3; k++) {
        colors[9 * f + 3 * k] = c.r
        colors[9 * f + 3 * k + 1] = c.g
        colors[9 * f + 3 * k + 2] = c.b
      }
    }
    geo.setAttribute('color', new THREE.BufferAttribute(colors, 3))
  }

  return {
    render() {
      controls.update()
      renderer.render(scene3, camera)
    },

    update(scene: ViewerScene, delta: number) {
      if (scene.avatar && scene.avatar !== lastAvatar) {
        if (avatarMesh) scene3.remove(avatarMesh)
        avatarMesh = new THREE.Mesh(toGeometry(scene.avatar), avatarMat)
        scene3.add(avatarMesh)
        lastAvatar = scene.avatar
      }
      if (scene.garment) {
        if (scene.garment !== lastGarment) {
          if (garmentMesh) scene3.remove(garmentMesh)
          garmentMesh = new THREE.Mesh(toGeometry(scene.garment), garmentMat)
          scene3.add(garmentMesh)
          lastGarment = scene.garment
        } else if (garmentMesh) {
          // positions mutate in place during playback
          const geo = garmentMesh.geometry
          const attr = geo.getAttribute('position') as THREE.BufferAttribute
          const arr = attr.array as Float32Array
          const m = scene.garment
          for (let i = 0; i < m.faceCount * 3; i++) {
            const v = m.indices[i]
            arr[3 * i] = m.positions[3 * v]
            arr[3 * i + 1] = m.positions[3 * v + 1]
            arr[3 * i + 2] = m.positions[3 * v + 2]
          }
          attr.needsUpdate = true
          geo.computeVertexNormals()
        }
        if (garmentMesh && scene.stretch) {
          applyHeatmap(garmentMesh.geometry, scene.stretch, delta)
        }
      }
    },

    rayFromPointer(clientX: number, clientY: number): Ray {
      const rect = renderer.domElement.getBoundingClientRect()
      const ndc = new THREE.Vector2(
        ((clientX - rect.left) / rect.width) * 2 - 1,
        -((clientY - rect.top) / rect.height) * 2 + 1
      )
      const caster = new THREE.Raycaster()
      caster.setFromCamera(ndc, camera)
      const o = caster.ray.origin
      const d = caster.ray.direction
      return { origin: [o.x, o.y, o.z], direction: [d.x, d.y, d.z] }
    },

    markVertex(mesh: MeshBuffer, vertex: number) {
      const s = new THREE.Mesh(
        new THREE.SphereGeometry(0.004, 12, 12),
        new THREE.MeshBasicMaterial({ color: 0xffa500 })
      )
      s.position.set(
        mesh.positions[3 * vertex],
        mesh.positions[3 * vertex + 1],
        mesh.positions[3 * vertex + 2]
      )
      markers.add(s)
    },

    clearMarkers() {
      markers.clear()
    },

    dispose() {
      renderer.dispose()
      container.removeChild(renderer.domElement)
    },
  }
}
