/**
 * Cross-implementation verification: random probes through the source
 * tfjs model (dropout inactive) and through the engine's deterministic
 * predictor must produce matching logits.
 */

import * as tf from '@tensorflow/tfjs'
import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'

import { readManifest } from './archive'
import { enginePredict } from './engine'
import { writeTensorDump } from './mcrt'

export class VerificationError extends Error {}

export interface VerifyReport {
  probes: number
  maxDeviation: number
  deviations: number[]
}

/** Deterministic 32-bit PRNG so probe sets are reproducible. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function chwToHwc(chw: Float32Array, c: number, h: number, w: number): Float32Array {
  const hwc = new Float32Array(chw.length)
  for (let ch = 0; ch < c; ch++) {
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        hwc[(y * w + x) * c + ch] = chw[(ch * h + y) * w + x]
      }
    }
  }
  return hwc
}

function sourceLogits(model: tf.LayersModel, hwc: Float32Array, h: number, w: number, c: number) {
  return tf.tidy(() => {
    const rank = model.inputs[0].shape.length
    const input =
      rank === 2 ? tf.tensor2d(hwc, [1, h * w * c]) : tf.tensor4d(hwc, [1, h, w, c])
    const out = model.predict(input) as tf.Tensor
    return Array.from(out.dataSync())
  })
}

export interface VerifyOptions {
  probes?: number
  seed?: number
  tolerance?: number
  /** include an all-zero probe (bias-only forward) as probe 0 */
  includeZeroProbe?: boolean
}

export function verifyExport(
  model: tf.LayersModel,
  archiveDir: string,
  options: VerifyOptions = {},
): VerifyReport {
  const { probes = 10, seed = 1234, tolerance = 1e-3, includeZeroProbe = false } = options
  const [c, h, w] = readManifest(archiveDir).input_shape
  const rand = mulberry32(seed)
  const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'mcrp-verify-'))
  const deviations: number[] = []
  try {
    for (let p = 0; p < probes; p++) {
      const chw = new Float32Array(c * h * w)
      if (!(includeZeroProbe && p === 0)) {
        for (let i = 0; i < chw.length; i++) chw[i] = Math.fround(rand())
      }
      const probePath = path.join(tmp, `probe${p}.mcrt`)
      writeTensorDump(probePath, [c, h, w], chw)
      const engine = enginePredict(archiveDir, probePath)
      const source = sourceLogits(model, chwToHwc(chw, c, h, w), h, w, c)
      if (source.length !== engine.logits.length) {
        throw new VerificationError(
          `probe ${p}: source emits ${source.length} logits, engine ${engine.logits.length}`,
        )
      }
      let dev = 0
      for (let i = 0; i < source.length; i++) {
        dev = Math.max(dev, Math.abs(source[i] - engine.logits[i]))
      }
      deviations.push(dev)
    }
  } finally {
    fs.rmSync(tmp, { recursive: true, force: true })
  }
  const maxDeviation = Math.max(...deviations)
  if (maxDeviation > tolerance) {
    throw new VerificationError(
      `max logit deviation ${maxDeviation.toExponential(3)} exceeds tolerance ${tolerance}`,
    )
  }
  return { probes, maxDeviation, deviations }
}
