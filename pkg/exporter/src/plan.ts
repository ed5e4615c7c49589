/**
 * Translates a TensorFlow.js LayersModel into an archive export plan.
 *
 * The engine stores images channels-first while tfjs layers run
 * channels-last, so conv kernels are transposed to [K, C, kh, kw] and the
 * first dense kernel after a flatten has its input rows re-ordered from
 * (h, w, c) indexing to (c, h, w). Anything the engine's six layer kinds
 * cannot express is refused by name.
 */

import * as tf from '@tensorflow/tfjs'

import { ExportPlan, PlannedBlob, PlannedLayer } from './archive'

export class UnsupportedLayerError extends Error {}

type FeatureShape = { kind: 'map'; h: number; w: number; c: number } | { kind: 'vec'; n: number }

function asPair(value: number | number[]): [number, number] {
  return Array.isArray(value) ? [value[0], value[1]] : [value, value]
}

function refuse(layerName: string, reason: string): never {
  throw new UnsupportedLayerError(`layer "${layerName}": ${reason}`)
}

function blobFrom(tensor: tf.Tensor): PlannedBlob {
  return { shape: tensor.shape.slice(), data: tensor.dataSync() as Float32Array }
}

/** Reorder dense kernel rows from channels-last to channels-first flattening. */
export function permuteDenseRows(
  kernel: Float32Array,
  units: number,
  h: number,
  w: number,
  c: number,
): Float32Array {
  const out = new Float32Array(kernel.length)
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      for (let ch = 0; ch < c; ch++) {
        const tfRow = (y * w + x) * c + ch
        const engineRow = (ch * h + y) * w + x
        out.set(kernel.subarray(tfRow * units, (tfRow + 1) * units), engineRow * units)
      }
    }
  }
  return out
}

function activationName(layer: tf.layers.Layer): string {
  const config = layer.getConfig() as { activation?: unknown }
  const act = config.activation
  if (act == null) return 'linear'
  if (typeof act === 'string') return act
  return String((act as { constructor: { name: string } }).constructor?.name ?? act).toLowerCase()
}

export function planFromModel(model: tf.LayersModel, classLabels?: string[]): ExportPlan {
  const inputShape = model.inputs[0].shape // [null, H, W, C] or [null, n]
  let current: FeatureShape
  if (inputShape.length === 4) {
    current = { kind: 'map', h: inputShape[1]!, w: inputShape[2]!, c: inputShape[3]! }
  } else if (inputShape.length === 2) {
    // flat sources become [n,1,1] images; the synthetic flatten is a no-op
    current = { kind: 'map', h: 1, w: 1, c: inputShape[1]! }
  } else {
    throw new UnsupportedLayerError(`model input rank ${inputShape.length} is not supported`)
  }
  const engineInput: [number, number, number] = [current.c, current.h, current.w]

  const planned: PlannedLayer[] = []
  // set after a flatten (implicit or explicit) straddling a spatial map
  let pendingPermutation: { h: number; w: number; c: number } | null = null

  const emitFlatten = (name: string) => {
    if (current.kind === 'map') {
      pendingPermutation = { h: current.h, w: current.w, c: current.c }
      planned.push({ name, kind: 'flatten', hyperparams: {} })
      current = { kind: 'vec', n: pendingPermutation.h * pendingPermutation.w * pendingPermutation.c }
    }
  }

  const emitActivation = (layer: tf.layers.Layer, isLast: boolean) => {
    const act = activationName(layer)
    if (act === 'linear') return
    if (act === 'relu') {
      planned.push({ name: `${layer.name}_relu`, kind: 'relu', hyperparams: {} })
      return
    }
    if (act === 'softmax' && isLast) {
      // the engine works on logits; a trailing softmax is dropped
      console.warn(`dropping trailing softmax of layer "${layer.name}" (engine emits logits)`)
      return
    }
    refuse(layer.name, `activation "${act}" is not expressible`)
  }

  const realLayers = model.layers.filter(l => l.getClassName() !== 'InputLayer')
  realLayers.forEach((layer, index) => {
    const className = layer.getClassName()
    const isLast = index === realLayers.length - 1
    switch (className) {
      case 'Flatten': {
        emitFlatten(layer.name)
        break
      }
      case 'Dense': {
        if (current.kind === 'map') emitFlatten(`${layer.name}_flatten`)
        if (current.kind !== 'vec') refuse(layer.name, 'dense needs a flat input')
        const [kernel, bias] = layer.getWeights()
        const [nIn, units] = kernel.shape as [number, number]
        if (nIn !== current.n) refuse(layer.name, `expects ${nIn} inputs, graph carries ${current.n}`)
        let data = kernel.dataSync() as Float32Array
        if (pendingPermutation && (pendingPermutation.h > 1 || pendingPermutation.w > 1)) {
          const { h, w, c } = pendingPermutation
          data = permuteDenseRows(data, units, h, w, c)
        }
        pendingPermutation = null
        const plannedLayer: PlannedLayer = {
          name: layer.name,
          kind: 'dense',
          hyperparams: {},
          weights: { shape: [nIn, units], data },
        }
        if (bias) plannedLayer.bias = blobFrom(bias)
        planned.push(plannedLayer)
        current = { kind: 'vec', n: units }
        emitActivation(layer, isLast)
        break
      }
      case 'Conv2D': {
        if (current.kind !== 'map') refuse(layer.name, 'convolution needs a spatial input')
        const config = layer.getConfig() as unknown as {
          kernelSize: number | number[]
          strides: number | number[]
          padding: string
          dataFormat: string
          dilationRate: number | number[]
        }
        if (config.dataFormat !== 'channelsLast') refuse(layer.name, 'only channels-last sources')
        const [kh, kw] = asPair(config.kernelSize)
        const [sh, sw] = asPair(config.strides)
        const [dh, dw] = asPair(config.dilationRate ?? 1)
        if (dh !== 1 || dw !== 1) refuse(layer.name, 'dilation is not expressible')
        if (sh !== sw) refuse(layer.name, 'anisotropic strides are not expressible')
        let padding: number
        if (config.padding === 'valid') {
          padding = 0
        } else if (config.padding === 'same' && sh === 1 && kh === kw && kh % 2 === 1) {
          padding = (kh - 1) / 2
        } else {
          refuse(layer.name, `padding "${config.padding}" with stride ${sh} is not expressible`)
        }
        const [kernel, bias] = layer.getWeights()
        const filters = kernel.shape[3]!
        // [kh, kw, C, K] -> [K, C, kh, kw]
        const transposed = tf.transpose(kernel, [3, 2, 0, 1])
        const plannedLayer: PlannedLayer = {
          name: layer.name,
          kind: 'conv2d',
          hyperparams: { stride: sh, padding },
          weights: blobFrom(transposed),
        }
        transposed.dispose()
        if (bias) plannedLayer.bias = blobFrom(bias)
        planned.push(plannedLayer)
        const hOut = Math.floor((current.h + 2 * padding - kh) / sh) + 1
        const wOut = Math.floor((current.w + 2 * padding - kw) / sh) + 1
        current = { kind: 'map', h: hOut, w: wOut, c: filters }
        emitActivation(layer, isLast)
        break
      }
      case 'MaxPooling2D': {
        if (current.kind !== 'map') refuse(layer.name, 'pooling needs a spatial input')
        const config = layer.getConfig() as unknown as {
          poolSize: number | number[]
          strides: number | number[]
          padding: string
        }
        const [ph, pw] = asPair(config.poolSize)
        const [sh, sw] = asPair(config.strides ?? config.poolSize)
        if (config.padding !== 'valid') refuse(layer.name, 'padded pooling is not expressible')
        if (ph !== pw || sh !== sw) refuse(layer.name, 'non-square pooling is not expressible')
        planned.push({ name: layer.name, kind: 'maxpool2d', hyperparams: { window: ph, stride: sh } })
        current = {
          kind: 'map',
          h: Math.floor((current.h - ph) / sh) + 1,
          w: Math.floor((current.w - pw) / sw) + 1,
          c: current.c,
        }
        break
      }
      case 'Dropout': {
        const config = layer.getConfig() as unknown as { rate: number }
        planned.push({
          name: layer.name,
          kind: 'dropout',
          hyperparams: { keep_prob: 1 - config.rate },
        })
        break
      }
      case 'Activation': {
        emitActivation(layer, isLast)
        break
      }
      case 'ReLU': {
        planned.push({ name: layer.name, kind: 'relu', hyperparams: {} })
        break
      }
      default:
        refuse(layer.name, `layer kind "${className}" is not expressible`)
    }
  })

  return { inputShape: engineInput, layers: planned, classLabels: classLabels ?? null }
}
