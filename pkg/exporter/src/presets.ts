/**
 * Built-in source models: two seeded desk-scale networks for verification
 * runs, and the canonical 16-weight-layer VGG-16 stack (13 conv + 3 dense,
 * dropout after the first two fully-connected layers, 224x224x3 input).
 */

import * as tf from '@tensorflow/tfjs'

export interface PresetInfo {
  build: (seed?: number) => tf.LayersModel
  classLabels: (model: tf.LayersModel) => string[]
}

function initializers(seed: number) {
  return {
    kernelInitializer: tf.initializers.glorotUniform({ seed }),
    biasInitializer: tf.initializers.randomUniform({ minval: -0.1, maxval: 0.1, seed: seed + 1 }),
  }
}

export function buildTinyMlp(seed = 7): tf.LayersModel {
  const model = tf.sequential()
  model.add(tf.layers.flatten({ inputShape: [4, 4, 1] }))
  model.add(tf.layers.dense({ units: 8, activation: 'relu', name: 'fc1', ...initializers(seed) }))
  model.add(tf.layers.dense({ units: 3, name: 'fc2', ...initializers(seed + 10) }))
  return model
}

export function buildTinyCnn(seed = 11): tf.LayersModel {
  const model = tf.sequential()
  model.add(
    tf.layers.conv2d({
      inputShape: [8, 8, 3],
      filters: 6,
      kernelSize: 3,
      padding: 'same',
      activation: 'relu',
      name: 'conv1',
      ...initializers(seed),
    }),
  )
  model.add(tf.layers.maxPooling2d({ poolSize: 2, strides: 2, name: 'pool1' }))
  model.add(tf.layers.flatten({ name: 'flatten' }))
  model.add(tf.layers.dense({ units: 16, activation: 'relu', name: 'fc1', ...initializers(seed + 10) }))
  model.add(tf.layers.dropout({ rate: 0.5, name: 'drop1' }))
  model.add(tf.layers.dense({ units: 5, name: 'fc2', ...initializers(seed + 20) }))
  return model
}

/** Conv blocks of VGG-16: filter counts per block, pool after each block. */
export const VGG16_BLOCKS: number[][] = [
  [64, 64],
  [128, 128],
  [256, 256, 256],
  [512, 512, 512],
  [512, 512, 512],
]

export const VGG16_INPUT: [number, number, number] = [224, 224, 3] // H, W, C
export const VGG16_CLASSES = 1000

export interface Vgg16LayerInfo {
  name: string
  kind: 'conv2d' | 'maxpool2d' | 'relu' | 'flatten' | 'dense' | 'dropout'
  parameterized: boolean
}

/**
 * Structural description of the export the VGG-16 preset produces,
 * without materializing half a gigabyte of weights.
 */
export function describeVgg16(): Vgg16LayerInfo[] {
  const layers: Vgg16LayerInfo[] = []
  VGG16_BLOCKS.forEach((block, b) => {
    block.forEach((_, i) => {
      const name = `block${b + 1}_conv${i + 1}`
      layers.push({ name, kind: 'conv2d', parameterized: true })
      layers.push({ name: `${name}_relu`, kind: 'relu', parameterized: false })
    })
    layers.push({ name: `block${b + 1}_pool`, kind: 'maxpool2d', parameterized: false })
  })
  layers.push({ name: 'flatten', kind: 'flatten', parameterized: false })
  layers.push({ name: 'fc1', kind: 'dense', parameterized: true })
  layers.push({ name: 'fc1_relu', kind: 'relu', parameterized: false })
  layers.push({ name: 'drop1', kind: 'dropout', parameterized: false })
  layers.push({ name: 'fc2', kind: 'dense', parameterized: true })
  layers.push({ name: 'fc2_relu', kind: 'relu', parameterized: false })
  layers.push({ name: 'drop2', kind: 'dropout', parameterized: false })
  layers.push({ name: 'fc3', kind: 'dense', parameterized: true })
  return layers
}

/** Materializes the full VGG-16 graph with seeded random weights (large!). */
export function buildVgg16(seed = 42): tf.LayersModel {
  const model = tf.sequential()
  let first = true
  VGG16_BLOCKS.forEach((block, b) => {
    block.forEach((filters, i) => {
      model.add(
        tf.layers.conv2d({
          ...(first ? { inputShape: VGG16_INPUT } : {}),
          filters,
          kernelSize: 3,
          padding: 'same',
          activation: 'relu',
          name: `block${b + 1}_conv${i + 1}`,
          ...initializers(seed + b * 10 + i),
        }),
      )
      first = false
    })
    model.add(tf.layers.maxPooling2d({ poolSize: 2, strides: 2, name: `block${b + 1}_pool` }))
  })
  model.add(tf.layers.flatten({ name: 'flatten' }))
  model.add(tf.layers.dense({ units: 4096, activation: 'relu', name: 'fc1', ...initializers(seed + 100) }))
  model.add(tf.layers.dropout({ rate: 0.5, name: 'drop1' }))
  model.add(tf.layers.dense({ units: 4096, activation: 'relu', name: 'fc2', ...initializers(seed + 101) }))
  model.add(tf.layers.dropout({ rate: 0.5, name: 'drop2' }))
  model.add(tf.layers.dense({ units: VGG16_CLASSES, name: 'fc3', ...initializers(seed + 102) }))
  return model
}

function numberedLabels(model: tf.LayersModel): string[] {
  const lastLayer = model.layers[model.layers.length - 1]
  const units = (lastLayer.getConfig() as { units?: number }).units ?? 0
  return Array.from({ length: units }, (_, i) => `class_${i}`)
}

export const PRESETS: Record<string, PresetInfo> = {
  'tiny-mlp': { build: buildTinyMlp, classLabels: numberedLabels },
  'tiny-cnn': { build: buildTinyCnn, classLabels: numberedLabels },
  vgg16: { build: buildVgg16, classLabels: numberedLabels },
}
