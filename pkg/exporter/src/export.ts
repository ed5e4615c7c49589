/**
 * Top-level export entry points: plan a model, write the archive, and
 * optionally load a tfjs LayersModel from disk without tfjs-node.
 */

import * as tf from '@tensorflow/tfjs'
import * as fs from 'fs'
import * as path from 'path'

import { ExportPlan, writeArchive } from './archive'
import { planFromModel } from './plan'

export function exportModel(
  model: tf.LayersModel,
  outDir: string,
  classLabels?: string[],
): ExportPlan {
  const plan = planFromModel(model, classLabels)
  writeArchive(plan, outDir)
  return plan
}

interface WeightsManifestEntry {
  paths: string[]
  weights: tf.io.WeightsManifestEntry[]
}

interface ModelJson {
  modelTopology: {}
  format?: string
  generatedBy?: string
  convertedBy?: string | null
  weightsManifest?: WeightsManifestEntry[]
}

/**
 * Load a LayersModel saved in the standard model.json + shard layout.
 * Reads the shards manually and feeds tf.io.fromMemory, since the
 * file:// IO handler only ships with tfjs-node.
 */
export async function loadModelFromDisk(modelJsonPath: string): Promise<tf.LayersModel> {
  const dir = path.dirname(modelJsonPath)
  const modelJson = JSON.parse(fs.readFileSync(modelJsonPath, 'utf8')) as ModelJson
  const specs: tf.io.WeightsManifestEntry[] = []
  const buffers: Buffer[] = []
  for (const group of modelJson.weightsManifest ?? []) {
    specs.push(...group.weights)
    for (const shard of group.paths) {
      buffers.push(fs.readFileSync(path.join(dir, shard)))
    }
  }
  const weightData = Buffer.concat(buffers)
  const artifacts: tf.io.ModelArtifacts = {
    modelTopology: modelJson.modelTopology,
    format: modelJson.format,
    generatedBy: modelJson.generatedBy,
    convertedBy: modelJson.convertedBy ?? undefined,
    weightSpecs: specs,
    weightData: weightData.buffer.slice(
      weightData.byteOffset,
      weightData.byteOffset + weightData.byteLength,
    ),
  }
  return tf.loadLayersModel(tf.io.fromMemory(artifacts))
}
