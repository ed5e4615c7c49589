import * as tf from '@tensorflow/tfjs'
import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'
import { afterAll, describe, expect, it } from 'vitest'

import { exportModel, loadModelFromDisk } from '../src/export'
import { buildTinyMlp } from '../src/presets'
import { verifyExport } from '../src/verify'

const tmpRoot = fs.mkdtempSync(path.join(os.tmpdir(), 'mcrp-load-test-'))
afterAll(() => fs.rmSync(tmpRoot, { recursive: true, force: true }))

async function saveStandardLayout(model: tf.LayersModel, dir: string): Promise<string> {
  fs.mkdirSync(dir, { recursive: true })
  let captured: tf.io.ModelArtifacts | null = null
  await model.save(
    tf.io.withSaveHandler(async artifacts => {
      captured = artifacts
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } }
    }),
  )
  const artifacts = captured!
  const shard = 'weights-shard1.bin'
  fs.writeFileSync(path.join(dir, shard), Buffer.from(artifacts.weightData as ArrayBuffer))
  const modelJson = {
    modelTopology: artifacts.modelTopology,
    format: 'layers-model',
    generatedBy: 'test',
    convertedBy: null,
    weightsManifest: [{ paths: [shard], weights: artifacts.weightSpecs }],
  }
  const jsonPath = path.join(dir, 'model.json')
  fs.writeFileSync(jsonPath, JSON.stringify(modelJson))
  return jsonPath
}

describe('loading tfjs models from disk', () => {
  it('loads a model.json + shard layout and exports a verifiable archive', async () => {
    const source = buildTinyMlp(31)
    const jsonPath = await saveStandardLayout(source, path.join(tmpRoot, 'saved'))
    const loaded = await loadModelFromDisk(jsonPath)
    const out = path.join(tmpRoot, 'archive')
    const plan = exportModel(loaded, out)
    expect(plan.layers.filter(l => l.weights).length).toBe(2)
    const report = verifyExport(loaded, out, { probes: 3, seed: 5, tolerance: 1e-4 })
    expect(report.maxDeviation).toBeLessThan(1e-4)
  })
})
