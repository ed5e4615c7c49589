/**
 * MCRP model archive writer: manifest.json plus weights.bin, the format
 * the relevance engine loads. Blobs are little-endian float32, row-major,
 * addressed by byte offset and length.
 */

import * as fs from 'fs'
import * as path from 'path'

export type LayerKind = 'dense' | 'conv2d' | 'maxpool2d' | 'relu' | 'flatten' | 'dropout'

export interface PlannedBlob {
  shape: number[]
  data: Float32Array
}

export interface PlannedLayer {
  name: string
  kind: LayerKind
  hyperparams: Record<string, number>
  weights?: PlannedBlob
  bias?: PlannedBlob
}

export interface ExportPlan {
  /** channels-first [C, H, W], the engine's image order */
  inputShape: [number, number, number]
  layers: PlannedLayer[]
  classLabels: string[] | null
}

interface BlobEntry {
  offset: number
  length: number
  shape: number[]
}

const FORMAT_VERSION = 1

function isLittleEndian(): boolean {
  return new Uint8Array(new Uint32Array([1]).buffer)[0] === 1
}

export function float32Bytes(arr: Float32Array): Buffer {
  if (isLittleEndian()) {
    return Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength)
  }
  const buf = Buffer.alloc(arr.length * 4)
  for (let i = 0; i < arr.length; i++) buf.writeFloatLE(arr[i], i * 4)
  return buf
}

export function blobByteLength(blob: PlannedBlob): number {
  const count = blob.shape.reduce((a, b) => a * b, 1)
  if (count !== blob.data.length) {
    throw new Error(
      `blob shape [${blob.shape}] implies ${count} values, buffer holds ${blob.data.length}`,
    )
  }
  return count * 4
}

export function writeArchive(plan: ExportPlan, outDir: string): void {
  const chunks: Buffer[] = []
  let offset = 0
  const appendBlob = (blob: PlannedBlob): BlobEntry => {
    const bytes = float32Bytes(blob.data)
    const entry = { offset, length: blobByteLength(blob), shape: blob.shape }
    chunks.push(bytes)
    offset += bytes.length
    return entry
  }

  const layers = plan.layers.map(layer => {
    const entry: Record<string, unknown> = {
      name: layer.name,
      kind: layer.kind,
      hyperparams: layer.hyperparams,
    }
    if (layer.weights) entry.weight_blob = appendBlob(layer.weights)
    if (layer.bias) entry.bias_blob = appendBlob(layer.bias)
    return entry
  })

  const manifest = {
    format_version: FORMAT_VERSION,
    input_shape: plan.inputShape,
    class_labels: plan.classLabels,
    layers,
  }

  fs.mkdirSync(outDir, { recursive: true })
  fs.writeFileSync(path.join(outDir, 'manifest.json'), JSON.stringify(manifest, null, 2))
  fs.writeFileSync(path.join(outDir, 'weights.bin'), Buffer.concat(chunks))
}

export interface ArchiveManifest {
  format_version: number
  input_shape: [number, number, number]
  class_labels: string[] | null
  layers: Array<{
    name: string
    kind: LayerKind
    hyperparams: Record<string, number>
    weight_blob?: BlobEntry
    bias_blob?: BlobEntry
  }>
}

export function readManifest(archiveDir: string): ArchiveManifest {
  const raw = fs.readFileSync(path.join(archiveDir, 'manifest.json'), 'utf8')
  return JSON.parse(raw) as ArchiveManifest
}

/** Read one blob back out of weights.bin, for round-trip checks. */
export function readBlob(archiveDir: string, entry: BlobEntry): Float32Array {
  const bin = fs.readFileSync(path.join(archiveDir, 'weights.bin'))
  const slice = bin.subarray(entry.offset, entry.offset + entry.length)
  const out = new Float32Array(entry.length / 4)
  for (let i = 0; i < out.length; i++) out[i] = slice.readFloatLE(i * 4)
  return out
}
