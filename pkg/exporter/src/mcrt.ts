/**
 * MCRT raw tensor dumps: magic "MCRT", version byte, rank and extents as
 * little-endian uint32, float32 values row-major. Used here to ship probe
 * inputs to the engine and to read logits back.
 */

import * as fs from 'fs'

const MAGIC = Buffer.from('MCRT', 'ascii')
const VERSION = 1

export function writeTensorDump(path: string, shape: number[], data: Float32Array): void {
  if (shape.length === 0) throw new Error('rank-0 tensors cannot be dumped')
  const count = shape.reduce((a, b) => a * b, 1)
  if (count !== data.length) {
    throw new Error(`shape [${shape}] implies ${count} values, buffer holds ${data.length}`)
  }
  const header = Buffer.alloc(4 + 1 + 4 + 4 * shape.length)
  MAGIC.copy(header, 0)
  header.writeUInt8(VERSION, 4)
  header.writeUInt32LE(shape.length, 5)
  shape.forEach((extent, i) => header.writeUInt32LE(extent, 9 + 4 * i))
  const body = Buffer.alloc(count * 4)
  for (let i = 0; i < count; i++) body.writeFloatLE(data[i], i * 4)
  fs.writeFileSync(path, Buffer.concat([header, body]))
}

export function readTensorDump(path: string): { shape: number[]; data: Float32Array } {
  const raw = fs.readFileSync(path)
  if (raw.length < 9 || !raw.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`${path}: not an MCRT tensor dump`)
  }
  if (raw.readUInt8(4) !== VERSION) throw new Error(`${path}: unsupported MCRT version`)
  const rank = raw.readUInt32LE(5)
  if (rank === 0) throw new Error(`${path}: rank-0 dumps are forbidden`)
  const shape: number[] = []
  for (let i = 0; i < rank; i++) shape.push(raw.readUInt32LE(9 + 4 * i))
  const count = shape.reduce((a, b) => a * b, 1)
  const offset = 9 + 4 * rank
  if (raw.length !== offset + 4 * count) throw new Error(`${path}: truncated or oversized dump`)
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) data[i] = raw.readFloatLE(offset + 4 * i)
  return { shape, data }
}
