export {
  ExportPlan,
  LayerKind,
  PlannedBlob,
  PlannedLayer,
  blobByteLength,
  float32Bytes,
  readBlob,
  readManifest,
  writeArchive,
} from './archive'
export { UnsupportedLayerError, permuteDenseRows, planFromModel } from './plan'
export { exportModel, loadModelFromDisk } from './export'
export { readTensorDump, writeTensorDump } from './mcrt'
export { EnginePrediction, enginePredict } from './engine'
export { VerificationError, VerifyOptions, VerifyReport, mulberry32, verifyExport } from './verify'
export {
  PRESETS,
  VGG16_BLOCKS,
  VGG16_CLASSES,
  VGG16_INPUT,
  buildTinyCnn,
  buildTinyMlp,
  buildVgg16,
  describeVgg16,
} from './presets'
