#!/usr/bin/env node
/**
 * export-mcrp: convert a TensorFlow.js model (preset or model.json on
 * disk) into an MCRP model archive, then cross-check it against the
 * engine's deterministic predictor.
 */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { exportModel, loadModelFromDisk } from './export'
import { PRESETS } from './presets'
import { verifyExport } from './verify'

async function run(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .usage('export-mcrp --arch NAME --out DIR [--probes N]')
    .option('arch', {
      type: 'string',
      describe: `preset architecture (${Object.keys(PRESETS).join(', ')})`,
    })
    .option('model', { type: 'string', describe: 'path to a tfjs model.json instead of a preset' })
    .option('out', { type: 'string', demandOption: true, describe: 'archive output directory' })
    .option('probes', { type: 'number', default: 10, describe: 'verification probe count (0 skips)' })
    .option('seed', { type: 'number', default: 1234, describe: 'probe generator seed' })
    .option('tolerance', { type: 'number', default: 1e-3, describe: 'max allowed logit deviation' })
    .conflicts('arch', 'model')
    .check(args => {
      if (!args.arch && !args.model) throw new Error('one of --arch or --model is required')
      if (args.arch && !PRESETS[args.arch]) throw new Error(`unknown preset "${args.arch}"`)
      return true
    })
    .strict()
    .parse()

  const model = argv.arch ? PRESETS[argv.arch].build() : await loadModelFromDisk(argv.model!)
  const labels = argv.arch ? PRESETS[argv.arch].classLabels(model) : undefined
  const plan = exportModel(model, argv.out, labels)
  const parameterized = plan.layers.filter(l => l.weights).length
  console.log(
    `exported ${plan.layers.length} layers (${parameterized} with weights), ` +
      `input [${plan.inputShape}] -> ${argv.out}`,
  )

  if (argv.probes > 0) {
    const report = verifyExport(model, argv.out, {
      probes: argv.probes,
      seed: argv.seed,
      tolerance: argv.tolerance,
    })
    console.log(
      `verified with ${report.probes} probes: max logit deviation ${report.maxDeviation.toExponential(3)}`,
    )
  }
  return 0
}

run()
  .then(code => process.exit(code))
  .catch(err => {
    console.error(String(err?.message ?? err))
    process.exit(1)
  })
