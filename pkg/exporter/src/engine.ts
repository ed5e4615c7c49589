/**
 * Thin wrapper around the relevance engine's command-line interface.
 * The exporter talks to the engine only through its public surfaces:
 * archives on disk and the `mcrp predict` command.
 */

import { execFileSync } from 'child_process'

export interface EnginePrediction {
  logits: number[]
  argmax: number
  label: string | null
}

function engineCommand(): string[] {
  const override = process.env.MCRP_CLI
  if (override && override.trim().length > 0) return override.trim().split(/\s+/)
  return ['mcrp']
}

export function enginePredict(archiveDir: string, probePath: string): EnginePrediction {
  const [cmd, ...prefix] = engineCommand()
  const stdout = execFileSync(
    cmd,
    [...prefix, 'predict', '--model', archiveDir, '--input', probePath],
    { encoding: 'utf8' },
  )
  const lastLine = stdout.trim().split('\n').pop() ?? ''
  return JSON.parse(lastLine) as EnginePrediction
}
