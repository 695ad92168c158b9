/**
 * Export job: run every crop in a directory through a backbone and write
 * the features as one AFV1 file the pipeline reader loads directly.
 */

import { readFileSync, readdirSync, writeFileSync } from 'node:fs'
import * as path from 'node:path'
import * as tf from '@tensorflow/tfjs'

import { FeatureRecord, encodeFeatureFile } from './afv.js'
import { Backbone } from './backbone.js'
import { INPUT_SIZE, loadPng, preprocess } from './image.js'

export interface ExportJob {
  cropsDir: string
  outPath: string
  labelsFile?: string
  backbone?: string
  batchSize?: number
  device?: string
}

export interface ExportReport {
  backbone: string
  dim: number
  crops: number
  exported: number
  skipped: { file: string; reason: string }[]
  preprocessing: { resize: [number, number]; interpolation: string; scale: string }
  device: string
}

export function readLabelsCsv(file: string): Map<string, number> {
  const labels = new Map<string, number>()
  const lines = readFileSync(file, 'utf-8').split(/\r?\n/)
  for (const line of lines.slice(1)) {
    if (!line.trim()) continue
    const comma = line.indexOf(',')
    if (comma < 0) throw new Error(`${file}: malformed label row ${JSON.stringify(line)}`)
    const id = line.slice(0, comma)
    const value = Number.parseInt(line.slice(comma + 1), 10)
    if (!Number.isInteger(value)) {
      throw new Error(`${file}: bad class index for ${id}`)
    }
    labels.set(id, value)
  }
  return labels
}

export async function runExport(job: ExportJob): Promise<ExportReport> {
  const device = job.device ?? 'cpu'
  if (device !== 'cpu') {
    throw new Error(`only the cpu device is supported, got ${device}`)
  }
  await tf.setBackend('cpu')
  await tf.ready()

  const batchSize = job.batchSize ?? 8
  if (batchSize < 1) throw new Error(`batch size must be >= 1, got ${batchSize}`)
  const labels = job.labelsFile ? readLabelsCsv(job.labelsFile) : new Map<string, number>()

  const files = readdirSync(job.cropsDir)
    .filter((f) => f.toLowerCase().endsWith('.png'))
    .sort()
  if (files.length === 0) {
    throw new Error(`no .png crops found in ${job.cropsDir}`)
  }

  const backbone = new Backbone(job.backbone ?? 'seeded-conv-v1')
  const skipped: { file: string; reason: string }[] = []
  const records: FeatureRecord[] = []

  let batch: { id: string; tensor: tf.Tensor3D }[] = []
  const flush = () => {
    if (batch.length === 0) return
    const stacked = tf.stack(batch.map((b) => b.tensor)) as tf.Tensor4D
    const features = backbone.embed(stacked)
    const data = features.dataSync() as Float32Array
    for (let i = 0; i < batch.length; i++) {
      const values = new Float64Array(backbone.outputDim)
      for (let j = 0; j < backbone.outputDim; j++) {
        values[j] = data[i * backbone.outputDim + j]
      }
      records.push({ id: batch[i].id, values, label: labels.get(batch[i].id) })
    }
    stacked.dispose()
    features.dispose()
    for (const b of batch) b.tensor.dispose()
    batch = []
  }

  for (const file of files) {
    const id = path.parse(file).name
    try {
      const image = loadPng(path.join(job.cropsDir, file))
      batch.push({ id, tensor: preprocess(image) })
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err)
      console.warn(`skipping ${file}: ${reason}`)
      skipped.push({ file, reason })
      continue
    }
    if (batch.length >= batchSize) flush()
  }
  flush()
  backbone.dispose()

  if (records.length === 0) {
    throw new Error(`no crops could be processed in ${job.cropsDir}`)
  }

  writeFileSync(job.outPath, encodeFeatureFile(backbone.outputDim, records))
  const report: ExportReport = {
    backbone: backbone.name,
    dim: backbone.outputDim,
    crops: files.length,
    exported: records.length,
    skipped,
    preprocessing: {
      resize: [INPUT_SIZE, INPUT_SIZE],
      interpolation: 'bilinear',
      scale: 'x/255 - 0.5',
    },
    device,
  }
  writeFileSync(job.outPath + '.report.json', JSON.stringify(report, null, 2) + '\n')
  return report
}
