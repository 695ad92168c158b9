/**
 * Cross-boundary acceptance: files written here must load in the pipeline's
 * Python reader with the right count, dim, ids, and labels, and repeated
 * exports must be byte-identical.
 */

import { execFileSync } from 'node:child_process'
import { readFileSync, writeFileSync } from 'node:fs'
import * as path from 'node:path'
import { describe, expect, it } from 'vitest'

import { runExport } from '../src/export'
import { tempDir, writeCropDir } from './helpers'

const READ_SCRIPT = `
import json, sys
from cellsift.features import read_features
fset = read_features(sys.argv[1])
print(json.dumps({
    "dim": fset.dim,
    "count": len(fset),
    "ids": fset.ids,
    "labels": fset.labels,
}))
`

function pythonRead(file: string): { dim: number; count: number; ids: string[]; labels: (number | null)[] } {
  const stdout = execFileSync('python3', ['-c', READ_SCRIPT, file], { encoding: 'utf-8' })
  return JSON.parse(stdout)
}

describe('cross-boundary round trip', () => {
  it('ten fixture crops load in the primary reader; two exports byte-identical', { timeout: 120_000 }, async () => {
    const started = Date.now()
    const dir = tempDir('crossio-')
    const ids = writeCropDir(dir, 10, 72)
    const labelsFile = path.join(dir, 'labels.csv')
    const labelRows = ids.slice(0, 6).map((id, c) => `${id},${c % 11}`)
    writeFileSync(labelsFile, `id,class_index\n${labelRows.join('\n')}\n`)

    const outA = path.join(dir, 'a.afv')
    const outB = path.join(dir, 'b.afv')
    const report = await runExport({ cropsDir: dir, outPath: outA, labelsFile })
    await runExport({ cropsDir: dir, outPath: outB, labelsFile })
    expect(readFileSync(outA).equals(readFileSync(outB))).toBe(true)

    const loaded = pythonRead(outA)
    expect(loaded.count).toBe(10)
    expect(loaded.dim).toBe(report.dim)
    expect(loaded.ids).toEqual(ids)
    const expectedLabels = ids.map((id, i) => (i < 6 ? i % 11 : null))
    expect(loaded.labels).toEqual(expectedLabels)

    expect(Date.now() - started).toBeLessThan(120_000)
  })
})
