import { mkdtempSync, writeFileSync } from 'node:fs'
import { tmpdir } from 'node:os'
import * as path from 'node:path'
import { PNG } from 'pngjs'

export function tempDir(prefix: string): string {
  return mkdtempSync(path.join(tmpdir(), prefix))
}

/** Deterministic solid-ish PNG: base color plus a positional ramp. */
export function writeCropPng(file: string, size: number, base: [number, number, number]): void {
  const png = new PNG({ width: size, height: size })
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const i = (y * size + x) * 4
      png.data[i] = (base[0] + x) % 256
      png.data[i + 1] = (base[1] + y) % 256
      png.data[i + 2] = (base[2] + x + y) % 256
      png.data[i + 3] = 255
    }
  }
  writeFileSync(file, PNG.sync.write(png))
}

export function writeCropDir(dir: string, count: number, size = 48): string[] {
  const ids: string[] = []
  for (let i = 0; i < count; i++) {
    const id = `crop_${String(i).padStart(2, '0')}`
    writeCropPng(path.join(dir, `${id}.png`), size, [(37 * i) % 256, (91 * i) % 256, (13 * i) % 256])
    ids.push(id)
  }
  return ids
}
