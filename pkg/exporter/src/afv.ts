/**
 * AFV1 feature-file writer/reader, byte-compatible with the pipeline's
 * Python reader.
 *
 * Layout (little-endian): magic "AFV1", dim uint32, count uint64, then per
 * record id length (uint16), UTF-8 id bytes, label flag (uint8), label
 * int32 (only when flagged), dim float64 values. A CRC-32 of everything
 * before it closes the file.
 */

import { crc32 } from 'node:zlib'

export const MAGIC = 'AFV1'

export interface FeatureRecord {
  id: string
  values: Float64Array
  label?: number
}

export function encodeFeatureFile(dim: number, records: FeatureRecord[]): Buffer {
  const chunks: Buffer[] = []
  const header = Buffer.alloc(16)
  header.write(MAGIC, 0, 'ascii')
  header.writeUInt32LE(dim, 4)
  header.writeBigUInt64LE(BigInt(records.length), 8)
  chunks.push(header)

  for (const rec of records) {
    if (rec.values.length !== dim) {
      throw new Error(`record ${rec.id}: expected ${dim} values, got ${rec.values.length}`)
    }
    const idBytes = Buffer.from(rec.id, 'utf-8')
    if (idBytes.length > 0xffff) {
      throw new Error(`record id too long: ${rec.id.slice(0, 32)}...`)
    }
    const head = Buffer.alloc(2 + idBytes.length + 1 + (rec.label === undefined ? 0 : 4))
    head.writeUInt16LE(idBytes.length, 0)
    idBytes.copy(head, 2)
    if (rec.label === undefined) {
      head.writeUInt8(0, 2 + idBytes.length)
    } else {
      head.writeUInt8(1, 2 + idBytes.length)
      head.writeInt32LE(rec.label, 3 + idBytes.length)
    }
    chunks.push(head)
    const values = Buffer.alloc(dim * 8)
    for (let i = 0; i < dim; i++) {
      if (!Number.isFinite(rec.values[i])) {
        throw new Error(`record ${rec.id}: non-finite value at index ${i}`)
      }
      values.writeDoubleLE(rec.values[i], i * 8)
    }
    chunks.push(values)
  }

  const payload = Buffer.concat(chunks)
  const trailer = Buffer.alloc(4)
  trailer.writeUInt32LE(crc32(payload) >>> 0, 0)
  return Buffer.concat([payload, trailer])
}

export function decodeFeatureFile(buf: Buffer): { dim: number; records: FeatureRecord[] } {
  if (buf.length < 4 || buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error('bad magic, not a feature file')
  }
  if (buf.length < 20) {
    throw new Error('truncated header')
  }
  const storedCrc = buf.readUInt32LE(buf.length - 4)
  const payload = buf.subarray(0, buf.length - 4)
  if ((crc32(payload) >>> 0) !== storedCrc) {
    throw new Error('checksum mismatch, file is corrupted')
  }
  const dim = payload.readUInt32LE(4)
  const count = Number(payload.readBigUInt64LE(8))
  let off = 16
  const records: FeatureRecord[] = []
  for (let rec = 0; rec < count; rec++) {
    if (off + 2 > payload.length) throw new Error(`record ${rec}: truncated`)
    const idLen = payload.readUInt16LE(off)
    off += 2
    if (off + idLen + 1 > payload.length) throw new Error(`record ${rec}: truncated`)
    const id = payload.toString('utf-8', off, off + idLen)
    off += idLen
    const flag = payload.readUInt8(off)
    off += 1
    let label: number | undefined
    if (flag === 1) {
      if (off + 4 > payload.length) throw new Error(`record ${rec}: truncated`)
      label = payload.readInt32LE(off)
      off += 4
    } else if (flag !== 0) {
      throw new Error(`record ${rec}: bad label flag ${flag}`)
    }
    if (off + dim * 8 > payload.length) throw new Error(`record ${rec}: truncated`)
    const values = new Float64Array(dim)
    for (let i = 0; i < dim; i++) {
      values[i] = payload.readDoubleLE(off + i * 8)
    }
    off += dim * 8
    records.push({ id, values, label })
  }
  if (off !== payload.length) {
    throw new Error(`${payload.length - off} trailing bytes after record ${count - 1}`)
  }
  return { dim, records }
}
