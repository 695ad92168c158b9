/**
 * Convolutional feature backbones.
 *
 * The default backbone is a fixed-weight convolutional network whose
 * parameters are generated from a seeded PRNG: five stride-2 3x3 conv+ReLU
 * stages followed by global average pooling. Random convolutional features
 * are a standard cheap stand-in where true pretrained weights cannot be
 * shipped; the backbone is selected by id so a real pretrained graph can
 * slot in behind the same interface.
 */

import * as tf from '@tensorflow/tfjs'

export interface BackboneSpec {
  seed: number
  filters: number[]
  outputDim: number
}

export const BACKBONES: Record<string, BackboneSpec> = {
  'seeded-conv-v1': { seed: 0x5eedc0de, filters: [8, 16, 32, 64, 128], outputDim: 128 },
  'seeded-conv-small': { seed: 0x5eed0042, filters: [8, 16, 32], outputDim: 32 },
}

/** mulberry32: tiny deterministic PRNG, uniform in [0, 1). */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function heUniform(rng: () => number, shape: number[], fanIn: number): tf.Tensor4D {
  const limit = Math.sqrt(6 / fanIn)
  const size = shape.reduce((a, b) => a * b, 1)
  const data = new Float32Array(size)
  for (let i = 0; i < size; i++) {
    data[i] = (rng() * 2 - 1) * limit
  }
  return tf.tensor4d(data, shape as [number, number, number, number])
}

export class Backbone {
  readonly name: string
  readonly outputDim: number
  private kernels: tf.Tensor4D[]

  constructor(name: string) {
    const spec = BACKBONES[name]
    if (!spec) {
      throw new Error(`unknown backbone ${name}; known: ${Object.keys(BACKBONES).join(', ')}`)
    }
    this.name = name
    this.outputDim = spec.outputDim
    const rng = mulberry32(spec.seed)
    this.kernels = []
    let channels = 3
    for (const filters of spec.filters) {
      const fanIn = 3 * 3 * channels
      this.kernels.push(heUniform(rng, [3, 3, channels, filters], fanIn))
      channels = filters
    }
  }

  /** (batch, 224, 224, 3) -> (batch, outputDim) pooled features. */
  embed(batch: tf.Tensor4D): tf.Tensor2D {
    return tf.tidy(() => {
      let x: tf.Tensor4D = batch
      for (const kernel of this.kernels) {
        x = tf.relu(tf.conv2d(x, kernel, 2, 'same'))
      }
      return tf.mean(x, [1, 2]) as tf.Tensor2D
    })
  }

  dispose(): void {
    for (const kernel of this.kernels) kernel.dispose()
  }
}
