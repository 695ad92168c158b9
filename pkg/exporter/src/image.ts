/** PNG decoding and preprocessing for the backbone input. */

import { readFileSync } from 'node:fs'
import * as tf from '@tensorflow/tfjs'
import { PNG } from 'pngjs'

export const INPUT_SIZE = 224

export interface RgbImage {
  width: number
  height: number
  /** RGB interleaved, row-major */
  data: Uint8Array
}

export function loadPng(path: string): RgbImage {
  const png = PNG.sync.read(readFileSync(path))
  const pixels = png.width * png.height
  const rgb = new Uint8Array(pixels * 3)
  for (let i = 0; i < pixels; i++) {
    rgb[i * 3] = png.data[i * 4]
    rgb[i * 3 + 1] = png.data[i * 4 + 1]
    rgb[i * 3 + 2] = png.data[i * 4 + 2]
  }
  return { width: png.width, height: png.height, data: rgb }
}

/**
 * Resize to the backbone input and scale to [-0.5, 0.5].
 *
 * Bilinear resampling, then x/255 - 0.5; recorded in the export sidecar so
 * consumers know exactly what the features were computed from.
 */
export function preprocess(image: RgbImage): tf.Tensor3D {
  return tf.tidy(() => {
    const raw = tf.tensor3d(image.data, [image.height, image.width, 3], 'int32')
    const resized = tf.image.resizeBilinear(raw as tf.Tensor3D, [INPUT_SIZE, INPUT_SIZE])
    return resized.div(255).sub(0.5) as tf.Tensor3D
  })
}
