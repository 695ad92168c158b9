import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { BACKBONES } from './backbone.js'
import { runExport } from './export.js'

export async function main(argv: string[]): Promise<number> {
  const parser = yargs(argv)
    .scriptName('cellsift-export')
    .command(
      'export',
      'embed crops with a convolutional backbone and write an AFV1 feature file',
      (y) =>
        y
          .option('crops', { type: 'string', demandOption: true, describe: 'directory of .png crops' })
          .option('out', { type: 'string', demandOption: true, describe: 'output feature file' })
          .option('labels', { type: 'string', describe: 'CSV of id,class_index' })
          .option('backbone', {
            type: 'string',
            default: 'seeded-conv-v1',
            choices: Object.keys(BACKBONES),
          })
          .option('batch', { type: 'number', default: 8 })
          .option('device', { type: 'string', default: 'cpu' }),
    )
    .demandCommand(1)
    .strict()
    .help()

  const args = await parser.parse()
  const report = await runExport({
    cropsDir: args.crops as string,
    outPath: args.out as string,
    labelsFile: args.labels as string | undefined,
    backbone: args.backbone as string,
    batchSize: args.batch as number,
    device: args.device as string,
  })
  console.log(
    `exported ${report.exported}/${report.crops} crops ` +
      `(dim ${report.dim}, backbone ${report.backbone}) -> ${args.out}`,
  )
  if (report.skipped.length > 0) {
    console.warn(`${report.skipped.length} crops skipped; see ${args.out}.report.json`)
  }
  return 0
}

const isMain = process.argv[1] && import.meta.url === new URL(`file://${process.argv[1]}`).href
if (isMain) {
  main(hideBin(process.argv))
    .then((code) => process.exit(code))
    .catch((err) => {
      console.error(`error: ${err instanceof Error ? err.message : err}`)
      process.exit(2)
    })
}
