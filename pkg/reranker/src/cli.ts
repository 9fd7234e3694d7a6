/**
 * Offline entry points: mine groups from a corpus file, train a checkpoint,
 * serve a checkpoint over HTTP.
 *
 *   cli mine  --corpus corpus.json --out groups.json [--group-size 8]
 *   cli train --groups groups.json --out ckpt.json [--lr 2e-5] [--epochs 2]
 *   cli serve --checkpoint ckpt.json [--port 8700] [--candidate-cap 512]
 */

import { readFileSync, writeFileSync } from "node:fs";

import { Checkpoint, CrossEncoder, checkpointHash } from "./model.js";
import { CorpusRecord, mineGroups } from "./mine.js";
import { createApp } from "./server.js";
import { DEFAULT_HYPERPARAMS, train } from "./train.js";

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --key value pairs, got ${argv.join(" ")}`);
    }
    args.set(key.slice(2), argv[i + 1]);
  }
  return args;
}

function required(args: Map<string, string>, key: string): string {
  const value = args.get(key);
  if (!value) throw new Error(`--${key} is required`);
  return value;
}

function cmdMine(args: Map<string, string>): void {
  const records = JSON.parse(readFileSync(required(args, "corpus"), "utf-8")) as CorpusRecord[];
  const groupSize = Number(args.get("group-size") ?? DEFAULT_HYPERPARAMS.groupSize);
  const groups = mineGroups(records, groupSize);
  writeFileSync(required(args, "out"), JSON.stringify(groups));
  console.log(`mined ${groups.length} groups of size ${groupSize}`);
}

function cmdTrain(args: Map<string, string>): void {
  const groups = JSON.parse(readFileSync(required(args, "groups"), "utf-8"));
  const result = train(groups, {
    learningRate: Number(args.get("lr") ?? DEFAULT_HYPERPARAMS.learningRate),
    epochs: Number(args.get("epochs") ?? DEFAULT_HYPERPARAMS.epochs),
    groupSize: Number(args.get("group-size") ?? DEFAULT_HYPERPARAMS.groupSize),
    seed: Number(args.get("seed") ?? DEFAULT_HYPERPARAMS.seed),
  });
  writeFileSync(required(args, "out"), JSON.stringify(result.checkpoint));
  console.log(`checkpoint ${result.checkpointHash}`);
  console.log(`holdout loss ${result.holdoutBefore.meanLoss.toFixed(4)} -> ${result.holdoutAfter.meanLoss.toFixed(4)}`);
  console.log(`holdout MRR  ${result.holdoutBefore.mrr.toFixed(4)} -> ${result.holdoutAfter.mrr.toFixed(4)}`);
  if (result.diverged) console.error("training diverged; kept the last finite checkpoint");
}

function cmdServe(args: Map<string, string>): void {
  const checkpoint = JSON.parse(readFileSync(required(args, "checkpoint"), "utf-8")) as Checkpoint;
  const state = {
    model: CrossEncoder.deserialize(checkpoint),
    checkpointHash: checkpointHash(checkpoint),
    candidateCap: Number(args.get("candidate-cap") ?? 512),
  };
  const port = Number(args.get("port") ?? 8700);
  createApp(state).listen(port, () => {
    console.log(`scoring service on :${port} (checkpoint ${state.checkpointHash.slice(0, 12)})`);
  });
}

export function main(argv: string[]): void {
  const [command, ...rest] = argv;
  const args = parseArgs(rest);
  if (command === "mine") cmdMine(args);
  else if (command === "train") cmdTrain(args);
  else if (command === "serve") cmdServe(args);
  else {
    console.error("usage: cli <mine|train|serve> --key value ...");
    process.exitCode = 2;
  }
}

main(process.argv.slice(2));
