/**
 * HTTP scoring service.
 *
 * POST /score {sentence, candidates: [..]} -> {scores: [..]}, order-preserving.
 * GET  /health -> {status, checkpoint_hash}.
 * Training never runs behind a route; checkpoints come from the CLI.
 */

import express, { Express } from "express";

import { CrossEncoder } from "./model.js";

export interface ServerState {
  model: CrossEncoder | null;
  checkpointHash: string | null;
  candidateCap: number;
}

export function createApp(state: ServerState): Express {
  const app = express();
  app.use(express.json({ limit: "16mb" }));

  app.get("/health", (_req, res) => {
    res.json({
      status: state.model ? "ok" : "no-model",
      checkpoint_hash: state.checkpointHash,
    });
  });

  app.post("/score", (req, res) => {
    if (!state.model) {
      res.status(503).json({ error: "model not loaded" });
      return;
    }
    const { sentence, candidates } = req.body ?? {};
    if (typeof sentence !== "string" || !Array.isArray(candidates) ||
        candidates.some((c: unknown) => typeof c !== "string")) {
      res.status(400).json({ error: "expected {sentence: string, candidates: string[]}" });
      return;
    }
    if (candidates.length > state.candidateCap) {
      res.status(413).json({ error: `at most ${state.candidateCap} candidates per request` });
      return;
    }
    res.json({ scores: state.model.scoreBatch(sentence, candidates) });
  });

  return app;
}
