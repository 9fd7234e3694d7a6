export { lclLoss, lclGradient, logSumExp } from "./lcl.js";
export { pairFeatures } from "./features.js";
export { CrossEncoder, Checkpoint, ModelConfig, DEFAULT_CONFIG, checkpointHash } from "./model.js";
export { CorpusRecord, TrainingGroup, documentText, hashEmbed, mineGroups } from "./mine.js";
export { DEFAULT_HYPERPARAMS, Hyperparams, TrainResult, evaluate, train } from "./train.js";
export { ServerState, createApp } from "./server.js";
