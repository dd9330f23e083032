/** Training loops and corpus-level state.
 *
 * LM fine-tuning: masked-token prediction over the whole task corpus,
 * adam with no weight decay, warmup then linear decay. The result is
 * cached on disk keyed by (corpus hash, epochs); zero epochs returns the
 * deterministic base checkpoint untouched.
 *
 * Classification fine-tuning: cross-entropy on the two-way head over ALL
 * labeled documents, warm-started from the previous call's parameters.
 * Each call runs a fresh decoupled-weight-decay adam with its own
 * warmup + linear-decay schedule.
 */

import * as tf from "@tensorflow/tfjs";
import * as crypto from "crypto";
import * as fs from "fs";
import * as path from "path";

import { PluginConfig } from "./config";
import { TaskCorpus } from "./corpus";
import { maskTokens } from "./masking";
import { MiniEncoder, ModelDims } from "./model";
import { Rng, hashString } from "./rng";
import { Tokenizer, buildTokenizer, encode, padBatch } from "./tokenizer";

export interface LabeledDoc {
    seqIndex: number;
    label: number;
}

export class PluginState {
    constructor(
        readonly config: PluginConfig,
        readonly tokenizer: Tokenizer,
        readonly model: MiniEncoder,
        readonly sequences: number[][],
        readonly docIds: string[],
        readonly corpusHash: string
    ) {}

    fitCalls = 0;
    trained = false;
}

function dimsFor(config: PluginConfig, vocabSize: number): ModelDims {
    return {
        vocabSize,
        dModel: config.dModel,
        numLayers: config.numLayers,
        numHeads: config.numHeads,
        ffnDim: config.ffnDim,
        maxTokens: config.maxTokens,
    };
}

/** Warmup then linear decay to zero; 1-based peak reached at `warmup`. */
export function learningRate(step: number, totalSteps: number, warmup: number, peak: number): number {
    if (step < warmup) {
        return (peak * (step + 1)) / warmup;
    }
    const rest = totalSteps - warmup;
    if (rest <= 0) return peak;
    return peak * Math.max(0, (totalSteps - step) / rest);
}

/** The configured warmup assumes paper-scale step counts; clip it to a
 * tenth of the call's steps so short desk-scale calls still spend most of
 * their budget at useful learning rates. */
export function effectiveWarmup(configured: number, totalSteps: number): number {
    return Math.min(configured, Math.max(1, Math.floor(totalSteps / 10)));
}

function trainStep(
    model: MiniEncoder,
    variables: tf.Variable[],
    optimizer: tf.Optimizer,
    lossFn: () => tf.Scalar,
    lr: number,
    weightDecay: number
): number {
    (optimizer as unknown as { learningRate: number }).learningRate = lr;
    const { value, grads } = tf.variableGrads(lossFn, variables);
    optimizer.applyGradients(grads);
    if (weightDecay > 0) {
        // decoupled weight decay on matrices; biases and layer norms exempt
        for (const variable of variables) {
            if (variable.shape.length >= 2) {
                tf.tidy(() => variable.assign(variable.mul(1 - lr * weightDecay)));
            }
        }
    }
    const loss = value.dataSync()[0];
    value.dispose();
    tf.dispose(grads);
    return loss;
}

function headVariables(model: MiniEncoder, head: "mlm" | "cls"): tf.Variable[] {
    const exclude = head === "mlm" ? "cls/" : "mlm/";
    const out: tf.Variable[] = [];
    for (const [name, variable] of model.params) {
        if (!name.startsWith(exclude)) out.push(variable);
    }
    return out;
}

function batched(indices: number[], size: number): number[][] {
    const out: number[][] = [];
    for (let i = 0; i < indices.length; i += size) {
        out.push(indices.slice(i, i + size));
    }
    return out;
}

/** Mean masked-LM loss over the corpus without updating parameters. */
export function lmEvalLoss(state: PluginState, rngSeed = 7): number {
    const rng = new Rng(rngSeed);
    const losses: number[] = [];
    for (const batch of batched([...state.sequences.keys()], state.config.lmBatchSize)) {
        const masked = batch.map((i) => maskTokens(state.sequences[i], state.config.maskProb, rng));
        if (masked.every((m) => m.nMasked === 0)) continue;
        const { ids, mask } = padBatch(masked.map((m) => m.inputIds));
        const labels = masked.map((m, r) =>
            m.labels.concat(Array(ids[r].length - m.labels.length).fill(-1))
        );
        const loss = state.model.mlmLoss(ids, mask, labels);
        losses.push(loss.dataSync()[0]);
        loss.dispose();
    }
    return losses.reduce((a, b) => a + b, 0) / losses.length;
}

export function lmFinetune(state: PluginState, epochs: number): void {
    if (epochs === 0) return;
    const config = state.config;
    const rng = new Rng((config.trainSeed ^ hashString("lm")) >>> 0);
    const order = [...state.sequences.keys()];
    const stepsPerEpoch = Math.ceil(order.length / config.lmBatchSize);
    const totalSteps = epochs * stepsPerEpoch;
    const warmup = effectiveWarmup(config.warmupSteps, totalSteps);
    const optimizer = tf.train.adam(config.lmLearningRate);
    const variables = headVariables(state.model, "mlm");
    let step = 0;
    for (let epoch = 0; epoch < epochs; epoch++) {
        for (const batch of batched(rng.shuffle(order), config.lmBatchSize)) {
            const masked = batch.map((i) => maskTokens(state.sequences[i], config.maskProb, rng));
            if (masked.every((m) => m.nMasked === 0)) {
                step++;
                continue;
            }
            const { ids, mask } = padBatch(masked.map((m) => m.inputIds));
            const labels = masked.map((m, r) =>
                m.labels.concat(Array(ids[r].length - m.labels.length).fill(-1))
            );
            const lr = learningRate(step, totalSteps, warmup, config.lmLearningRate);
            trainStep(state.model, variables, optimizer, () => state.model.mlmLoss(ids, mask, labels), lr, 0);
            step++;
        }
    }
    optimizer.dispose();
}

export function clsFinetune(state: PluginState, labeled: LabeledDoc[], epochsOverride?: number): void {
    const config = state.config;
    state.fitCalls++;
    const epochs = epochsOverride ?? config.clsEpochs;
    if (labeled.length === 0 || epochs === 0) {
        state.trained = state.trained || labeled.length > 0;
        return;
    }
    const rng = new Rng((config.trainSeed ^ hashString(`cls-${state.fitCalls}`)) >>> 0);
    const order = [...labeled.keys()];
    const stepsPerEpoch = Math.ceil(order.length / config.clsBatchSize);
    const totalSteps = epochs * stepsPerEpoch;
    const warmup = effectiveWarmup(config.warmupSteps, totalSteps);
    const optimizer = tf.train.adam(config.clsLearningRate);
    const variables = headVariables(state.model, "cls");
    let step = 0;
    for (let epoch = 0; epoch < epochs; epoch++) {
        for (const batch of batched(rng.shuffle(order), config.clsBatchSize)) {
            const { ids, mask } = padBatch(batch.map((i) => state.sequences[labeled[i].seqIndex]));
            const labels = batch.map((i) => labeled[i].label);
            const lr = learningRate(step, totalSteps, warmup, config.clsLearningRate);
            trainStep(
                state.model,
                variables,
                optimizer,
                () => state.model.clsLoss(ids, mask, labels),
                lr,
                config.weightDecay
            );
            step++;
        }
    }
    optimizer.dispose();
    state.trained = true;
}

export function trainingAccuracy(state: PluginState, labeled: LabeledDoc[]): number {
    const scores = scoreSubset(state, labeled.map((l) => l.seqIndex));
    let correct = 0;
    labeled.forEach((l, i) => {
        if ((scores[i] >= 0.5 ? 1 : 0) === l.label) correct++;
    });
    return correct / labeled.length;
}

function scoreSubset(state: PluginState, seqIndices: number[]): number[] {
    const out: number[] = [];
    for (const batch of batched(seqIndices, state.config.scoreBatchSize)) {
        const { ids, mask } = padBatch(batch.map((i) => state.sequences[i]));
        const probs = state.model.scoreBatch(ids, mask);
        for (const p of probs) {
            out.push(Math.min(Math.max(p, 1e-6), 1 - 1e-6));
        }
    }
    return out;
}

/** P(relevant) for every corpus document, in corpus order. */
export function scoreAll(state: PluginState): number[] {
    return scoreSubset(state, [...state.sequences.keys()]);
}

// ---------------------------------------------------------------------------
// LM checkpoint cache: <cacheDir>/<corpus-hash>/lm-<epochs>/checkpoint.json

function lmConfigKey(config: PluginConfig, tokenizer: Tokenizer): string {
    const payload = JSON.stringify({
        baseModelId: config.baseModelId,
        dModel: config.dModel,
        numLayers: config.numLayers,
        numHeads: config.numHeads,
        ffnDim: config.ffnDim,
        maxTokens: config.maxTokens,
        maskProb: config.maskProb,
        lmLearningRate: config.lmLearningRate,
        lmBatchSize: config.lmBatchSize,
        warmupSteps: config.warmupSteps,
        trainSeed: config.trainSeed,
        vocab: [...tokenizer.termToId.keys()],
    });
    return crypto.createHash("sha256").update(payload).digest("hex").slice(0, 16);
}

export function checkpointPath(config: PluginConfig, corpusHash: string, epochs: number): string {
    return path.join(config.cacheDir, corpusHash, `lm-${epochs}`, "checkpoint.json");
}

function tryLoadCheckpoint(state: PluginState, epochs: number): boolean {
    const file = checkpointPath(state.config, state.corpusHash, epochs);
    if (!fs.existsSync(file)) return false;
    const data = JSON.parse(fs.readFileSync(file, "utf-8"));
    if (data.configKey !== lmConfigKey(state.config, state.tokenizer)) return false;
    state.model.importWeights(data.weights);
    return true;
}

function saveCheckpoint(state: PluginState, epochs: number): void {
    const file = checkpointPath(state.config, state.corpusHash, epochs);
    fs.mkdirSync(path.dirname(file), { recursive: true });
    const payload = {
        configKey: lmConfigKey(state.config, state.tokenizer),
        epochs,
        weights: state.model.exportWeights(),
    };
    fs.writeFileSync(file, JSON.stringify(payload));
}

/** Build per-corpus state: tokenizer, base model, encoded docs, then the
 * one-time LM fine-tune (from cache when available). */
export function initializeForCorpus(config: PluginConfig, corpus: TaskCorpus): PluginState {
    const texts = corpus.docs.map((d) => d.text);
    const tokenizer = buildTokenizer(texts, config.vocabSize);
    const model = new MiniEncoder(dimsFor(config, tokenizer.vocabSize), config.baseModelId);
    const sequences = corpus.docs.map((d) => encode(tokenizer, d.text, config.maxTokens));
    const state = new PluginState(
        config,
        tokenizer,
        model,
        sequences,
        corpus.docs.map((d) => d.docId),
        corpus.hash
    );
    if (config.lmEpochs > 0 && !tryLoadCheckpoint(state, config.lmEpochs)) {
        lmFinetune(state, config.lmEpochs);
        saveCheckpoint(state, config.lmEpochs);
    }
    return state;
}
